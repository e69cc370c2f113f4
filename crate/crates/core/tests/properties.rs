mod common;

use common::random_matrix;
use proptest::prelude::*;
use qicert::certificate::{
    check_hypotheses, chernoff_envelope, tune_parameters, tuning_caps, CoherenceStats,
    TheoremParams,
};
use qicert::ensembles::{mask_bilateral, sample_bernoulli, sample_uniform_subset};
use qicert::matrix::{
    extract_principal, gram, hollow_gram, normalize_columns, spectral_norm, spectral_norm_default,
    DEFAULT_MAX_ITER,
};
use qicert::DenseMatrix;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn unit_matrix(n: usize, p: usize, seed: u64) -> DenseMatrix {
    normalize_columns(&random_matrix(n, p, seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn op_norm_squared_is_gram_norm(n in 1usize..12, p in 1usize..12, seed in any::<u64>()) {
        let x = random_matrix(n, p, seed);
        let a = spectral_norm_default(&x).unwrap();
        let b = spectral_norm_default(&gram(&x)).unwrap();
        prop_assert!(close(a * a, b, 1e-9), "{} vs {}", a * a, b);
    }

    #[test]
    fn principal_submatrix_bridge(n in 2usize..10, p in 2usize..24, frac in 0.05f64..1.0, seed in any::<u64>()) {
        let x = unit_matrix(n, p, seed);
        let s = ((frac * p as f64).ceil() as usize).clamp(1, p);
        let t = sample_uniform_subset(p, s, seed ^ 0xabcd).unwrap().indices();
        let direct = gram(&x.select_columns(&t).unwrap()).sub(&DenseMatrix::identity(s)).unwrap();
        let via_h = extract_principal(&hollow_gram(&x).unwrap(), &t).unwrap();
        let a = spectral_norm(&direct, 1e-14, DEFAULT_MAX_ITER).unwrap();
        let b = spectral_norm(&via_h, 1e-14, DEFAULT_MAX_ITER).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn masking_contracts(p in 2usize..20, d1 in 0.05f64..1.0, d2 in 0.05f64..1.0, seed in any::<u64>()) {
        let h = hollow_gram(&unit_matrix(6, p, seed)).unwrap();
        let left = sample_bernoulli(p, d1, seed.wrapping_add(1)).unwrap();
        let right = sample_bernoulli(p, d2, seed.wrapping_add(2)).unwrap();
        let masked = spectral_norm_default(&mask_bilateral(&h, &left, &right).unwrap()).unwrap();
        let full = spectral_norm_default(&h).unwrap();
        prop_assert!(masked <= full * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn bilateral_square_identity(p in 2usize..16, d in 0.1f64..0.9, seed in any::<u64>()) {
        // ‖RHR′‖² = ‖RHR′HR‖ since R′ is a projection.
        let h = hollow_gram(&unit_matrix(5, p, seed)).unwrap();
        let left = sample_bernoulli(p, d, seed.wrapping_add(3)).unwrap();
        let right = sample_bernoulli(p, d, seed.wrapping_add(4)).unwrap();
        let rhr = mask_bilateral(&h, &left, &right).unwrap();
        let lhs = spectral_norm_default(&rhr).unwrap().powi(2);
        let back = mask_bilateral(&h, &right, &left).unwrap();
        let rhs = spectral_norm_default(&rhr.matmul(&back).unwrap()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-9), "{lhs} vs {rhs}");
    }

    #[test]
    fn larger_alpha_shrinks_thresholds(
        alpha in 1.0f64..6.0, bump in 0.01f64..3.0, r in 0.01f64..0.99,
        p in 3usize..100_000, mu in 0.0f64..1.0, op in 0.5f64..20.0,
    ) {
        let stats = CoherenceStats::from_scalars(mu, op, 10, p).unwrap();
        let a = check_hypotheses(&stats, &TheoremParams::new(r, alpha, 1, p).unwrap()).unwrap();
        let b = check_hypotheses(&stats, &TheoremParams::new(r, alpha + bump, 1, p).unwrap()).unwrap();
        prop_assert!(b.mu_bound < a.mu_bound);
        prop_assert!(b.s_bound < a.s_bound);
        prop_assert!(b.failure_bound < a.failure_bound);
        prop_assert!(!(b.mu_ok && !a.mu_ok));
    }

    #[test]
    fn rows_hold_inside_caps(
        alpha in 1.0f64..4.0, r in 0.05f64..0.95, p in 20usize..1_000_000,
        mu_frac in 0.01f64..0.99, s_frac in 0.01f64..0.99,
    ) {
        let log_p = (p as f64).ln();
        let (c_mu_cap, _) = tuning_caps(alpha, r, 0.0);
        let c_mu = mu_frac * c_mu_cap;
        let (_, c_s_cap) = tuning_caps(alpha, r, c_mu);
        let c_s = s_frac * c_s_cap;
        let s = 1usize;
        let op_sq = c_s * p as f64 / (s as f64 * log_p);
        let stats = CoherenceStats::from_scalars(c_mu / log_p, op_sq.sqrt(), 10, p).unwrap();
        let tuned = tune_parameters(&stats, &TheoremParams::new(r, alpha, s, p).unwrap()).unwrap();
        prop_assert!(tuned.all_satisfied(), "{:?}", tuned.constraints);
    }
}

#[test]
fn envelope_decreases_along_tuned_trajectory() {
    let (alpha, r) = (1.0, 0.5);
    let alpha_prime = alpha + 1.0;
    let r_prime = r / 2.0;
    let (c_mu_cap, _) = tuning_caps(alpha, r, 0.0);
    let c_mu = 0.9 * c_mu_cap;
    let (_, c_s_cap) = tuning_caps(alpha, r, c_mu);
    let c_s = 0.9 * c_s_cap;
    let k = 2.0;
    let mut last = f64::INFINITY;
    for exp in 2..=12 {
        let p = 10f64.powf(exp as f64 / 2.0);
        let log_p = p.ln();
        let s = c_s * p / (k * log_p);
        let mu = c_mu / log_p;
        let env = chernoff_envelope(
            s,
            p,
            r_prime,
            alpha_prime * log_p * k,
            alpha_prime * log_p * mu * mu,
            k,
            mu,
        )
        .unwrap();
        assert!(env.value < last, "p={p}: {} !< {last}", env.value);
        assert!(env.value <= 9.0 * p.powf(-alpha) * (1.0 + 1e-9));
        last = env.value;
    }
    assert!(last < 1.0);
}
