//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run alone with `cargo test -p qicert-cli --test acceptance`.

#[path = "../../core/tests/common/jacobi.rs"]
#[allow(dead_code)]
mod jacobi;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use clap::Parser;
use qicert::certificate::{constants_comparison, failure_bound};
use qicert::ensembles::{gen_matrix, mask_bilateral, sample_uniform_subset, EnsembleSpec};
use qicert::matrix::{
    gram, hollow_gram, spectral_norm, spectral_norm_default, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use qicert::montecarlo::{
    decoupling_experiment, failure_probability_experiment, interior_grid, intermediate_tails,
    linspace, poissonization_experiment, Verdict, VerdictStatus, DEFAULT_GAMMA,
};
use qicert::oracles::{
    chaos_moments_exact, chaos_moments_formula, chernoff_empirical, ChaosInstance,
    ChernoffInstance, CHAOS_RATIO_BOUND,
};
use qicert::rng::derive_seed;
use qicert::DenseMatrix;
use qicert_cli::args::Cli;
use qicert_cli::{run, Output};

const TRIALS: u64 = 10_000;
const MC_SEED: u64 = 20_260_401;
const GEN_SEED: u64 = 1;

/// Tolerances and budgets fixed by the acceptance criteria.
const CONSTANT_REL_TOL: f64 = 0.05;
const CHAOS_REL_TOL: f64 = 1e-10;
const BRIDGE_TOL: f64 = 1e-10;
const JACOBI_REL_TOL: f64 = 1e-8;
/// Solver tolerance for the bridge, well below the tolerance being tested.
const BRIDGE_SOLVER_TOL: f64 = 1e-13;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    ((value - target) / target).abs() <= tol
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn unit(seed: u64, tag: &str, i: u64) -> f64 {
    (derive_seed(seed, tag, i) >> 11) as f64 / (1u64 << 53) as f64
}

fn desk_matrices() -> Vec<(&'static str, DenseMatrix)> {
    vec![
        (
            "gaussian_unit(32,64)",
            gen_matrix(&EnsembleSpec::gaussian_unit(32, 64, GEN_SEED)).unwrap(),
        ),
        (
            "spikes_sines(32)",
            gen_matrix(&EnsembleSpec::spikes_sines(32)).unwrap(),
        ),
    ]
}

fn default_grid(x: &DenseMatrix) -> Vec<f64> {
    let h = hollow_gram(x).unwrap();
    interior_grid(2.0 * spectral_norm_default(&h).unwrap(), 8)
}

fn count_fail(verdicts: &[Verdict]) -> usize {
    verdicts.iter().filter(|v| v.is_fail()).count()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let c = constants_comparison(2.0 * 2f64.ln(), 0.5).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "C_mu={:.4e} C_s={:.4e} competing C_s={:.4e} C_mu={:.4e}",
        c.c_mu_ours, c.c_s_ours, c.c_s_cp, c.c_mu_cp
    );
    ensure(
        within(c.c_mu_ours, 0.1, CONSTANT_REL_TOL)
            && within(c.c_s_ours, 3.5e-3, CONSTANT_REL_TOL)
            && within(c.c_s_cp, 1.18e-4, CONSTANT_REL_TOL)
            && within(c.c_mu_cp, 1.7e-3, CONSTANT_REL_TOL)
            && elapsed < Duration::from_secs(1),
        detail,
    )
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let (mut worst_m2, mut worst_m4, mut worst_ratio, mut violations) = (0.0f64, 0.0f64, 0.0f64, 0);
    for k in 0..200u64 {
        let p = 3 + (k as usize % 10);
        let inst = ChaosInstance::random(p, derive_seed(MC_SEED, "acceptance-chaos", k));
        let exact = chaos_moments_exact(&inst).map_err(|e| e.to_string())?;
        let formula = chaos_moments_formula(&inst);
        let sum_sq: f64 = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .map(|(i, j)| inst.get(i, j).powi(2))
            .sum();
        worst_m2 = worst_m2.max(rel(exact.m2, sum_sq));
        worst_m4 = worst_m4.max(rel(exact.m4, formula.m4));
        let ratio = exact.ratio().unwrap_or(0.0);
        worst_ratio = worst_ratio.max(ratio);
        if ratio > CHAOS_RATIO_BOUND {
            violations += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(
        worst_m2 <= CHAOS_REL_TOL
            && worst_m4 <= CHAOS_REL_TOL
            && violations == 0
            && elapsed < Duration::from_secs(60),
        format!(
            "200 instances: max ratio {worst_ratio:.4}, {violations} above 9, m2 err {worst_m2:.1e}, m4 err {worst_m4:.1e}"
        ),
    )
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let (mut fails, mut total, mut vacuous) = (0, 0, 0);
    for (_, x) in desk_matrices() {
        let grid = default_grid(&x);
        for delta in [0.1, 0.2] {
            let e = decoupling_experiment(&x, delta, &grid, TRIALS, MC_SEED, DEFAULT_GAMMA)
                .map_err(|e| e.to_string())?;
            fails += count_fail(&e.verdicts);
            total += e.verdicts.len();
            vacuous += e
                .verdicts
                .iter()
                .filter(|v| v.status == VerdictStatus::Vacuous)
                .count();
        }
    }
    let elapsed = start.elapsed();
    ensure(
        fails == 0 && elapsed < Duration::from_secs(600),
        format!(
            "{fails} failing of {total} verdicts ({vacuous} vacuous), {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let (mut fails, mut total) = (0, 0);
    for (_, x) in desk_matrices() {
        let grid = default_grid(&x);
        for s in [4, 8] {
            let e = poissonization_experiment(&x, s, &grid, TRIALS, MC_SEED, DEFAULT_GAMMA)
                .map_err(|e| e.to_string())?;
            fails += count_fail(&e.verdicts);
            total += e.verdicts.len();
        }
    }
    let elapsed = start.elapsed();
    ensure(
        fails == 0 && elapsed < Duration::from_secs(600),
        format!(
            "{fails} failing of {total} verdicts, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Check {
    let x = gen_matrix(&EnsembleSpec::gaussian_unit(32, 64, GEN_SEED)).unwrap();
    let h = hollow_gram(&x).unwrap();
    let alpha_prime = 2.0;
    let scale = alpha_prime * 64f64.ln();
    let u = (scale * spectral_norm_default(&x).unwrap().powi(2)).sqrt();
    let v = (scale * h.max_abs().powi(2)).sqrt();
    let t = intermediate_tails(&x, 0.1, u, v, TRIALS, MC_SEED, DEFAULT_GAMMA)
        .map_err(|e| e.to_string())?;
    let checked = t
        .verdicts
        .iter()
        .filter(|v| v.status == VerdictStatus::Pass || v.is_fail())
        .count();
    let fails = count_fail(&t.verdicts);
    ensure(
        fails == 0,
        format!(
            "u={u:.3} v={v:.3}: bounds {:?} / {:?}, upper CIs {:.2e} / {:.2e}, {checked} checked, {fails} failing",
            t.bound_u, t.bound_v, t.tail_rh_norm.upper, t.tail_rh_col.upper
        ),
    )
}

fn criterion_6() -> Check {
    let inst = ChernoffInstance::diagonal_selector(64, 0.1).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (1..=12)
        .map(|k| std::f64::consts::E * inst.mu_max * k as f64)
        .collect();
    let points = chernoff_empirical(&inst, &grid, TRIALS, MC_SEED, DEFAULT_GAMMA)
        .map_err(|e| e.to_string())?;
    let in_domain = points.iter().filter(|p| p.bound.is_some()).count();
    let exceed = points.iter().filter(|p| p.exceeds).count();
    let min_bound = points
        .iter()
        .filter_map(|p| p.bound)
        .fold(f64::INFINITY, f64::min);
    ensure(
        exceed == 0 && in_domain == grid.len(),
        format!(
            "{in_domain} grid points in domain, smallest bound {min_bound:.3e}, {exceed} exceeded"
        ),
    )
}

fn criterion_7() -> Check {
    // (a) p = 10⁶ from scalars only.
    let cli = Cli::parse_from([
        "qicert",
        "certify",
        "--scalars",
        "mu=1e-3,op_norm_sq=100,n=10000,p=1000000",
        "--r",
        "0.5",
        "--alpha",
        "1",
        "--s",
        "3",
    ]);
    let Ok(Output::Report(report)) = run(&cli) else {
        return Err("certify on scalars did not produce a report".into());
    };
    let hyp = &report.results["hypotheses"];
    let certified =
        hyp["certified"].as_bool() == Some(true) && hyp["vacuous"].as_bool() == Some(false);
    let desk: Vec<String> = [64usize, 128, 216, 512]
        .iter()
        .map(|&p| format!("p={p}: {:.3}", failure_bound(p, 1.0)))
        .collect();

    // (b) nested tails, and zero tails for orthonormal columns.
    let mut monotone = true;
    for (n, p, s) in [(64, 128, 8), (256, 512, 16)] {
        let x = gen_matrix(&EnsembleSpec::gaussian_unit(n, p, GEN_SEED)).unwrap();
        let tails = failure_probability_experiment(
            &x,
            s,
            &linspace(0.05, 2.0, 16),
            1000,
            MC_SEED,
            DEFAULT_GAMMA,
        )
        .map_err(|e| e.to_string())?;
        monotone &= tails.windows(2).all(|w| w[1].hits <= w[0].hits);
    }
    let mut orthonormal_zero = true;
    for x in [
        DenseMatrix::identity(128),
        gen_matrix(&EnsembleSpec::spikes_sines(64))
            .unwrap()
            .select_columns(&(64..128).collect::<Vec<_>>())
            .unwrap(),
    ] {
        let tails = failure_probability_experiment(
            &x,
            16,
            &linspace(1e-9, 1.0, 8),
            1000,
            MC_SEED,
            DEFAULT_GAMMA,
        )
        .map_err(|e| e.to_string())?;
        orthonormal_zero &= tails.iter().all(|t| t.hits == 0);
    }

    // (c) ‖X_TᵗX_T − I‖ = ‖R_T H R_T‖.
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let n = 4 + (derive_seed(MC_SEED, "bridge-n", k) % 29) as usize;
        let p = n + 1 + (derive_seed(MC_SEED, "bridge-p", k) % 64) as usize;
        let s = 1 + (derive_seed(MC_SEED, "bridge-s", k) % p.min(24) as u64) as usize;
        let x = gen_matrix(&EnsembleSpec::gaussian_unit(
            n,
            p,
            derive_seed(MC_SEED, "bridge-x", k),
        ))
        .unwrap();
        let mask = sample_uniform_subset(p, s, derive_seed(MC_SEED, "bridge-t", k)).unwrap();
        let t = mask.indices();
        let direct = gram(&x.select_columns(&t).unwrap())
            .sub(&DenseMatrix::identity(s))
            .unwrap();
        let masked = mask_bilateral(&hollow_gram(&x).unwrap(), &mask, &mask).unwrap();
        let a = spectral_norm(&direct, BRIDGE_SOLVER_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = spectral_norm(&masked, BRIDGE_SOLVER_TOL, DEFAULT_MAX_ITER).unwrap();
        worst = worst.max((a - b).abs());
    }

    ensure(
        certified && monotone && orthonormal_zero && worst <= BRIDGE_TOL,
        format!(
            "p=1e6 certified={certified}; 216/p at alpha=1 {}; tails nonincreasing={monotone}; orthonormal zero={orthonormal_zero}; bridge err {worst:.1e}",
            desk.join(", ")
        ),
    )
}

fn criterion_8() -> Check {
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let n = 1 + (k as usize % 32);
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = 2.0 * unit(k, "acceptance-sym", (i * n + j) as u64) - 1.0;
                m.set(i, j, v).unwrap();
                m.set(j, i, v).unwrap();
            }
        }
        let ours = spectral_norm(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
        let reference = jacobi::symmetric_norm(m.as_slice(), n);
        worst = worst.max(rel(ours, reference));
    }
    ensure(
        worst <= JACOBI_REL_TOL,
        format!("100 matrices up to 32x32, worst relative error {worst:.2e}"),
    )
}

fn criterion_9() -> Check {
    let runs: &[&[&str]] = &[
        &[
            "certify",
            "--gen",
            "gaussian_unit:n=16,p=48",
            "--gen-seed",
            "3",
            "--r",
            "0.5",
            "--s",
            "2",
        ],
        &[
            "experiment",
            "failure",
            "--gen",
            "gaussian_unit:n=24,p=48",
            "--s",
            "6",
            "--trials",
            "2000",
            "--seed",
            "5",
        ],
        &[
            "experiment",
            "decoupling",
            "--gen",
            "spikes_sines:n=16",
            "--delta",
            "0.2",
            "--trials",
            "2000",
            "--seed",
            "5",
        ],
        &[
            "experiment",
            "poissonization",
            "--gen",
            "gaussian_unit:n=24,p=48",
            "--s",
            "6",
            "--trials",
            "2000",
            "--seed",
            "5",
        ],
        &[
            "experiment",
            "intermediate",
            "--gen",
            "gaussian_unit:n=24,p=48",
            "--delta",
            "0.1",
            "--trials",
            "2000",
            "--seed",
            "5",
        ],
        &["verify", "chaos", "--count", "20", "--seed", "5"],
        &[
            "verify", "chernoff", "--d", "32", "--trials", "2000", "--seed", "5",
        ],
    ];
    let render = |threads: Option<usize>, args: &[&str]| -> Result<String, String> {
        let mut argv = vec!["qicert".to_string()];
        if let Some(t) = threads {
            argv.push("--threads".into());
            argv.push(t.to_string());
        }
        argv.extend(args.iter().map(|s| s.to_string()));
        match run(&Cli::parse_from(argv)) {
            Ok(Output::Report(r)) => Ok(r.deterministic_json()),
            Ok(Output::Csv(_)) => Err("unexpected CSV".into()),
            Err(e) => Err(e.to_string()),
        }
    };
    let mut mismatched = Vec::new();
    for args in runs {
        let reference = render(None, args)?;
        for threads in [None, Some(1), Some(2), Some(5)] {
            if render(threads, args)? != reference {
                mismatched.push(format!("{} {} threads={threads:?}", args[0], args[1]));
            }
        }
    }
    ensure(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} commands x 4 reruns byte-identical", runs.len())
        } else {
            format!("differences: {}", mismatched.join("; "))
        },
    )
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        ("constants reproduction", criterion_1),
        ("chaos moment lemma", criterion_2),
        ("decoupling", criterion_3),
        ("poissonization", criterion_4),
        ("intermediate tails", criterion_5),
        ("matrix Chernoff", criterion_6),
        ("main theorem, property based", criterion_7),
        ("spectral norm vs Jacobi", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({secs:.2} s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.2} s) {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
