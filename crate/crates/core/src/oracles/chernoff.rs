use std::f64::consts::E;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{psd_norm, spectral_norm_default, DenseMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::montecarlo::{check_grid, sample_trials, score, tags, TailEstimate};
use crate::rng::{self, StreamRng};

const DOMAIN_SLACK: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

/// `d · (e μ_max / r)^{r/B}` for `r ≥ e μ_max`.
pub fn chernoff_bound(d: usize, b: f64, mu_max: f64, r: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "B must be positive, got {b}"
        )));
    }
    if !(mu_max >= 0.0) || !mu_max.is_finite() || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need finite mu_max >= 0 and r, got {mu_max}, {r}"
        )));
    }
    let floor = E * mu_max;
    if r < floor * (1.0 - DOMAIN_SLACK) || r < 0.0 {
        return Err(Error::Domain(format!(
            "r = {r} is below e*mu_max = {floor}"
        )));
    }
    let d = d as f64;
    if r <= floor {
        return Ok(d);
    }
    if mu_max == 0.0 {
        return Ok(0.0);
    }
    Ok(d * ((r / b) * (floor / r).ln()).exp())
}

/// One random summand `X_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum Summand {
    Zero,
    /// `weight · z zᵗ` with `weight ≥ 0`.
    RankOne {
        weight: f64,
        vector: Vec<f64>,
    },
    Dense(DenseMatrix),
}

/// Draws the `p` independent summands of one trial.
pub trait SummandSampler: Send + Sync {
    fn sample(&self, index: usize, rng: &mut StreamRng) -> Summand;
}

/// `δ_j e_j e_jᵗ` with `δ_j ~ Bernoulli(δ)`.
struct DiagonalSelector {
    delta: f64,
}

impl SummandSampler for DiagonalSelector {
    fn sample(&self, index: usize, rng: &mut StreamRng) -> Summand {
        if rng.random::<f64>() < self.delta {
            let mut v = vec![0.0; index + 1];
            v[index] = 1.0;
            Summand::RankOne {
                weight: 1.0,
                vector: v,
            }
        } else {
            Summand::Zero
        }
    }
}

/// `δ_j H_j H_jᵗ` for the columns `H_j` of a fixed matrix.
struct ColumnSelector {
    columns: Vec<Vec<f64>>,
    delta: f64,
}

impl SummandSampler for ColumnSelector {
    fn sample(&self, index: usize, rng: &mut StreamRng) -> Summand {
        if rng.random::<f64>() < self.delta {
            Summand::RankOne {
                weight: 1.0,
                vector: self.columns[index].clone(),
            }
        } else {
            Summand::Zero
        }
    }
}

struct ZeroSampler;

impl SummandSampler for ZeroSampler {
    fn sample(&self, _: usize, _: &mut StreamRng) -> Summand {
        Summand::Zero
    }
}

/// Sum `S_p = Σ_j X_j` of `summand_count` independent PSD `d×d` summands with
/// `‖X_j‖ ≤ B` and `‖E S_p‖ ≤ μ_max`.
pub struct ChernoffInstance {
    pub d: usize,
    pub summand_count: usize,
    pub b: f64,
    pub mu_max: f64,
    sampler: Box<dyn SummandSampler>,
}

impl std::fmt::Debug for ChernoffInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChernoffInstance")
            .field("d", &self.d)
            .field("summand_count", &self.summand_count)
            .field("b", &self.b)
            .field("mu_max", &self.mu_max)
            .finish_non_exhaustive()
    }
}

impl ChernoffInstance {
    pub fn new(
        d: usize,
        summand_count: usize,
        b: f64,
        mu_max: f64,
        sampler: Box<dyn SummandSampler>,
    ) -> Result<Self> {
        if d == 0 || !(b > 0.0) || !(mu_max >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need d >= 1, B > 0, mu_max >= 0; got d={d}, B={b}, mu_max={mu_max}"
            )));
        }
        Ok(Self {
            d,
            summand_count,
            b,
            mu_max,
            sampler,
        })
    }

    /// `X_j = δ_j e_j e_jᵗ`, `j = 1..d`: `B = 1`, `E S_p = δ I`, `μ_max = δ`.
    pub fn diagonal_selector(d: usize, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Self::new(d, d, 1.0, delta, Box::new(DiagonalSelector { delta }))
    }

    /// `X_j = δ_j H_j H_jᵗ`, so `S_p = H R H`: `B = ‖H‖₁→₂²`,
    /// `E S_p = δ H²`, `μ_max = δ ‖H‖²`.
    pub fn column_selector(h: &DenseMatrix, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let columns: Vec<Vec<f64>> = (0..h.cols()).map(|j| h.column(j)).collect();
        let b = h.max_col_l2().powi(2);
        let mu_max = delta * spectral_norm_default(h)?.powi(2);
        let b = if b > 0.0 { b } else { 1.0 };
        Self::new(
            h.rows(),
            h.cols(),
            b,
            mu_max,
            Box::new(ColumnSelector { columns, delta }),
        )
    }

    pub fn zero(d: usize, summand_count: usize) -> Result<Self> {
        Self::new(d, summand_count, 1.0, 0.0, Box::new(ZeroSampler))
    }

    /// Draws all summands of one trial, checks them against the instance
    /// contract and returns `‖S_p‖`.
    fn sample_norm(&self, rng: &mut StreamRng) -> Result<f64> {
        let d = self.d;
        let mut acc = vec![0.0; d * d];
        let mut any = false;
        let cap = self.b * (1.0 + DOMAIN_SLACK);
        for j in 0..self.summand_count {
            let bad = |message: String| Error::InvalidSummand { index: j, message };
            match self.sampler.sample(j, rng) {
                Summand::Zero => {}
                Summand::RankOne { weight, vector } => {
                    if !(weight >= 0.0) || !weight.is_finite() {
                        return Err(bad(format!("negative or non-finite weight {weight}")));
                    }
                    if vector.len() > d || vector.iter().any(|x| !x.is_finite()) {
                        return Err(bad(format!("vector of length {} for d={d}", vector.len())));
                    }
                    let norm = weight * vector.iter().map(|x| x * x).sum::<f64>();
                    if norm > cap {
                        return Err(bad(format!("norm {norm} exceeds B = {}", self.b)));
                    }
                    for (a, &za) in vector.iter().enumerate() {
                        if za == 0.0 {
                            continue;
                        }
                        for (b, &zb) in vector.iter().enumerate() {
                            acc[a * d + b] += weight * za * zb;
                        }
                    }
                    any = true;
                }
                Summand::Dense(m) => {
                    if m.rows() != d || m.cols() != d {
                        return Err(bad(format!("{}x{} summand for d={d}", m.rows(), m.cols())));
                    }
                    if !is_psd(&m, PSD_TOL) {
                        return Err(bad("not positive semi-definite".into()));
                    }
                    let norm = psd_norm(&m, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
                    if norm > cap {
                        return Err(bad(format!("norm {norm} exceeds B = {}", self.b)));
                    }
                    for (a, x) in acc.iter_mut().zip(m.as_slice()) {
                        *a += x;
                    }
                    any = true;
                }
            }
        }
        if !any {
            return Ok(0.0);
        }
        psd_norm(&DenseMatrix::new(d, d, acc)?, DEFAULT_TOL, DEFAULT_MAX_ITER)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    Ok(())
}

/// Symmetric within `1e-12` (relative to the largest entry) and a Cholesky
/// factorisation that tolerates pivots down to `−tol·scale`, with
/// near-zero pivots treated as exact zeros.
pub fn is_psd(m: &DenseMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return true;
    }
    if !m.is_symmetric(SYMMETRY_TOL * scale) {
        return false;
    }
    let n = m.rows();
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let d = m.get(j, j) - (0..j).map(|c| l[j * n + c].powi(2)).sum::<f64>();
        if d < -tol * scale {
            return false;
        }
        if d <= tol * scale {
            // Zero pivot: the rest of the column must vanish as well.
            for i in j + 1..n {
                let s = m.get(i, j) - (0..j).map(|c| l[i * n + c] * l[j * n + c]).sum::<f64>();
                if s.abs() > tol.sqrt() * scale {
                    return false;
                }
            }
            continue;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let s = m.get(i, j) - (0..j).map(|c| l[i * n + c] * l[j * n + c]).sum::<f64>();
            l[i * n + j] = s / ljj;
        }
    }
    true
}

/// One grid point of [`chernoff_empirical`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffPoint {
    pub estimate: TailEstimate,
    /// `None` when `r < e μ_max`.
    pub bound: Option<f64>,
    /// The empirical upper confidence bound exceeds the analytic bound.
    pub exceeds: bool,
}

/// Empirical `P(‖S_p‖ ≥ r)` over `trials` independent draws of all
/// summands, reusing each draw across the whole grid.
pub fn chernoff_empirical(
    inst: &ChernoffInstance,
    r_grid: &[f64],
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<Vec<ChernoffPoint>> {
    check_grid(r_grid, trials, gamma)?;
    let norms = sample_trials(trials, seed, tags::CHERNOFF, |ts| {
        inst.sample_norm(&mut rng::from_seed(ts))
    })?;
    let estimates = score(&norms, r_grid, seed, gamma)?;
    Ok(estimates
        .into_iter()
        .map(|estimate| {
            let bound = chernoff_bound(inst.d, inst.b, inst.mu_max, estimate.threshold).ok();
            let exceeds = bound.is_some_and(|b| estimate.upper > b);
            ChernoffPoint {
                estimate,
                bound,
                exceeds,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::DEFAULT_GAMMA;

    #[test]
    fn bound_at_domain_floor_is_d() {
        assert_eq!(chernoff_bound(7, 1.0, 0.3, E * 0.3).unwrap(), 7.0);
    }

    #[test]
    fn bound_below_domain_is_an_error() {
        assert!(matches!(
            chernoff_bound(4, 1.0, 1.0, 2.0),
            Err(Error::Domain(_))
        ));
        assert!(chernoff_bound(4, 0.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn bound_decreases_when_r_doubles() {
        let a = chernoff_bound(4, 1.0, 1.0, 3.0).unwrap();
        let b = chernoff_bound(4, 1.0, 1.0, 6.0).unwrap();
        assert!(b < a);
    }

    #[test]
    fn bound_matches_scalar_oracle() {
        // 4 (1/2)^{2e}, evaluated at 40 digits.
        let v = chernoff_bound(4, 1.0, 1.0, 2.0 * E).unwrap();
        assert!((v / 0.092_361_559_501_448_7 - 1.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn zero_sampler_has_zero_tails() {
        let inst = ChernoffInstance::zero(5, 5).unwrap();
        let pts = chernoff_empirical(&inst, &[0.0, 0.5], 100, 1, DEFAULT_GAMMA).unwrap();
        assert_eq!(pts[0].estimate.p_hat, 1.0); // ‖0‖ >= 0
        assert_eq!(pts[1].estimate.p_hat, 0.0);
    }

    #[test]
    fn zero_trials_is_an_error() {
        let inst = ChernoffInstance::zero(2, 2).unwrap();
        assert!(chernoff_empirical(&inst, &[1.0], 0, 1, DEFAULT_GAMMA).is_err());
    }

    struct Oversized;
    impl SummandSampler for Oversized {
        fn sample(&self, _: usize, _: &mut StreamRng) -> Summand {
            Summand::RankOne {
                weight: 2.0,
                vector: vec![1.0, 0.0],
            }
        }
    }

    struct Indefinite;
    impl SummandSampler for Indefinite {
        fn sample(&self, _: usize, _: &mut StreamRng) -> Summand {
            Summand::Dense(DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, -0.5]).unwrap())
        }
    }

    #[test]
    fn contract_violations_are_reported() {
        let inst = ChernoffInstance::new(2, 2, 1.0, 1.0, Box::new(Oversized)).unwrap();
        let err = chernoff_empirical(&inst, &[3.0], 3, 0, DEFAULT_GAMMA).unwrap_err();
        assert!(
            matches!(err, Error::InvalidSummand { index: 0, .. }),
            "{err}"
        );
        let inst = ChernoffInstance::new(2, 2, 1.0, 1.0, Box::new(Indefinite)).unwrap();
        let err = chernoff_empirical(&inst, &[3.0], 3, 0, DEFAULT_GAMMA).unwrap_err();
        assert!(matches!(err, Error::InvalidSummand { .. }), "{err}");
    }

    #[test]
    fn psd_check() {
        let rank_one = DenseMatrix::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(is_psd(&rank_one, PSD_TOL));
        let asym = DenseMatrix::new(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(!is_psd(&asym, PSD_TOL));
        let indef = DenseMatrix::new(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(!is_psd(&indef, PSD_TOL));
        assert!(is_psd(&DenseMatrix::zeros(3, 3), PSD_TOL));
    }
}
