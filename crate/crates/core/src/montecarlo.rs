//! Seeded tail-probability estimation.
//!
//! Each experiment draws one random object per trial from a stream seeded by
//! `derive_seed(master_seed, tag, trial_index)`, computes one norm, and scores
//! that value against every threshold of the grid. Estimates for different
//! thresholds of one experiment are therefore nested events from the same
//! samples: `p_hat` is nonincreasing along an ascending grid, and the
//! estimates are dependent across thresholds.
//!
//! Verdicts are one-sided. A check can falsify an inequality, up to the slack
//! rule, but it never confirms one beyond the stated confidence.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::certificate::decoupling_constants;
use crate::ensembles::{sample_bernoulli, sample_uniform_subset};
use crate::error::{Error, Result};
use crate::matrix::{extract_principal, hollow_gram, spectral_norm_default, DenseMatrix};
use crate::par::map_indices;
use crate::rng::derive_seed;

pub const DEFAULT_GAMMA: f64 = 0.01;
/// Width of the falsification band, in combined binomial standard errors.
pub const SLACK_SIGMAS: f64 = 3.0;

/// Stream tags. Trial `i` of an experiment is seeded with
/// `derive_seed(seed, tag, i)`.
pub mod tags {
    pub const TAIL: &str = "tail";
    pub const FAILURE: &str = "failure";
    pub const DECOUPLING_LHS: &str = "decoupling-lhs";
    pub const DECOUPLING_RHS: &str = "decoupling-rhs";
    pub const POISSON_LHS: &str = "poissonization-lhs";
    pub const POISSON_RHS: &str = "poissonization-rhs";
    pub const INTERMEDIATE: &str = "intermediate";
    pub const CHERNOFF: &str = "chernoff";
    /// Sub-stream tags for the two independent masks of one decoupled trial.
    pub const LEFT: &str = "left";
    pub const RIGHT: &str = "right";
}

/// Empirical `P(value ≥ threshold)` with an exact one-sided upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    /// Clopper–Pearson upper bound at level `1 − gamma`.
    pub upper: f64,
    pub seed: u64,
    pub gamma: f64,
}

impl TailEstimate {
    pub fn new(threshold: f64, hits: u64, trials: u64, seed: u64, gamma: f64) -> Self {
        Self {
            threshold,
            hits,
            trials,
            p_hat: hits as f64 / trials as f64,
            upper: clopper_pearson_upper(hits, trials, gamma),
            seed,
            gamma,
        }
    }

    pub fn std_error(&self) -> f64 {
        binomial_se(self.p_hat, self.trials)
    }
}

pub fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}

/// Smallest `q` with `P(Binomial(trials, q) ≤ hits) ≤ gamma`.
pub fn clopper_pearson_upper(hits: u64, trials: u64, gamma: f64) -> f64 {
    assert!(
        trials > 0 && hits <= trials,
        "need 0 <= hits <= trials, trials > 0"
    );
    if hits == trials {
        return 1.0;
    }
    let n = trials as f64;
    if hits == 0 {
        return 1.0 - gamma.powf(1.0 / n);
    }
    // P(Bin(n, q) <= k) = 1 − I_q(k+1, n−k), increasing in q for I_q.
    let a = hits as f64 + 1.0;
    let b = n - hits as f64;
    let target = 1.0 - gamma;
    let (mut lo, mut hi) = (hits as f64 / n, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub(crate) fn check_grid(thresholds: &[f64], trials: u64, gamma: f64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("thresholds must be finite".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "thresholds must be sorted ascending".into(),
        ));
    }
    Ok(())
}

/// Runs `f(derive_seed(seed, tag, i))` for every trial `i`, in parallel when
/// available. The output is in trial order; on failure the error of the
/// lowest failing trial is returned.
pub fn sample_trials<T, F>(trials: u64, seed: u64, tag: &str, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let count =
        usize::try_from(trials).map_err(|_| Error::InvalidParameter("too many trials".into()))?;
    map_indices(count, |i| f(derive_seed(seed, tag, i as u64)))
        .into_iter()
        .collect()
}

/// Scores one sample per trial against every threshold.
pub fn score(
    values: &[f64],
    thresholds: &[f64],
    seed: u64,
    gamma: f64,
) -> Result<Vec<TailEstimate>> {
    let trials = values.len() as u64;
    check_grid(thresholds, trials, gamma)?;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let hits = values.iter().filter(|&&v| v >= t).count() as u64;
            TailEstimate::new(t, hits, trials, seed, gamma)
        })
        .collect())
}

/// Shared engine: one scalar per trial from `sampler`, scored against every
/// threshold.
pub fn estimate_tail<F>(
    sampler: F,
    thresholds: &[f64],
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<Vec<TailEstimate>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    check_grid(thresholds, trials, gamma)?;
    let values = sample_trials(trials, seed, tags::TAIL, sampler)?;
    score(&values, thresholds, seed, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// The inequality holds trivially (right-hand side at least one).
    Vacuous,
    OutOfDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub status: VerdictStatus,
    pub lhs: f64,
    pub rhs: f64,
}

impl Verdict {
    pub fn is_fail(&self) -> bool {
        self.status == VerdictStatus::Fail
    }
}

/// `P(lhs) ≤ factor·P(rhs)`, checked as
/// `lhs.p_hat ≤ factor·rhs.upper + 3·√(se_lhs² + factor²·se_rhs²)`.
pub fn inequality_verdict(
    check: impl Into<String>,
    lhs: &TailEstimate,
    factor: f64,
    rhs: &TailEstimate,
) -> Verdict {
    let slack =
        SLACK_SIGMAS * (lhs.std_error().powi(2) + (factor * rhs.std_error()).powi(2)).sqrt();
    let bound = factor * rhs.upper + slack;
    let status = if lhs.p_hat > bound {
        VerdictStatus::Fail
    } else if factor * rhs.upper >= 1.0 {
        VerdictStatus::Vacuous
    } else {
        VerdictStatus::Pass
    };
    Verdict {
        check: check.into(),
        status,
        lhs: lhs.p_hat,
        rhs: bound,
    }
}

/// Empirical tail against an analytic bound `b < 1`: fails when
/// `upper > b + 3·√(b(1−b)/n) + (1 − γ^{1/n})`. The last term is the upper
/// bound reported at zero hits, i.e. the resolution of `n` trials.
pub fn bound_verdict(check: impl Into<String>, est: &TailEstimate, bound: Option<f64>) -> Verdict {
    let check = check.into();
    let Some(b) = bound else {
        return Verdict {
            check,
            status: VerdictStatus::OutOfDomain,
            lhs: est.upper,
            rhs: f64::NAN,
        };
    };
    if b >= 1.0 {
        return Verdict {
            check,
            status: VerdictStatus::Vacuous,
            lhs: est.upper,
            rhs: b,
        };
    }
    let resolution = clopper_pearson_upper(0, est.trials, est.gamma);
    let rhs = b + SLACK_SIGMAS * binomial_se(b, est.trials) + resolution;
    Verdict {
        check,
        status: if est.upper <= rhs {
            VerdictStatus::Pass
        } else {
            VerdictStatus::Fail
        },
        lhs: est.upper,
        rhs,
    }
}

/// `k` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![a],
        _ => (0..k)
            .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
            .collect(),
    }
}

/// `k` points strictly inside `(0, top)`: `top·i/(k+1)` for `i = 1..=k`.
pub fn interior_grid(top: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|i| top * i as f64 / (k + 1) as f64).collect()
}

/// `‖H[T,T]‖`, zero for an empty index set.
pub fn principal_norm(h: &DenseMatrix, t: &[usize]) -> Result<f64> {
    if t.is_empty() {
        return Ok(0.0);
    }
    spectral_norm_default(&extract_principal(h, t)?)
}

/// `‖H[S,S′]‖`, zero when either side is empty.
pub fn block_norm(h: &DenseMatrix, rows: &[usize], cols: &[usize]) -> Result<f64> {
    if rows.is_empty() || cols.is_empty() {
        return Ok(0.0);
    }
    spectral_norm_default(&h.submatrix(rows, cols)?)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    Ok(())
}

/// Tails of `‖X_TᵗX_T − I_s‖` for uniformly random `T` with `|T| = s`.
pub fn failure_probability_experiment(
    x: &DenseMatrix,
    s: usize,
    r_grid: &[f64],
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<Vec<TailEstimate>> {
    let p = x.cols();
    if s == 0 || s > p {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= s <= p, got s={s}, p={p}"
        )));
    }
    check_grid(r_grid, trials, gamma)?;
    let h = hollow_gram(x)?;
    let values = sample_trials(trials, seed, tags::FAILURE, |ts| {
        let t = sample_uniform_subset(p, s, ts)?.indices();
        principal_norm(&h, &t)
    })?;
    score(&values, r_grid, seed, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingExperiment {
    pub delta: f64,
    pub factor: f64,
    /// Tails of `‖RHR‖` at each `r`.
    pub lhs: Vec<TailEstimate>,
    /// Tails of `‖RHR′‖` at each `r / 2`.
    pub rhs: Vec<TailEstimate>,
    pub verdicts: Vec<Verdict>,
}

pub fn decoupling_experiment(
    x: &DenseMatrix,
    delta: f64,
    r_grid: &[f64],
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<DecouplingExperiment> {
    check_delta(delta)?;
    check_grid(r_grid, trials, gamma)?;
    let rule = decoupling_constants().new;
    let h = hollow_gram(x)?;
    let p = x.cols();

    let lhs_values = sample_trials(trials, seed, tags::DECOUPLING_LHS, |ts| {
        let s = sample_bernoulli(p, delta, ts)?.indices();
        principal_norm(&h, &s)
    })?;
    let rhs_values = sample_trials(trials, seed, tags::DECOUPLING_RHS, |ts| {
        let left = sample_bernoulli(p, delta, derive_seed(ts, tags::LEFT, 0))?.indices();
        let right = sample_bernoulli(p, delta, derive_seed(ts, tags::RIGHT, 0))?.indices();
        block_norm(&h, &left, &right)
    })?;

    let rhs_grid: Vec<f64> = r_grid.iter().map(|r| r / rule.threshold_divisor).collect();
    let lhs = score(&lhs_values, r_grid, seed, gamma)?;
    let rhs = score(&rhs_values, &rhs_grid, seed, gamma)?;
    let verdicts = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| {
            inequality_verdict(format!("decoupling r={}", l.threshold), l, rule.factor, r)
        })
        .collect();
    Ok(DecouplingExperiment {
        delta,
        factor: rule.factor,
        lhs,
        rhs,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonizationExperiment {
    pub s: usize,
    pub delta: f64,
    pub factor: f64,
    /// Tails of `‖R_s H R_s‖`.
    pub lhs: Vec<TailEstimate>,
    /// Tails of `‖RHR‖` with `δ = s/p`.
    pub rhs: Vec<TailEstimate>,
    pub verdicts: Vec<Verdict>,
}

pub fn poissonization_experiment(
    x: &DenseMatrix,
    s: usize,
    r_grid: &[f64],
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<PoissonizationExperiment> {
    let p = x.cols();
    if s > p {
        return Err(Error::InvalidParameter(format!(
            "need s <= p, got s={s}, p={p}"
        )));
    }
    check_grid(r_grid, trials, gamma)?;
    let factor = decoupling_constants().poissonization_factor;
    let delta = s as f64 / p as f64;
    let h = hollow_gram(x)?;

    let lhs_values = sample_trials(trials, seed, tags::POISSON_LHS, |ts| {
        principal_norm(&h, &sample_uniform_subset(p, s, ts)?.indices())
    })?;
    let rhs_values = sample_trials(trials, seed, tags::POISSON_RHS, |ts| {
        principal_norm(&h, &sample_bernoulli(p, delta, ts)?.indices())
    })?;
    let lhs = score(&lhs_values, r_grid, seed, gamma)?;
    let rhs = score(&rhs_values, r_grid, seed, gamma)?;
    let verdicts = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| inequality_verdict(format!("poissonization r={}", l.threshold), l, factor, r))
        .collect();
    Ok(PoissonizationExperiment {
        s,
        delta,
        factor,
        lhs,
        rhs,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateTails {
    pub delta: f64,
    pub u: f64,
    pub v: f64,
    pub op_norm_sq: f64,
    pub mu: f64,
    /// Tail of `‖RH‖` at `u`.
    pub tail_rh_norm: TailEstimate,
    /// Tail of `‖RH‖₁→₂` at `v`.
    pub tail_rh_col: TailEstimate,
    /// `p(eδ‖X‖⁴/u²)^{u²/‖X‖²}`, `None` when the base is not below one.
    pub bound_u: Option<f64>,
    /// `p(eδ‖X‖²/v²)^{v²/μ²}`, `None` when the base is not below one.
    pub bound_v: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

/// `p·base^exponent` when `0 < base < 1`, evaluated in log space.
fn lemma_bound(p: f64, base: f64, exponent: f64) -> Option<f64> {
    if !(base > 0.0 && base < 1.0) {
        return None;
    }
    Some((p.ln() + exponent * base.ln()).exp())
}

/// The two per-event bounds used before conditioning: on `‖HR‖` and on the
/// largest column norm of `RH`, with `s/p` replaced by `delta`.
pub fn intermediate_bounds(
    p: usize,
    delta: f64,
    u: f64,
    v: f64,
    op_norm_sq: f64,
    mu: f64,
) -> (Option<f64>, Option<f64>) {
    let p = p as f64;
    let k = op_norm_sq;
    let (u_sq, v_sq) = (u * u, v * v);
    let bound_u = lemma_bound(p, std::f64::consts::E * delta * k * k / u_sq, u_sq / k);
    let base_v = std::f64::consts::E * delta * k / v_sq;
    let bound_v = if mu == 0.0 {
        (base_v < 1.0).then_some(0.0)
    } else {
        lemma_bound(p, base_v, v_sq / (mu * mu))
    };
    (bound_u, bound_v)
}

pub fn intermediate_tails(
    x: &DenseMatrix,
    delta: f64,
    u: f64,
    v: f64,
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<IntermediateTails> {
    check_delta(delta)?;
    check_grid(&[], trials, gamma)?;
    if !(u > 0.0 && v > 0.0) || !u.is_finite() || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "u and v must be positive, got {u}, {v}"
        )));
    }
    let h = hollow_gram(x)?;
    let p = x.cols();
    let op_norm_sq = spectral_norm_default(x)?.powi(2);
    let mu = h.max_abs();
    let all: Vec<usize> = (0..p).collect();

    let pairs = sample_trials(trials, seed, tags::INTERMEDIATE, |ts| {
        let rows = sample_bernoulli(p, delta, ts)?.indices();
        if rows.is_empty() {
            return Ok((0.0, 0.0));
        }
        let rh = h.submatrix(&rows, &all)?;
        Ok((spectral_norm_default(&rh)?, rh.max_col_l2()))
    })?;
    let (norms, cols): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let tail_rh_norm = score(&norms, &[u], seed, gamma)?[0];
    let tail_rh_col = score(&cols, &[v], seed, gamma)?[0];
    let (bound_u, bound_v) = intermediate_bounds(p, delta, u, v, op_norm_sq, mu);
    let verdicts = vec![
        bound_verdict(format!("rh_norm u={u}"), &tail_rh_norm, bound_u),
        bound_verdict(format!("rh_col v={v}"), &tail_rh_col, bound_v),
    ];
    Ok(IntermediateTails {
        delta,
        u,
        v,
        op_norm_sq,
        mu,
        tail_rh_norm,
        tail_rh_col,
        bound_u,
        bound_v,
        verdicts,
    })
}
