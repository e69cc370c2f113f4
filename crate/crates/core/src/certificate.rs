//! Closed-form side of the certificate: coherence statistics, the two
//! hypotheses of the singular-value concentration bound, the parameter
//! tuning that makes the Chernoff envelope decay like `p^{-α}`, and the
//! constant tables.
//!
//! `log` is the natural logarithm everywhere.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{hollow_gram, spectral_norm_default, DenseMatrix};

/// Coherence and operator-norm statistics of one matrix with unit columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceStats {
    /// `μ(X) = max_{j≠j'} |X_jᵗX_j'|`, zero for a single column.
    pub mu: f64,
    /// `‖X‖`.
    pub op_norm: f64,
    /// `‖H‖₁→₂`; absent when the statistics were given as scalars.
    pub max_col_l2_h: Option<f64>,
    pub n: usize,
    pub p: usize,
}

impl CoherenceStats {
    /// Statistics supplied directly, without materialising the matrix.
    pub fn from_scalars(mu: f64, op_norm: f64, n: usize, p: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidParameter(format!(
                "mu must lie in [0, 1], got {mu}"
            )));
        }
        if !(op_norm >= 0.0) || !op_norm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "operator norm must be finite and nonnegative, got {op_norm}"
            )));
        }
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter(
                "dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            mu,
            op_norm,
            max_col_l2_h: None,
            n,
            p,
        })
    }

    pub fn op_norm_sq(&self) -> f64 {
        self.op_norm * self.op_norm
    }
}

pub fn coherence(x: &DenseMatrix) -> Result<CoherenceStats> {
    let h = hollow_gram(x)?;
    Ok(CoherenceStats {
        mu: h.max_abs(),
        op_norm: spectral_norm_default(x)?,
        max_col_l2_h: Some(h.max_col_l2()),
        n: x.rows(),
        p: x.cols(),
    })
}

/// `(r, α, s, p)`: target distortion, decay rate, subset size, column count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub r: f64,
    pub alpha: f64,
    pub s: usize,
    pub p: usize,
}

impl TheoremParams {
    pub fn new(r: f64, alpha: f64, s: usize, p: usize) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "r must lie in (0, 1), got {r}"
            )));
        }
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be >= 1, got {alpha}"
            )));
        }
        if s == 0 || s > p {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= s <= p, got s={s}, p={p}"
            )));
        }
        Ok(Self { r, alpha, s, p })
    }

    fn log_p(&self) -> f64 {
        (self.p as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `r / (2(1+α) log p)`.
    pub mu_bound: f64,
    /// `r² p / (4(1+α) e² ‖X‖² log p)`.
    pub s_bound: f64,
    pub mu_ok: bool,
    pub s_ok: bool,
    /// `216 / p^α`, reported even when it exceeds one.
    pub failure_bound: f64,
    pub vacuous: bool,
    pub certified: bool,
}

fn check_dims(stats: &CoherenceStats, params: &TheoremParams) -> Result<()> {
    if stats.p != params.p {
        return Err(Error::Dimension(format!(
            "statistics are for p={}, parameters for p={}",
            stats.p, params.p
        )));
    }
    if params.p < 3 {
        return Err(Error::InvalidParameter(format!(
            "the bounds assume log p > 1, i.e. p >= 3; got p={}",
            params.p
        )));
    }
    Ok(())
}

/// `216 · p^{-α}`, falling back to log space when `p^α` leaves the `f64` range.
pub fn failure_bound(p: usize, alpha: f64) -> f64 {
    let denom = (p as f64).powf(alpha);
    if denom.is_finite() && denom > 0.0 {
        THEOREM_CONSTANT / denom
    } else {
        (THEOREM_CONSTANT.ln() - alpha * (p as f64).ln()).exp()
    }
}

pub fn check_hypotheses(
    stats: &CoherenceStats,
    params: &TheoremParams,
) -> Result<HypothesisReport> {
    check_dims(stats, params)?;
    let log_p = params.log_p();
    let TheoremParams { r, alpha, s, p } = *params;
    let mu_bound = r / (2.0 * (1.0 + alpha) * log_p);
    let s_bound = r * r * p as f64 / (4.0 * (1.0 + alpha) * E * E * stats.op_norm_sq() * log_p);
    let mu_ok = stats.mu <= mu_bound;
    let s_ok = s as f64 <= s_bound;
    let failure_bound = failure_bound(p, alpha);
    Ok(HypothesisReport {
        mu_bound,
        s_bound,
        mu_ok,
        s_ok,
        failure_bound,
        vacuous: failure_bound >= 1.0,
        certified: mu_ok && s_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintStatus {
    Satisfied,
    Violated,
    /// The row involves `v²/μ²` or `C_μ²` with `μ = 0` (orthogonal columns).
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub name: String,
    pub relation: String,
    pub status: ConstraintStatus,
    pub lhs: Option<f64>,
    pub rhs: f64,
}

impl ConstraintRow {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::build(name, "<=", lhs <= rhs, lhs, rhs)
    }

    fn ge(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::build(name, ">=", lhs >= rhs, lhs, rhs)
    }

    fn build(name: &str, relation: &str, ok: bool, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            relation: relation.into(),
            status: if ok {
                ConstraintStatus::Satisfied
            } else {
                ConstraintStatus::Violated
            },
            lhs: Some(lhs),
            rhs,
        }
    }

    fn degenerate(name: &str, relation: &str, rhs: f64) -> Self {
        Self {
            name: name.into(),
            relation: relation.into(),
            status: ConstraintStatus::Degenerate,
            lhs: None,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    /// `r' = r/2`, the threshold after decoupling.
    pub r_prime: f64,
    /// `α' = α + 1`, absorbing the union bound over `p` columns.
    pub alpha_prime: f64,
    pub log_p: f64,
    /// `u² = α' log p ‖X‖²`.
    pub u_sq: f64,
    /// `v² = α' log p μ²`.
    pub v_sq: f64,
    /// `C_s = (s/p) ‖X‖² log p` at the given integer `s`.
    pub c_s: f64,
    /// `C_μ = μ log p`.
    pub c_mu: f64,
    pub c_mu_cap: f64,
    pub c_s_cap: f64,
    pub degenerate: bool,
    pub constraints: Vec<ConstraintRow>,
}

impl TuningParams {
    pub fn all_satisfied(&self) -> bool {
        self.constraints
            .iter()
            .all(|c| c.status == ConstraintStatus::Satisfied)
    }
}

/// Caps `(C_μ, C_s)` under which every tuning constraint holds:
/// `C_μ ≤ r'/(1+α)` and `C_s ≤ min(r'²/((1+α)e²), (1+α)C_μ²/e²)`, the second
/// evaluated at the given `c_mu`.
pub fn tuning_caps(alpha: f64, r: f64, c_mu: f64) -> (f64, f64) {
    let rp = r / 2.0;
    let c_mu_cap = rp / (1.0 + alpha);
    let c_s_cap = (rp * rp / ((1.0 + alpha) * E * E)).min((1.0 + alpha) * c_mu * c_mu / (E * E));
    (c_mu_cap, c_s_cap)
}

pub fn tune_parameters(stats: &CoherenceStats, params: &TheoremParams) -> Result<TuningParams> {
    check_dims(stats, params)?;
    let log_p = params.log_p();
    let r_prime = params.r / 2.0;
    let alpha_prime = params.alpha + 1.0;
    let k = stats.op_norm_sq();
    let mu = stats.mu;
    let ratio = params.s as f64 / params.p as f64;

    let u_sq = alpha_prime * log_p * k;
    let v_sq = alpha_prime * log_p * mu * mu;
    let c_s = ratio * k * log_p;
    let c_mu = mu * log_p;
    let (c_mu_cap, c_s_cap) = tuning_caps(params.alpha, params.r, c_mu);
    let degenerate = v_sq == 0.0;
    let inv_e = E.recip();

    let mut constraints = vec![ConstraintRow::le(
        "u_prime",
        E * ratio * k * k / u_sq,
        inv_e,
    )];
    constraints.push(if degenerate {
        ConstraintRow::degenerate("v_prime", "<=", inv_e)
    } else {
        ConstraintRow::le("v_prime", E * ratio * k / v_sq, inv_e)
    });
    constraints.push(ConstraintRow::le(
        "ut",
        E * ratio * u_sq / (r_prime * r_prime),
        inv_e,
    ));
    constraints.push(if degenerate {
        ConstraintRow::degenerate("tv", ">=", alpha_prime * log_p)
    } else {
        ConstraintRow::ge("tv", r_prime * r_prime / v_sq, alpha_prime * log_p)
    });
    constraints.push(ConstraintRow::le("c_mu_cap", c_mu, c_mu_cap));
    constraints.push(if degenerate {
        ConstraintRow::degenerate("c_s_cap", "<=", c_s_cap)
    } else {
        ConstraintRow::le("c_s_cap", c_s, c_s_cap)
    });

    Ok(TuningParams {
        r_prime,
        alpha_prime,
        log_p,
        u_sq,
        v_sq,
        c_s,
        c_mu,
        c_mu_cap,
        c_s_cap,
        degenerate,
        constraints,
    })
}

/// The three terms of the Chernoff envelope, in log space, and the envelope
/// value `3p·V(s,[r,u,v])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffEnvelope {
    /// `log` of `(e(s/p)u²/r²)^{r²/v²}`, `(e(s/p)‖X‖⁴/u²)^{u²/‖X‖²}` and
    /// `(e(s/p)‖X‖²/v²)^{v²/μ²}`.
    pub ln_terms: [f64; 3],
    /// `3p·V`.
    pub value: f64,
}

impl ChernoffEnvelope {
    /// `p·V`: the sum of the three per-event bounds before the factor 3 of
    /// the envelope.
    pub fn lemma_sum(&self) -> f64 {
        self.value / 3.0
    }
}

const DOMAIN_SLACK: f64 = 1e-12;

fn ge_slack(a: f64, b: f64) -> bool {
    a >= b - DOMAIN_SLACK * a.abs().max(b.abs())
}

/// `3p·V(s,[r,u,v])` on the domain `(p/s)(r²/e) ≥ u² ≥ (s/p)‖X‖⁴` and
/// `v² ≥ (s/p)‖X‖²`. `s` and `p` are real so that `s/p` can be treated as
/// continuous.
pub fn chernoff_envelope(
    s: f64,
    p: f64,
    r: f64,
    u_sq: f64,
    v_sq: f64,
    op_norm_sq: f64,
    mu: f64,
) -> Result<ChernoffEnvelope> {
    for (name, v) in [
        ("s", s),
        ("p", p),
        ("r", r),
        ("u^2", u_sq),
        ("v^2", v_sq),
        ("||X||^2", op_norm_sq),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu must be nonnegative, got {mu}"
        )));
    }
    let ratio = s / p;
    let k = op_norm_sq;
    if !ge_slack((p / s) * r * r / E, u_sq) {
        return Err(Error::Domain(format!(
            "(p/s)(r^2/e) >= u^2 fails: {} < {u_sq}",
            (p / s) * r * r / E
        )));
    }
    if !ge_slack(u_sq, ratio * k * k) {
        return Err(Error::Domain(format!(
            "u^2 >= (s/p)||X||^4 fails: {u_sq} < {}",
            ratio * k * k
        )));
    }
    if !ge_slack(v_sq, ratio * k) {
        return Err(Error::Domain(format!(
            "v^2 >= (s/p)||X||^2 fails: {v_sq} < {}",
            ratio * k
        )));
    }

    let ln_ratio = ratio.ln();
    let t1 = (r * r / v_sq) * (1.0 + ln_ratio + u_sq.ln() - 2.0 * r.ln());
    let t2 = (u_sq / k) * (1.0 + ln_ratio + 2.0 * k.ln() - u_sq.ln());
    let ln_base3 = 1.0 + ln_ratio + k.ln() - v_sq.ln();
    let t3 = if mu == 0.0 {
        // Limit of an infinite exponent.
        if ln_base3 < 0.0 {
            f64::NEG_INFINITY
        } else if ln_base3 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (v_sq / (mu * mu)) * ln_base3
    };
    let ln_terms = [t1, t2, t3];
    let value = 3.0 * p * log_sum_exp(&ln_terms).exp();
    Ok(ChernoffEnvelope { ln_terms, value })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Operating point for the competing coherence constraint
/// `30 C_μ + 13 √(2 C_s) ≤ 1/4`: `C_s` just below the cap.
pub const CP_C_S_OPERATING: f64 = 1.18e-4;
/// Cap on `C_s` usually quoted for the competing constraint.
pub const CP_C_S_REPORTED_CAP: f64 = 1.19e-4;

/// Largest `C_s` the constraint `30 C_μ + 13 √(2 C_s) ≤ 1/4` admits on its
/// own (with `C_μ = 0`).
pub fn cp_c_s_max() -> f64 {
    let root = 0.25 / 13.0;
    root * root / 2.0
}

/// `C_μ` left over by the constraint at a given `C_s`, or `None` when `C_s`
/// exceeds [`cp_c_s_max`].
pub fn cp_c_mu_for(c_s: f64) -> Option<f64> {
    let c_mu = (0.25 - 13.0 * (2.0 * c_s).sqrt()) / 30.0;
    (c_s >= 0.0 && c_mu >= 0.0).then_some(c_mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsComparison {
    pub c_s_ours: f64,
    pub c_mu_ours: f64,
    pub c_s_cp: f64,
    pub c_mu_cp: f64,
}

impl ConstantsComparison {
    pub fn c_s_ratio(&self) -> f64 {
        self.c_s_ours / self.c_s_cp
    }

    pub fn c_mu_ratio(&self) -> f64 {
        self.c_mu_ours / self.c_mu_cp
    }
}

/// Our `(C_s, C_μ)` caps at `(α, r)` next to the competing constants at their
/// fixed operating point.
pub fn constants_comparison(alpha: f64, r: f64) -> Result<ConstantsComparison> {
    if !(alpha > 0.0) || !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need alpha > 0 and r in (0, 1), got alpha={alpha}, r={r}"
        )));
    }
    let (c_mu_ours, _) = tuning_caps(alpha, r, 0.0);
    let (_, c_s_ours) = tuning_caps(alpha, r, c_mu_ours);
    let c_s_cp = CP_C_S_OPERATING;
    let c_mu_cp = cp_c_mu_for(c_s_cp).expect("operating point lies under the constraint");
    Ok(ConstantsComparison {
        c_s_ours,
        c_mu_ours,
        c_s_cp,
        c_mu_cp,
    })
}

/// `P(‖RHR‖ ≥ r) ≤ factor · P(‖RHR′‖ ≥ r / threshold_divisor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingRule {
    pub factor: f64,
    pub threshold_divisor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingConstants {
    pub new: DecouplingRule,
    pub legacy: DecouplingRule,
    /// Lower bound `P(ξ ≥ 0) ≥ (Eξ²)²/(4 Eξ⁴)` contributes the 4.
    pub paley_zygmund_factor: f64,
    /// `Eξ⁴ ≤ 9 (Eξ²)²` for order-2 Rademacher chaos.
    pub chaos_moment_ratio: f64,
    pub poissonization_factor: f64,
    pub union_bound_terms: f64,
    /// `poissonization × decoupling × union bound`.
    pub theorem_constant: f64,
}

pub const THEOREM_CONSTANT: f64 = 216.0;

pub fn decoupling_constants() -> DecouplingConstants {
    let paley_zygmund_factor = 4.0;
    let chaos_moment_ratio = 9.0;
    let new = DecouplingRule {
        factor: paley_zygmund_factor * chaos_moment_ratio,
        threshold_divisor: 2.0,
    };
    let poissonization_factor = 2.0;
    let union_bound_terms = 3.0;
    DecouplingConstants {
        new,
        legacy: DecouplingRule {
            factor: 1000.0,
            threshold_divisor: 18.0,
        },
        paley_zygmund_factor,
        chaos_moment_ratio,
        poissonization_factor,
        union_bound_terms,
        theorem_constant: poissonization_factor * new.factor * union_bound_terms,
    }
}
