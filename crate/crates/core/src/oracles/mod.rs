//! Exact, non-statistical checks: order-2 Rademacher chaos moments by full
//! enumeration and by closed form, and the matrix Chernoff tail bound with
//! its Monte Carlo counterpart.

mod chaos;
mod chernoff;

pub use chaos::{
    chaos_moments_exact, chaos_moments_formula, ChaosInstance, ChaosMoments, CHAOS_RATIO_BOUND,
    GENERIC_RATIO_BOUND, MAX_ENUMERATION_P,
};
pub use chernoff::{
    chernoff_bound, chernoff_empirical, is_psd, ChernoffInstance, ChernoffPoint, Summand,
    SummandSampler,
};
