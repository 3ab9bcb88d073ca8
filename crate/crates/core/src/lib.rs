//! Zero-delay quantization of finite-alphabet Markov sources.
//!
//! The encoder and decoder share a belief `π_t = P(X_t | q_{[0,t-1]})`; each
//! step the encoder picks a quantizer from that belief, sends `q_t = Q_t(X_t)`
//! and both ends run the same filter update. Optimal designs come from
//! dynamic programming over beliefs.

pub mod belief;
pub mod codec;
pub mod coupling;
pub mod error;
pub mod oracle;
pub mod policy;
pub mod quantizer;
pub mod solver;
pub mod source;

pub use belief::{filter_update, noisy_filter_update, wasserstein1, BeliefGrid, Channel};
pub use codec::{run_session, Decoder, Encoder, Trace, TraceRow};
pub use coupling::{coupling_report, CouplingReport};
pub use error::{Error, Result};
pub use oracle::{evaluate_oracle_policy, exhaustive_min, OraclePolicy};
pub use policy::{CodingPolicy, PeriodicPolicy, QuantizerSchedule, StationaryPolicy};
pub use quantizer::{enumerate_quantizers, stage_cost, DedupMode, DistortionSpec, Quantizer};
pub use solver::{
    discounted_value_iteration, finite_horizon_dp, solve_average_cost, AverageCostMethod,
    AverageCostOptions, CanonicalTriplet, GridMdp, Problem,
};
pub use source::{Belief, MarkovModel};

/// Formats `v` with 12 significant digits, without trailing zeros.
/// Magnitudes below `1e-5` or from `1e16` up use exponent notation.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("valid float");
    // avoid "-0"
    if rounded == 0.0 {
        return "0".into();
    }
    let a = rounded.abs();
    if !(1e-5..1e16).contains(&a) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(4.0), "4");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(123456.7890123456), "123456.789012");
        assert_eq!(fmt_sig(4.879611159581234e-10), "4.87961115958e-10");
        assert_eq!(fmt_sig(-2.5e20), "-2.5e20");
        assert_eq!(fmt_sig(0.00012), "0.00012");
    }
}
