//! Independent checks on the engine.
//!
//! Nothing in here calls into the engine's scheduling code:
//!
//! - [`clairvoyant_best`] searches every completion order of a tiny trace
//!   and returns the best achievable system utility, an upper bound for any
//!   online policy;
//! - [`literal`] replays the threshold scheduler the way its pseudocode is
//!   written, with a clock that jumps back on preemption;
//! - [`fixture`] holds hand-derived completion logs and compares logs tick
//!   by tick;
//! - [`mm1_mean_sojourn`] and [`batch_means`] validate the FCFS path against
//!   queueing theory.

pub mod clairvoyant;
pub mod fixture;
pub mod literal;
mod stats;

pub use clairvoyant::{clairvoyant_best, OracleResult, ScheduledSegment, DEFAULT_MAX_PACKETS};
pub use fixture::{check_against_fixture, Fixture, FixtureReport};
pub use stats::{batch_means, BatchMeans};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("TRACE_TOO_LARGE: {packets} packets exceed the search limit of {max}")]
    TraceTooLarge { packets: usize, max: usize },
    #[error("UNSTABLE_SYSTEM: arrival rate {arrival_rate}/ms is not below service rate {service_rate}/ms")]
    UnstableSystem { arrival_rate: f64, service_rate: f64 },
}

/// Mean time in system of an M/M/1 queue, `1 / (μ − λ)` in ms.
pub fn mm1_mean_sojourn(arrival_rate: f64, service_rate: f64) -> Result<f64, OracleError> {
    if !(arrival_rate < service_rate) || arrival_rate < 0.0 {
        return Err(OracleError::UnstableSystem { arrival_rate, service_rate });
    }
    Ok(1.0 / (service_rate - arrival_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm1_values() {
        assert!((mm1_mean_sojourn(0.4, 0.5).unwrap() - 10.0).abs() < 1e-12);
        assert!((mm1_mean_sojourn(0.25, 0.5).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(mm1_mean_sojourn(0.5, 0.5), Err(OracleError::UnstableSystem { .. })));
        assert!(mm1_mean_sojourn(0.6, 0.5).is_err());
        assert!(mm1_mean_sojourn(f64::NAN, 0.5).is_err());
    }
}
