//! Discrete-event simulation of a two-class, single-server uplink queue.
//!
//! Periodic-update (PU) packets arrive on a fixed schedule and must be served
//! within a firm deadline; event-driven (ED) packets arrive as a Poisson
//! stream and lose utility smoothly with latency. The crate provides
//!
//! - seeded trace generation ([`workload`]),
//! - the per-class and system utilities ([`utility`]),
//! - a forward-time event engine ([`engine`]) driven by pluggable decision
//!   rules ([`policies`]): FCFS, EDD, preemptive priority and a
//!   latency-threshold scheduler with optional deadline dropping,
//! - independent checks: a clairvoyant search, M/M/1 formulas and a
//!   step-by-step reference interpreter of the threshold scheduler
//!   ([`oracle`]),
//! - Monte-Carlo parameter sweeps with common random numbers
//!   ([`experiments`]).
//!
//! ```
//! use uplinksim::{engine, PolicySpec, Trace, UtilityParams};
//!
//! let params = UtilityParams { l_d: 10.0, a: 1.0, b: 20.0, beta_pu: 1.0, beta_ed: 1.0 };
//! // one PU (2 ms of work) and one ED (3 ms) arriving together
//! let trace = Trace::from_ms(&[(0.0, 2.0)], &[(0.0, 3.0)]).unwrap();
//! let outcome = engine::evaluate(&trace, &PolicySpec::proposed(4.0, false), &params).unwrap();
//! assert_eq!(outcome.mean_pu, 1.0);
//! assert!(outcome.system_v > 0.9999999);
//! ```

pub mod engine;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod policies;
pub mod time;
pub mod utility;
pub mod workload;

pub use engine::{CompletionLog, EngineError};
pub use model::{
    validate_config, validate_policy, EdDueOffset, PacketClass, PacketRecord, PolicySpec, PriorityClass,
    SensorConfig, ServiceModel, SimConfig, UtilityParams,
};
pub use time::SimTime;
pub use utility::UtilityOutcome;
pub use workload::{build_trace, Trace};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/traces.md")]
    mod traces {}
    #[doc = include_str!("../../../book/src/utility.md")]
    mod utility {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    mod scheduling {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
