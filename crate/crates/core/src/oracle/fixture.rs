//! Hand-derived completion logs for tiny traces.
//!
//! A fixture is a JSON file:
//!
//! ```json
//! {
//!   "name": "ed_first_on_tie",
//!   "about": "PU and ED arrive together; the PU is young so ED goes first",
//!   "lt_ms": 4.0,
//!   "drop_expired": false,
//!   "pu": [[0.0, 2.0]],
//!   "ed": [[0.0, 3.0]],
//!   "expected": [
//!     { "class": "PU", "arrival_ms": 0.0, "completion_ms": 5.0, "dropped": false },
//!     { "class": "ED", "arrival_ms": 0.0, "completion_ms": 3.0, "dropped": false }
//!   ]
//! }
//! ```
//!
//! `pu` and `ed` list `(arrival, service)` pairs in ms. `expected` is in
//! arrival order with PU first on ties, exactly as the engine logs records.
//! A dropped PU completes one tick after its deadline, written here as the
//! deadline itself with `"dropped": true`.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::engine::CompletionLog;
use crate::model::{PacketClass, PacketRecord, PolicySpec, UtilityParams};
use crate::time::SimTime;
use crate::workload::{Trace, WorkloadError};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedRecord {
    pub class: PacketClass,
    pub arrival_ms: f64,
    pub completion_ms: f64,
    pub dropped: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    #[serde(default)]
    pub about: String,
    pub lt_ms: f64,
    pub drop_expired: bool,
    #[serde(default = "default_params")]
    pub utility: UtilityParams,
    pub pu: Vec<(f64, f64)>,
    pub ed: Vec<(f64, f64)>,
    pub expected: Vec<ExpectedRecord>,
}

fn default_params() -> UtilityParams {
    UtilityParams { l_d: 10.0, a: 1.0, b: 20.0, beta_pu: 1.0, beta_ed: 1.0 }
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{name}: {source}")]
    Trace { name: String, source: WorkloadError },
}

impl Fixture {
    pub fn from_json(text: &str) -> Result<Fixture, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Fixture, FixtureError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io { path: shown.clone(), source })?;
        Fixture::from_json(&text).map_err(|source| FixtureError::Json { path: shown, source })
    }

    /// Every `*.json` file in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Fixture>, FixtureError> {
        let io = |source| FixtureError::Io { path: dir.display().to_string(), source };
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "json") {
                paths.push(path);
            }
        }
        paths.sort();
        paths.iter().map(|p| Fixture::load(p)).collect()
    }

    pub fn trace(&self) -> Result<Trace, FixtureError> {
        Trace::from_ms(&self.pu, &self.ed).map_err(|source| FixtureError::Trace { name: self.name.clone(), source })
    }

    pub fn policy(&self) -> PolicySpec {
        PolicySpec::proposed(self.lt_ms, self.drop_expired)
    }

    /// The expected log as full records, service demands taken from the
    /// trace.
    pub fn expected_records(&self, trace: &Trace) -> Vec<PacketRecord> {
        let mut next = [0usize; 2];
        self.expected
            .iter()
            .map(|e| {
                let k = next[e.class.idx()];
                next[e.class.idx()] += 1;
                let completion = SimTime::from_ms(e.completion_ms);
                PacketRecord {
                    class: e.class,
                    arrival: SimTime::from_ms(e.arrival_ms),
                    service_demand: trace.services(e.class).get(k).copied().unwrap_or(SimTime::ZERO),
                    completion: Some(if e.dropped { completion + SimTime::TICK } else { completion }),
                    dropped: e.dropped,
                }
            })
            .collect()
    }
}

/// Outcome of comparing a log against the expected records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureReport {
    pub first_divergence: Option<String>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.first_divergence.is_none()
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.first_divergence {
            None => write!(f, "pass"),
            Some(d) => write!(f, "fail: {d}"),
        }
    }
}

fn show(t: Option<SimTime>) -> String {
    t.map_or_else(|| "pending".to_string(), |t| format!("{} ms", t.format_ms(9)))
}

/// Compares `records` with `expected` field by field, in order, with exact
/// tick equality. Reports the first record that differs.
pub fn compare_records(records: &[PacketRecord], expected: &[PacketRecord]) -> FixtureReport {
    for (i, (got, want)) in records.iter().zip(expected).enumerate() {
        let what = format!("record {i} ({} arriving at {} ms)", want.class, want.arrival.format_ms(6));
        let divergence = if got.class != want.class || got.arrival != want.arrival {
            Some(format!(
                "{what}: got {} arriving at {} ms",
                got.class,
                got.arrival.format_ms(6)
            ))
        } else if got.service_demand != want.service_demand {
            Some(format!(
                "{what}: service {} ms, expected {} ms",
                got.service_demand.format_ms(9),
                want.service_demand.format_ms(9)
            ))
        } else if got.completion != want.completion {
            Some(format!("{what}: completion {}, expected {}", show(got.completion), show(want.completion)))
        } else if got.dropped != want.dropped {
            Some(format!("{what}: dropped = {}, expected {}", got.dropped, want.dropped))
        } else {
            None
        };
        if divergence.is_some() {
            return FixtureReport { first_divergence: divergence };
        }
    }
    let first_divergence = (records.len() != expected.len())
        .then(|| format!("{} records, expected {}", records.len(), expected.len()));
    FixtureReport { first_divergence }
}

/// [`compare_records`] on an engine log.
pub fn check_against_fixture(log: &CompletionLog, expected: &[PacketRecord]) -> FixtureReport {
    compare_records(&log.records, expected)
}
