//! Domain types shared by every stage of the simulator, plus up-front
//! validation of configurations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Traffic class of an uplink packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PacketClass {
    /// Periodic update: deterministic arrivals, firm deadline.
    #[serde(rename = "PU")]
    Pu,
    /// Event driven: Poisson arrivals, sigmoid latency utility.
    #[serde(rename = "ED")]
    Ed,
}

impl PacketClass {
    pub fn label(self) -> &'static str {
        match self {
            PacketClass::Pu => "PU",
            PacketClass::Ed => "ED",
        }
    }

    pub fn parse(s: &str) -> Option<PacketClass> {
        match s.trim() {
            "PU" | "pu" => Some(PacketClass::Pu),
            "ED" | "ed" => Some(PacketClass::Ed),
            _ => None,
        }
    }

    pub fn other(self) -> PacketClass {
        match self {
            PacketClass::Pu => PacketClass::Ed,
            PacketClass::Ed => PacketClass::Pu,
        }
    }

    pub(crate) fn idx(self) -> usize {
        match self {
            PacketClass::Pu => 0,
            PacketClass::Ed => 1,
        }
    }
}

impl fmt::Display for PacketClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One sensor's traffic: a PU stream with period and phase (ms) and an ED
/// Poisson stream (events per ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub pu_period: f64,
    pub pu_phase: f64,
    pub ed_rate: f64,
}

impl SensorConfig {
    /// `n` identical sensors with PU phases spread evenly over one period:
    /// sensor `i` (0-based) fires at `i * period / n`.
    pub fn staggered(n: usize, pu_period: f64, ed_rate: f64) -> Vec<SensorConfig> {
        (0..n)
            .map(|i| SensorConfig {
                pu_period,
                pu_phase: i as f64 * pu_period / n as f64,
                ed_rate,
            })
            .collect()
    }

    /// `n` identical sensors that all fire their PU packets at the same instants.
    pub fn synchronized(n: usize, pu_period: f64, ed_rate: f64) -> Vec<SensorConfig> {
        vec![SensorConfig { pu_period, pu_phase: 0.0, ed_rate }; n]
    }
}

/// Server capacity (bits/ms) and the fixed packet sizes (bits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceModel {
    pub mu: f64,
    pub s_pu: f64,
    pub s_ed: f64,
}

impl ServiceModel {
    /// PU service rate per ms.
    pub fn pu_rate(&self) -> f64 {
        self.mu / self.s_pu
    }

    /// ED service rate per ms.
    pub fn ed_rate(&self) -> f64 {
        self.mu / self.s_ed
    }

    pub fn rate(&self, class: PacketClass) -> f64 {
        match class {
            PacketClass::Pu => self.pu_rate(),
            PacketClass::Ed => self.ed_rate(),
        }
    }
}

/// Parameters of the per-class utilities and of the system utility.
///
/// `l_d` is the PU deadline (ms); `a` (1/ms) and `b` (ms) shape the ED
/// sigmoid; `beta_pu` and `beta_ed` weight the two class means in the
/// proportional-fair product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityParams {
    pub l_d: f64,
    pub a: f64,
    pub b: f64,
    pub beta_pu: f64,
    pub beta_ed: f64,
}

impl UtilityParams {
    pub fn deadline(&self) -> SimTime {
        SimTime::from_ms(self.l_d)
    }

    /// The sigmoid normalization constants `(c, d)` with
    /// `c = (1 + e^{ab}) / e^{ab}` and `d = 1 / (1 + e^{ab})`, evaluated
    /// through `e^{-ab}` so that large `a*b` cannot overflow.
    pub fn sigmoid_constants(&self) -> (f64, f64) {
        let q = (-self.a * self.b).exp();
        (1.0 + q, q / (1.0 + q))
    }
}

/// Which class a static preemptive-priority server favors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorityClass {
    PuHigh,
    EdHigh,
}

impl PriorityClass {
    pub fn high(self) -> PacketClass {
        match self {
            PriorityClass::PuHigh => PacketClass::Pu,
            PriorityClass::EdHigh => PacketClass::Ed,
        }
    }
}

/// Relative due date assigned to ED packets by the EDD baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdDueOffset {
    Finite(SimTime),
    /// ED packets are served only when no PU packet waits.
    Unbounded,
}

/// A scheduling discipline and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicySpec {
    /// Non-preemptive first come, first served across both classes.
    Fcfs,
    /// Non-preemptive earliest due date.
    Edd { ed_due_offset: EdDueOffset },
    /// Preemptive-resume static priority.
    PriorityPreemptive { priority_class: PriorityClass },
    /// Threshold scheduler: ED first while the oldest PU is younger than
    /// `lt`, optional dropping of PU packets that miss the deadline.
    Proposed { lt: SimTime, drop_expired: bool },
}

impl PolicySpec {
    /// EDD with ED due date at the sigmoid inflection point `b`.
    pub fn edd_default(params: &UtilityParams) -> PolicySpec {
        PolicySpec::Edd { ed_due_offset: EdDueOffset::Finite(SimTime::from_ms(params.b)) }
    }

    pub fn priority_pu() -> PolicySpec {
        PolicySpec::PriorityPreemptive { priority_class: PriorityClass::PuHigh }
    }

    pub fn proposed(lt_ms: f64, drop_expired: bool) -> PolicySpec {
        PolicySpec::Proposed { lt: SimTime::from_ms(lt_ms), drop_expired }
    }

    /// Short stable label used in CSV output. PROPOSED labels omit `lt`,
    /// which sweeps report separately.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Fcfs => "fcfs".into(),
            PolicySpec::Edd { ed_due_offset: EdDueOffset::Unbounded } => "edd-unbounded".into(),
            PolicySpec::Edd { .. } => "edd".into(),
            PolicySpec::PriorityPreemptive { priority_class: PriorityClass::PuHigh } => {
                "priority-pu".into()
            }
            PolicySpec::PriorityPreemptive { priority_class: PriorityClass::EdHigh } => {
                "priority-ed".into()
            }
            PolicySpec::Proposed { drop_expired: false, .. } => "proposed".into(),
            PolicySpec::Proposed { drop_expired: true, .. } => "proposed-drop".into(),
        }
    }

    pub fn is_proposed(&self) -> bool {
        matches!(self, PolicySpec::Proposed { .. })
    }

    pub fn with_lt(self, new_lt: SimTime) -> PolicySpec {
        match self {
            PolicySpec::Proposed { drop_expired, .. } => PolicySpec::Proposed { lt: new_lt, drop_expired },
            other => other,
        }
    }
}

/// Everything needed to generate and evaluate one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub sensors: Vec<SensorConfig>,
    pub service: ServiceModel,
    pub utility: UtilityParams,
    /// Simulated time span for arrivals, ms.
    pub horizon: f64,
    pub seed: u64,
    pub replications: u32,
}

impl SimConfig {
    /// The plant scenario used throughout the evaluation: 50 ms PU period,
    /// 0.0068/ms ED rate per sensor, 100 bits/ms server, 100/200-bit
    /// packets, 10 ms deadline, `a = 1/ms`, `b = 20 ms`, equal weights and a
    /// 40 s horizon. Phases are staggered.
    pub fn plant(n_sensors: usize) -> SimConfig {
        SimConfig {
            sensors: SensorConfig::staggered(n_sensors, 50.0, 0.0068),
            service: ServiceModel { mu: 100.0, s_pu: 100.0, s_ed: 200.0 },
            utility: UtilityParams { l_d: 10.0, a: 1.0, b: 20.0, beta_pu: 1.0, beta_ed: 1.0 },
            horizon: 40_000.0,
            seed: 1,
            replications: 20,
        }
    }

    /// Aggregate PU arrival rate per ms, `Σ 1/T_pu^i`.
    pub fn pu_rate_total(&self) -> f64 {
        self.sensors.iter().map(|s| 1.0 / s.pu_period).sum()
    }

    /// Aggregate ED arrival rate per ms, `Σ λ_ed^i`.
    pub fn ed_rate_total(&self) -> f64 {
        self.sensors.iter().map(|s| s.ed_rate).sum()
    }

    /// Offered load `λ_pu/μ_pu + λ_ed/μ_ed`.
    pub fn offered_load(&self) -> f64 {
        self.pu_rate_total() / self.service.pu_rate() + self.ed_rate_total() / self.service.ed_rate()
    }

    pub fn from_json(text: &str) -> Result<SimConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// One packet's life in the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub class: PacketClass,
    pub arrival: SimTime,
    pub service_demand: SimTime,
    /// `None` while the packet has not left the system.
    pub completion: Option<SimTime>,
    pub dropped: bool,
}

impl PacketRecord {
    pub fn latency(&self) -> Option<SimTime> {
        self.completion.map(|c| c - self.arrival)
    }
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("EMPTY_SENSOR_SET: sensors must not be empty")]
    EmptySensorSet,
    #[error("NON_POSITIVE_PERIOD: sensors[{sensor}].pu_period = {value} must be > 0")]
    NonPositivePeriod { sensor: usize, value: f64 },
    #[error("PHASE_GE_PERIOD: sensors[{sensor}].pu_phase = {phase} must lie in [0, pu_period = {period})")]
    PhaseGePeriod { sensor: usize, phase: f64, period: f64 },
    #[error("INVALID_ED_RATE: sensors[{sensor}].ed_rate = {value} must be finite and >= 0")]
    InvalidEdRate { sensor: usize, value: f64 },
    #[error("NON_POSITIVE_PARAMETER: {field} = {value} must be finite and > 0")]
    NonPositiveParameter { field: &'static str, value: f64 },
    #[error("ZERO_REPLICATIONS: replications must be >= 1")]
    ZeroReplications,
    #[error("LT_OUT_OF_RANGE: lt = {lt_ms} ms must satisfy 0 < lt < l_d = {l_d} ms")]
    LtOutOfRange { lt_ms: f64, l_d: f64 },
    #[error("NEGATIVE_DUE_OFFSET: edd_ed_due_offset = {0} ms must be >= 0")]
    NegativeDueOffset(f64),
}

/// Every invariant violated by a configuration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigReport {
    pub errors: Vec<ConfigError>,
}

impl fmt::Display for ConfigReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.errors {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

fn check_positive(field: &'static str, value: f64, errors: &mut Vec<ConfigError>) {
    if !(value.is_finite() && value > 0.0) {
        errors.push(ConfigError::NonPositiveParameter { field, value });
    }
}

/// Returns the configuration unchanged if every invariant holds, otherwise a
/// report naming each violation.
pub fn validate_config(config: SimConfig) -> Result<SimConfig, ConfigReport> {
    let mut errors = Vec::new();
    if config.sensors.is_empty() {
        errors.push(ConfigError::EmptySensorSet);
    }
    for (i, s) in config.sensors.iter().enumerate() {
        if !(s.pu_period.is_finite() && s.pu_period > 0.0) {
            errors.push(ConfigError::NonPositivePeriod { sensor: i, value: s.pu_period });
        } else if !(s.pu_phase >= 0.0 && s.pu_phase < s.pu_period) {
            errors.push(ConfigError::PhaseGePeriod { sensor: i, phase: s.pu_phase, period: s.pu_period });
        }
        if !(s.ed_rate.is_finite() && s.ed_rate >= 0.0) {
            errors.push(ConfigError::InvalidEdRate { sensor: i, value: s.ed_rate });
        }
    }
    check_positive("service.mu", config.service.mu, &mut errors);
    check_positive("service.s_pu", config.service.s_pu, &mut errors);
    check_positive("service.s_ed", config.service.s_ed, &mut errors);
    errors.extend(utility_errors(&config.utility));
    check_positive("horizon", config.horizon, &mut errors);
    if config.replications == 0 {
        errors.push(ConfigError::ZeroReplications);
    }
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigReport { errors })
    }
}

fn utility_errors(u: &UtilityParams) -> Vec<ConfigError> {
    let mut errors = Vec::new();
    check_positive("utility.l_d", u.l_d, &mut errors);
    check_positive("utility.a", u.a, &mut errors);
    check_positive("utility.b", u.b, &mut errors);
    check_positive("utility.beta_pu", u.beta_pu, &mut errors);
    check_positive("utility.beta_ed", u.beta_ed, &mut errors);
    errors
}

/// Checks a policy against the utility parameters it will run with.
pub fn validate_policy(policy: &PolicySpec, utility: &UtilityParams) -> Result<(), ConfigReport> {
    let mut errors = Vec::new();
    match policy {
        PolicySpec::Proposed { lt, .. } => {
            if !(*lt > SimTime::ZERO && *lt < utility.deadline()) {
                errors.push(ConfigError::LtOutOfRange { lt_ms: lt.as_ms(), l_d: utility.l_d });
            }
        }
        PolicySpec::Edd { ed_due_offset: EdDueOffset::Finite(off) } if *off < SimTime::ZERO => {
            errors.push(ConfigError::NegativeDueOffset(off.as_ms()));
        }
        _ => {}
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ConfigReport { errors })
    }
}
