//! Monte-Carlo parameter sweeps.
//!
//! A sweep varies one axis of a base [`SimConfig`] over a grid and scores
//! each policy at each grid point over `replications` independent traces.
//! Replication `k` always draws from substream `k` of the base seed, so the
//! same arrivals and service demands are shared by every policy at a grid
//! point and, when the axis does not touch the workload (`l_t`, `a`), by
//! every grid point as well. Comparisons are therefore paired.
//!
//! Threshold policies are tuned per grid point: every `l_t` on a grid of
//! `lt_step_ms` steps strictly inside `(0, l_d)` is tried and the one with
//! the highest mean `V` is reported, together with a look-up-table entry
//! keyed by the configuration fingerprint.
//!
//! Work is split into independent (grid point, replication, policy) tasks
//! and run in parallel; results are gathered by task index, never by
//! completion order, so output is identical from run to run.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{self, EngineError, Evaluation};
use crate::model::{validate_config, ConfigReport, PolicySpec, SensorConfig, SimConfig};
use crate::time::SimTime;
use crate::workload::{build_trace, Trace, WorkloadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SweepAxis {
    /// PU latency threshold `l_t`, ms.
    Lt,
    /// ED sigmoid steepness `a`, 1/ms.
    ParamA,
    /// Number of sensors, phases re-staggered at each point.
    NumSensors,
    /// Per-sensor ED rate, 1/ms.
    EdRate,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Lt => "lt",
            SweepAxis::ParamA => "a",
            SweepAxis::NumSensors => "n",
            SweepAxis::EdRate => "ed_rate",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub policies: Vec<PolicySpec>,
    pub replications: u32,
    /// Step of the `l_t` search grid for threshold policies.
    pub lt_step_ms: f64,
}

impl SweepSpec {
    /// A spec with the default 0.25 ms threshold search step.
    pub fn new(base: SimConfig, axis: SweepAxis, grid: Vec<f64>, policies: Vec<PolicySpec>, replications: u32) -> Self {
        SweepSpec { base, axis, grid, policies, replications, lt_step_ms: DEFAULT_LT_STEP_MS }
    }
}

pub const DEFAULT_LT_STEP_MS: f64 = 0.25;

/// One (grid point, policy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub policy: String,
    pub v_mean: f64,
    pub v_stderr: f64,
    pub u_pu: f64,
    pub u_ed: f64,
    /// Dropped PU packets over all PU packets, across replications.
    pub drop_frac: f64,
    /// Threshold used, for threshold policies.
    pub lt_ms: Option<f64>,
}

/// Best threshold found for one configuration and threshold policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    pub fingerprint: String,
    pub axis_value: f64,
    pub policy: String,
    pub optimal_lt_ms: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// One entry per grid point (or per sweep, for an `l_t` sweep) and
    /// threshold policy.
    pub lut: Vec<LutEntry>,
}

impl SweepResult {
    /// The first look-up-table entry, if any threshold policy was swept.
    pub fn lut_entry(&self) -> Option<&LutEntry> {
        self.lut.first()
    }

    pub fn row(&self, axis_value: f64, policy: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.axis_value == axis_value && r.policy == policy)
    }

    /// Rows of one policy in grid order.
    pub fn series(&self, policy: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.policy == policy).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("INVALID_SWEEP: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] ConfigReport),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("IO_FAILURE: {0}")]
    Io(#[from] std::io::Error),
}

/// Hex SHA-256 of the JSON-serialized configuration with the seed removed.
/// Two configurations share a fingerprint exactly when they describe the
/// same scenario.
pub fn config_fingerprint(config: &SimConfig) -> String {
    let mut value = serde_json::to_value(config).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.remove("seed");
    }
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The configuration at one grid point. For the `l_t` axis this is the base.
pub fn config_at(base: &SimConfig, axis: SweepAxis, value: f64) -> SimConfig {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Lt => {}
        SweepAxis::ParamA => cfg.utility.a = value,
        SweepAxis::NumSensors => {
            let template = base.sensors[0];
            cfg.sensors = SensorConfig::staggered(value as usize, template.pu_period, template.ed_rate);
        }
        SweepAxis::EdRate => cfg.sensors.iter_mut().for_each(|s| s.ed_rate = value),
    }
    cfg
}

/// Candidate thresholds `k · step` strictly inside `(0, l_d)`.
pub fn lt_search_grid(l_d: f64, step: f64) -> Vec<f64> {
    (1..).map(|k| k as f64 * step).take_while(|lt| *lt < l_d - 1e-9).collect()
}

fn check_spec(spec: &SweepSpec, expected: SweepAxis) -> Result<(), ExperimentError> {
    let bad = |m: String| Err(ExperimentError::InvalidSpec(m));
    if spec.axis != expected {
        return bad(format!("expected a {} sweep, got {}", expected, spec.axis));
    }
    if spec.grid.is_empty() {
        return bad("grid is empty".into());
    }
    if spec.grid.windows(2).any(|w| !(w[0] < w[1])) {
        return bad("grid must be strictly increasing".into());
    }
    if spec.policies.is_empty() {
        return bad("no policies".into());
    }
    if spec.replications == 0 {
        return bad("replications must be >= 1".into());
    }
    if !(spec.lt_step_ms > 0.0 && spec.lt_step_ms < spec.base.utility.l_d) {
        return bad(format!("threshold search step {} ms must lie in (0, l_d)", spec.lt_step_ms));
    }
    if spec.base.sensors.is_empty() {
        return bad("base configuration has no sensors".into());
    }
    let l_d = spec.base.utility.l_d;
    for &x in &spec.grid {
        let ok = match spec.axis {
            SweepAxis::Lt => x > 0.0 && x < l_d,
            SweepAxis::ParamA => x.is_finite() && x > 0.0,
            SweepAxis::NumSensors => x >= 1.0 && x.fract() == 0.0,
            SweepAxis::EdRate => x.is_finite() && x >= 0.0,
        };
        if !ok {
            return bad(format!("grid value {x} is out of range for the {} axis", spec.axis));
        }
    }
    if spec.axis == SweepAxis::Lt && spec.policies.iter().any(|p| !p.is_proposed()) {
        return bad("an lt sweep takes threshold policies only".into());
    }
    for p in &spec.policies {
        if !p.is_proposed() {
            crate::model::validate_policy(p, &spec.base.utility)?;
        }
    }
    Ok(())
}

fn build_traces(config: &SimConfig, replications: u32) -> Result<Vec<Trace>, ExperimentError> {
    (0..replications)
        .into_par_iter()
        .map(|k| build_trace(config, k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Into::into)
}

/// Per-replication evaluations of `policies` on `traces`; `out[i][k]` is
/// policy `i` on replication `k`.
fn evaluate_all(
    traces: &[Trace],
    policies: &[PolicySpec],
    config: &SimConfig,
) -> Result<Vec<Vec<Evaluation>>, ExperimentError> {
    let r = traces.len();
    let flat: Vec<Evaluation> = (0..policies.len() * r)
        .into_par_iter()
        .map(|task| engine::evaluate_detailed(&traces[task % r], &policies[task / r], &config.utility))
        .collect::<Result<_, _>>()?;
    Ok(flat.chunks(r).map(<[Evaluation]>::to_vec).collect())
}

fn summarize(axis_value: f64, policy: &PolicySpec, evals: &[Evaluation], traces: &[Trace]) -> SweepRow {
    let r = evals.len() as f64;
    let vs: Vec<f64> = evals.iter().map(|e| e.outcome.system_v).collect();
    let v_mean = vs.iter().sum::<f64>() / r;
    let v_stderr = if evals.len() > 1 {
        (vs.iter().map(|v| (v - v_mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt() / r.sqrt()
    } else {
        0.0
    };
    let dropped: usize = evals.iter().map(|e| e.dropped).sum();
    let pu_total: usize = traces.iter().map(|t| t.pu_arrivals.len()).sum();
    SweepRow {
        axis_value,
        policy: policy.label(),
        v_mean,
        v_stderr,
        u_pu: evals.iter().map(|e| e.outcome.mean_pu).sum::<f64>() / r,
        u_ed: evals.iter().map(|e| e.outcome.mean_ed).sum::<f64>() / r,
        drop_frac: if pu_total == 0 { 0.0 } else { dropped as f64 / pu_total as f64 },
        lt_ms: match policy {
            PolicySpec::Proposed { lt, .. } => Some(lt.as_ms()),
            _ => None,
        },
    }
}

/// Index of the largest `v_mean`; the first one on ties.
fn argmax(rows: &[SweepRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.v_mean > rows[best].v_mean {
            best = i;
        }
    }
    best
}

/// Rows for the threshold policy `policy` at every candidate threshold in
/// `lts`, evaluated on `traces`.
fn threshold_rows(
    axis_value: f64,
    policy: &PolicySpec,
    lts: &[f64],
    traces: &[Trace],
    config: &SimConfig,
) -> Result<Vec<SweepRow>, ExperimentError> {
    let variants: Vec<PolicySpec> = lts.iter().map(|&lt| policy.with_lt(SimTime::from_ms(lt))).collect();
    let evals = evaluate_all(traces, &variants, config)?;
    Ok(variants.iter().zip(&evals).map(|(p, e)| summarize(axis_value, p, e, traces)).collect())
}

fn lut_entry(config: &SimConfig, row: &SweepRow) -> LutEntry {
    LutEntry {
        fingerprint: config_fingerprint(config),
        axis_value: row.axis_value,
        policy: row.policy.clone(),
        optimal_lt_ms: row.lt_ms.expect("threshold row"),
        v: row.v_mean,
    }
}

fn sweep_lt_axis(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    let config = validate_config(spec.base.clone())?;
    let traces = build_traces(&config, spec.replications)?;
    let mut rows = Vec::new();
    let mut lut = Vec::new();
    for policy in &spec.policies {
        let mut series = threshold_rows(0.0, policy, &spec.grid, &traces, &config)?;
        for row in &mut series {
            row.axis_value = row.lt_ms.expect("threshold row");
        }
        lut.push(lut_entry(&config, &series[argmax(&series)]));
        rows.extend(series);
    }
    sort_rows(&mut rows);
    Ok(SweepResult { axis: SweepAxis::Lt, rows, lut })
}

fn sweep_workload_axis(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    let mut rows = Vec::new();
    let mut lut = Vec::new();
    let shared = matches!(spec.axis, SweepAxis::ParamA);
    let mut traces = Vec::new();
    for &x in &spec.grid {
        let config = validate_config(config_at(&spec.base, spec.axis, x))?;
        if !shared || traces.is_empty() {
            traces = build_traces(&config, spec.replications)?;
        }
        let lts = lt_search_grid(config.utility.l_d, spec.lt_step_ms);
        let fixed: Vec<PolicySpec> = spec.policies.iter().filter(|p| !p.is_proposed()).copied().collect();
        let evals = evaluate_all(&traces, &fixed, &config)?;
        rows.extend(fixed.iter().zip(&evals).map(|(p, e)| summarize(x, p, e, &traces)));
        for policy in spec.policies.iter().filter(|p| p.is_proposed()) {
            let series = threshold_rows(x, policy, &lts, &traces, &config)?;
            let best = series[argmax(&series)].clone();
            lut.push(lut_entry(&config, &best));
            rows.push(best);
        }
    }
    sort_rows(&mut rows);
    Ok(SweepResult { axis: spec.axis, rows, lut })
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value).then_with(|| a.policy.cmp(&b.policy)));
}

/// V against the threshold for each threshold policy in `spec`. The same
/// traces serve every grid point. One LUT entry per policy names the best
/// grid threshold.
pub fn sweep_lt(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    check_spec(spec, SweepAxis::Lt)?;
    sweep_lt_axis(spec)
}

/// Sensitivity to the ED steepness `a`, with per-point threshold tuning.
pub fn sweep_param_a(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    check_spec(spec, SweepAxis::ParamA)?;
    sweep_workload_axis(spec)
}

/// Scaling with the number of sensors, with per-point threshold tuning.
pub fn sweep_n(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    check_spec(spec, SweepAxis::NumSensors)?;
    sweep_workload_axis(spec)
}

/// Scaling with the per-sensor ED rate, with per-point threshold tuning.
pub fn sweep_ed_rate(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    check_spec(spec, SweepAxis::EdRate)?;
    sweep_workload_axis(spec)
}

/// Dispatches on `spec.axis`.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    match spec.axis {
        SweepAxis::Lt => sweep_lt(spec),
        SweepAxis::ParamA => sweep_param_a(spec),
        SweepAxis::NumSensors => sweep_n(spec),
        SweepAxis::EdRate => sweep_ed_rate(spec),
    }
}

fn fixed(x: f64) -> String {
    format!("{x:.9}")
}

/// Writes `axis,policy,v_mean,v_stderr,u_pu,u_ed,drop_frac` rows ordered by
/// axis value then policy label, 9 decimals.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<(), ExperimentError> {
    let mut rows: Vec<&SweepRow> = result.rows.iter().collect();
    rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value).then_with(|| a.policy.cmp(&b.policy)));
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| ExperimentError::Io(e.into());
    w.write_record(["axis", "policy", "v_mean", "v_stderr", "u_pu", "u_ed", "drop_frac"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fixed(r.axis_value),
            r.policy.clone(),
            fixed(r.v_mean),
            fixed(r.v_stderr),
            fixed(r.u_pu),
            fixed(r.u_ed),
            fixed(r.drop_frac),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(result: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_csv(result, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

/// [`write_csv`] to a file.
pub fn emit_csv(result: &SweepResult, destination: &Path) -> Result<(), ExperimentError> {
    let file = std::fs::File::create(destination)?;
    write_csv(result, std::io::BufWriter::new(file))
}

/// Writes the look-up table as `fingerprint,axis,policy,lt_ms,v`.
pub fn emit_lut_csv(result: &SweepResult, destination: &Path) -> Result<(), ExperimentError> {
    let file = std::fs::File::create(destination)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_err = |e: csv::Error| ExperimentError::Io(e.into());
    w.write_record(["fingerprint", "axis", "policy", "lt_ms", "v"]).map_err(csv_err)?;
    for e in &result.lut {
        w.write_record([e.fingerprint.clone(), fixed(e.axis_value), e.policy.clone(), fixed(e.optimal_lt_ms), fixed(e.v)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
