//! The discrete-event loop.
//!
//! [`run`] replays a [`Trace`] through one single server under a
//! [`PolicySpec`]. Time only moves forward: the loop jumps between arrivals,
//! service completions and policy wake-ups (threshold crossings), and at
//! each instant it
//!
//! 1. retires the job whose service completes now,
//! 2. admits every packet that has arrived by now,
//! 3. asks the policy what to do until it answers `Continue` or `Idle`.
//!
//! Service is preemptive-resume: an interrupted packet returns to the head of
//! its class queue with its residual demand. Under the threshold policy with
//! deadline dropping, a PU packet that cannot finish by arrival + `l_d` is
//! aborted at the deadline (or discarded at dequeue when the deadline has
//! already passed) and recorded as completing one tick after the deadline.
//!
//! The loop ends when every packet has left the system, not at the horizon.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::{EdDueOffset, PacketClass, PacketRecord, PolicySpec, UtilityParams};
use crate::policies::{self, SchedulingAction};
use crate::time::SimTime;
use crate::utility::{self, UtilityError, UtilityOutcome};
use crate::workload::{Trace, WorkloadError};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    MalformedTrace(#[from] WorkloadError),
    #[error("UNSUPPORTED_POLICY: {0}")]
    UnsupportedPolicy(String),
    #[error("PENDING_RECORD: {class} packet {index} never completed")]
    PendingRecord { class: PacketClass, index: usize },
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("completion log CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("completion log CSV line {line}: {msg}")]
    Parse { line: u64, msg: String },
}

/// The packet occupying the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveJob {
    pub class: PacketClass,
    pub index: usize,
    /// Start of the current service segment.
    pub started: SimTime,
    /// Instant the server frees up if nothing interrupts it.
    pub completion: SimTime,
    /// The packet will miss its deadline and is cut off at `completion`.
    pub aborting: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerState {
    pub active: Option<ActiveJob>,
}

impl ServerState {
    pub fn busy(&self) -> bool {
        self.active.is_some()
    }

    pub fn active_class(&self) -> Option<PacketClass> {
        self.active.map(|j| j.class)
    }

    pub fn completion_time(&self) -> Option<SimTime> {
        self.active.map(|j| j.completion)
    }
}

/// Per-class FIFO cursors. Indexed by class: `[PU, ED]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueueState {
    /// Index of the oldest packet not yet handed to the server.
    pub head: [usize; 2],
    /// Number of packets that have arrived so far.
    pub arrived: [usize; 2],
    /// Remaining demand of packets interrupted mid-service.
    pub residuals: [BTreeMap<usize, SimTime>; 2],
}

impl QueueState {
    pub fn head(&self, class: PacketClass) -> usize {
        self.head[class.idx()]
    }

    pub fn pu_head(&self) -> usize {
        self.head[0]
    }

    pub fn ed_head(&self) -> usize {
        self.head[1]
    }

    pub fn arrived(&self, class: PacketClass) -> usize {
        self.arrived[class.idx()]
    }

    pub fn waiting(&self, class: PacketClass) -> bool {
        self.head(class) < self.arrived(class)
    }

    pub fn ed_residuals(&self) -> &BTreeMap<usize, SimTime> {
        &self.residuals[1]
    }

    /// Service still owed to packet `index` of `class`.
    pub fn remaining(&self, class: PacketClass, index: usize, trace: &Trace) -> SimTime {
        self.residuals[class.idx()]
            .get(&index)
            .copied()
            .unwrap_or(trace.services(class)[index])
    }
}

/// One uninterrupted stretch of service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSegment {
    pub class: PacketClass,
    pub index: usize,
    pub start: SimTime,
    pub end: SimTime,
}

/// Result of one engine run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionLog {
    /// One record per trace packet, in arrival order (PU first on ties).
    pub records: Vec<PacketRecord>,
    /// Service segments in the order they were rendered.
    pub segments: Vec<ServiceSegment>,
    pub policy: PolicySpec,
    pub trace_seed: u64,
}

/// Per-class latency sequences, each in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Latencies {
    pub pu: Vec<SimTime>,
    pub ed: Vec<SimTime>,
}

impl Latencies {
    pub fn pu_ms(&self) -> Vec<f64> {
        self.pu.iter().map(|l| l.as_ms()).collect()
    }

    pub fn ed_ms(&self) -> Vec<f64> {
        self.ed.iter().map(|l| l.as_ms()).collect()
    }
}

struct Engine<'a> {
    trace: &'a Trace,
    policy: PolicySpec,
    params: &'a UtilityParams,
    deadline: SimTime,
    drop_expired: bool,
    queue: QueueState,
    server: ServerState,
    completion: [Vec<Option<SimTime>>; 2],
    dropped: Vec<bool>,
    segments: Vec<ServiceSegment>,
    record_segments: bool,
}

impl<'a> Engine<'a> {
    fn new(trace: &'a Trace, policy: PolicySpec, params: &'a UtilityParams, record_segments: bool) -> Self {
        let drop_expired = matches!(policy, PolicySpec::Proposed { drop_expired: true, .. });
        Engine {
            trace,
            policy,
            params,
            deadline: params.deadline(),
            drop_expired,
            queue: QueueState::default(),
            server: ServerState::default(),
            completion: [vec![None; trace.pu_arrivals.len()], vec![None; trace.ed_arrivals.len()]],
            dropped: vec![false; trace.pu_arrivals.len()],
            segments: Vec::new(),
            record_segments,
        }
    }

    fn next_arrival(&self, class: PacketClass) -> Option<SimTime> {
        self.trace.arrivals(class).get(self.queue.arrived(class)).copied()
    }

    fn admit(&mut self, now: SimTime) {
        for class in [PacketClass::Pu, PacketClass::Ed] {
            let arrivals = self.trace.arrivals(class);
            let n = &mut self.queue.arrived[class.idx()];
            while *n < arrivals.len() && arrivals[*n] <= now {
                *n += 1;
            }
        }
    }

    fn push_segment(&mut self, job: &ActiveJob, end: SimTime) {
        if self.record_segments && end > job.started {
            self.segments.push(ServiceSegment { class: job.class, index: job.index, start: job.started, end });
        }
    }

    fn mark_dropped(&mut self, index: usize) {
        let arrival = self.trace.pu_arrivals[index];
        self.completion[0][index] = Some(arrival + self.deadline + SimTime::TICK);
        self.dropped[index] = true;
    }

    fn finish(&mut self, now: SimTime) {
        let job = self.server.active.take().expect("finish with idle server");
        self.push_segment(&job, now);
        self.queue.residuals[job.class.idx()].remove(&job.index);
        if job.aborting {
            self.mark_dropped(job.index);
        } else {
            self.completion[job.class.idx()][job.index] = Some(now);
        }
    }

    fn start(&mut self, class: PacketClass, now: SimTime) {
        debug_assert!(!self.server.busy());
        let index = self.queue.head(class);
        debug_assert!(self.queue.waiting(class));
        let remaining = self.queue.remaining(class, index, self.trace);
        self.queue.head[class.idx()] += 1;
        let mut completion = now + remaining;
        let mut aborting = false;
        if class == PacketClass::Pu && self.drop_expired {
            let deadline = self.trace.pu_arrivals[index] + self.deadline;
            if now >= deadline {
                self.queue.residuals[0].remove(&index);
                self.mark_dropped(index);
                return;
            }
            if completion > deadline {
                completion = deadline;
                aborting = true;
            }
        }
        self.server.active = Some(ActiveJob { class, index, started: now, completion, aborting });
    }

    fn preempt(&mut self, now: SimTime) {
        let job = self.server.active.take().expect("preempt with idle server");
        debug_assert!(!job.aborting, "aborting jobs are never preempted");
        debug_assert!(job.completion > now);
        self.push_segment(&job, now);
        let c = job.class.idx();
        debug_assert_eq!(self.queue.head[c], job.index + 1);
        self.queue.head[c] = job.index;
        self.queue.residuals[c].insert(job.index, job.completion - now);
    }

    fn decide_until_stable(&mut self, now: SimTime) {
        loop {
            let action = policies::decide(&self.policy, &self.queue, &self.server, self.trace, self.params, now);
            match action {
                SchedulingAction::Continue | SchedulingAction::Idle => break,
                SchedulingAction::ServePuHead => self.start(PacketClass::Pu, now),
                SchedulingAction::ServeEdHead => self.start(PacketClass::Ed, now),
                SchedulingAction::PreemptToPu => {
                    self.preempt(now);
                    self.start(PacketClass::Pu, now);
                }
                SchedulingAction::PreemptToEd => {
                    self.preempt(now);
                    self.start(PacketClass::Ed, now);
                }
            }
        }
    }

    fn run(&mut self) {
        let Some(mut now) = [self.next_arrival(PacketClass::Pu), self.next_arrival(PacketClass::Ed)]
            .into_iter()
            .flatten()
            .min()
        else {
            return;
        };
        loop {
            if self.server.completion_time() == Some(now) {
                self.finish(now);
            }
            self.admit(now);
            self.decide_until_stable(now);

            let next = [
                self.next_arrival(PacketClass::Pu),
                self.next_arrival(PacketClass::Ed),
                self.server.completion_time(),
                policies::next_wakeup(&self.policy, &self.queue, &self.server, self.trace, now),
            ]
            .into_iter()
            .flatten()
            .min();
            match next {
                Some(t) => {
                    debug_assert!(t >= now);
                    now = t;
                }
                None => break,
            }
        }
    }

    fn into_log(self) -> CompletionLog {
        let trace = self.trace;
        let records = trace
            .interleaved()
            .into_iter()
            .map(|(class, i)| PacketRecord {
                class,
                arrival: trace.arrivals(class)[i],
                service_demand: trace.services(class)[i],
                completion: self.completion[class.idx()][i],
                dropped: class == PacketClass::Pu && self.dropped[i],
            })
            .collect();
        CompletionLog { records, segments: self.segments, policy: self.policy, trace_seed: trace.seed }
    }
}

fn check_policy(policy: &PolicySpec, params: &UtilityParams) -> Result<(), EngineError> {
    match *policy {
        PolicySpec::Proposed { lt, .. } if lt < SimTime::ZERO || lt >= params.deadline() => {
            Err(EngineError::UnsupportedPolicy(format!(
                "threshold {} ms outside [0, l_d = {} ms)",
                lt.as_ms(),
                params.l_d
            )))
        }
        PolicySpec::Edd { ed_due_offset: EdDueOffset::Finite(off) } if off < SimTime::ZERO => Err(
            EngineError::UnsupportedPolicy(format!("negative ED due offset {} ms", off.as_ms())),
        ),
        _ => Ok(()),
    }
}

/// Runs `trace` under `policy`.
///
/// A threshold of exactly zero is accepted and realizes the `lt → 0⁺`
/// limit of the threshold rule (it then coincides with PU-first preemptive
/// priority); configuration validation still requires `lt > 0` from users.
pub fn run(trace: &Trace, policy: &PolicySpec, params: &UtilityParams) -> Result<CompletionLog, EngineError> {
    trace.check()?;
    check_policy(policy, params)?;
    let mut engine = Engine::new(trace, *policy, params, true);
    engine.run();
    Ok(engine.into_log())
}

/// Per-class latencies (completion − arrival) in arrival order.
pub fn compute_latencies(log: &CompletionLog) -> Result<Latencies, EngineError> {
    let mut out = Latencies::default();
    let mut counters = [0usize; 2];
    for r in &log.records {
        let index = counters[r.class.idx()];
        counters[r.class.idx()] += 1;
        let latency = r.latency().ok_or(EngineError::PendingRecord { class: r.class, index })?;
        match r.class {
            PacketClass::Pu => out.pu.push(latency),
            PacketClass::Ed => out.ed.push(latency),
        }
    }
    Ok(out)
}

/// Utility of the log's latencies.
pub fn log_outcome(log: &CompletionLog, params: &UtilityParams) -> Result<UtilityOutcome, EngineError> {
    let lat = compute_latencies(log)?;
    Ok(utility::outcome(&lat.pu_ms(), &lat.ed_ms(), params)?)
}

/// Summary of one evaluation, including the number of dropped PU packets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub outcome: UtilityOutcome,
    pub dropped: usize,
}

/// Runs the engine and scores the result: `run → compute_latencies →
/// class means → system utility`.
pub fn evaluate(trace: &Trace, policy: &PolicySpec, params: &UtilityParams) -> Result<UtilityOutcome, EngineError> {
    evaluate_detailed(trace, policy, params).map(|e| e.outcome)
}

/// Like [`evaluate`], without materializing the log. Used by sweeps.
pub fn evaluate_detailed(trace: &Trace, policy: &PolicySpec, params: &UtilityParams) -> Result<Evaluation, EngineError> {
    trace.check()?;
    check_policy(policy, params)?;
    let mut engine = Engine::new(trace, *policy, params, false);
    engine.run();
    let latencies = |class: PacketClass| -> Result<Vec<f64>, EngineError> {
        engine.completion[class.idx()]
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.map(|c| (c - trace.arrivals(class)[i]).as_ms())
                    .ok_or(EngineError::PendingRecord { class, index: i })
            })
            .collect()
    };
    let pu = latencies(PacketClass::Pu)?;
    let ed = latencies(PacketClass::Ed)?;
    Ok(Evaluation {
        outcome: utility::outcome(&pu, &ed, params)?,
        dropped: engine.dropped.iter().filter(|d| **d).count(),
    })
}

impl CompletionLog {
    pub fn records_of(&self, class: PacketClass) -> impl Iterator<Item = &PacketRecord> {
        self.records.iter().filter(move |r| r.class == class)
    }

    /// Writes `class,arrival_ms,service_ms,completion_ms,dropped` rows with
    /// 9-decimal fixed-point milliseconds. Pending completions are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EngineError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "arrival_ms", "service_ms", "completion_ms", "dropped"])?;
        for r in &self.records {
            w.write_record([
                r.class.label().to_string(),
                r.arrival.format_ms(9),
                r.service_demand.format_ms(9),
                r.completion.map(|c| c.format_ms(9)).unwrap_or_default(),
                r.dropped.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Reads the records of a log written by [`CompletionLog::write_csv`].
    pub fn read_records<R: Read>(input: R) -> Result<Vec<PacketRecord>, EngineError> {
        let mut reader = csv::Reader::from_reader(input);
        let mut out = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |msg: String| EngineError::Parse { line, msg };
            if rec.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", rec.len())));
            }
            let class = PacketClass::parse(&rec[0]).ok_or_else(|| bad(format!("unknown class `{}`", &rec[0])))?;
            let time = |s: &str| SimTime::parse_ms(s).map_err(|e| bad(e.to_string()));
            out.push(PacketRecord {
                class,
                arrival: time(&rec[1])?,
                service_demand: time(&rec[2])?,
                completion: if rec[3].is_empty() { None } else { Some(time(&rec[3])?) },
                dropped: rec[4].parse().map_err(|_| bad(format!("bad dropped flag `{}`", &rec[4])))?,
            });
        }
        Ok(out)
    }
}
