//! Exhaustive clairvoyant search.
//!
//! Fix any schedule and list its packets by completion time. Serving the
//! same packets with preemptive priority in that order, without idling,
//! finishes every packet no later than the original schedule did: the first
//! `k` packets form a set whose work a work-conserving server clears as
//! early as possible, and the `k`-th is the last of them to finish. Both
//! utilities are non-increasing in latency and `V` is non-decreasing in
//! each class mean, so the best priority order is optimal among all
//! schedules, including ones that idle, preempt at arbitrary instants or
//! drop packets (a dropped packet can move to the end of the order). The
//! search therefore enumerates the `n!` priority orders.

use itertools::Itertools;

use super::OracleError;
use crate::model::{PacketClass, UtilityParams};
use crate::time::SimTime;
use crate::utility::{packet_utility, system_utility};
use crate::workload::Trace;

pub const DEFAULT_MAX_PACKETS: usize = 8;

/// One stretch of service in the best schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledSegment {
    pub class: PacketClass,
    pub index: usize,
    pub start: SimTime,
    pub length: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_v: f64,
    pub best_schedule: Vec<ScheduledSegment>,
    /// Number of priority orders evaluated.
    pub explored: u64,
}

struct Packet {
    class: PacketClass,
    index: usize,
    arrival: SimTime,
    service: SimTime,
}

/// Simulates preemptive priority where `rank[p]` is packet `p`'s priority
/// (lower wins). Writes completions into `done` and optionally segments.
fn priority_schedule(
    packets: &[Packet],
    rank: &[usize],
    done: &mut [SimTime],
    mut segments: Option<&mut Vec<ScheduledSegment>>,
) {
    let n = packets.len();
    let mut remaining: Vec<SimTime> = packets.iter().map(|p| p.service).collect();
    let mut left = n;
    let mut now = packets.iter().map(|p| p.arrival).min().unwrap_or(SimTime::ZERO);
    while left > 0 {
        let current = (0..n)
            .filter(|&p| remaining[p] > SimTime::ZERO && packets[p].arrival <= now)
            .min_by_key(|&p| rank[p]);
        let next_arrival = (0..n)
            .filter(|&p| remaining[p] > SimTime::ZERO && packets[p].arrival > now)
            .map(|p| packets[p].arrival)
            .min();
        let Some(p) = current else {
            now = next_arrival.expect("unfinished packets remain");
            continue;
        };
        let end = match next_arrival {
            Some(t) if t < now + remaining[p] => t,
            _ => now + remaining[p],
        };
        if let Some(segs) = segments.as_deref_mut() {
            match segs.last_mut() {
                Some(last) if last.class == packets[p].class && last.index == packets[p].index && last.start + last.length == now => {
                    last.length += end - now;
                }
                _ => segs.push(ScheduledSegment {
                    class: packets[p].class,
                    index: packets[p].index,
                    start: now,
                    length: end - now,
                }),
            }
        }
        remaining[p] = remaining[p] - (end - now);
        if remaining[p] == SimTime::ZERO {
            done[p] = end;
            left -= 1;
        }
        now = end;
    }
}

fn schedule_value(packets: &[Packet], done: &[SimTime], params: &UtilityParams) -> f64 {
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (p, &c) in packets.iter().zip(done) {
        let u = packet_utility(p.class, (c - p.arrival).as_ms(), params).expect("completion follows arrival");
        sum[p.class.idx()] += u;
        count[p.class.idx()] += 1;
    }
    let mean = |k: usize| if count[k] == 0 { 1.0 } else { sum[k] / count[k] as f64 };
    system_utility(mean(0), mean(1), params)
}

/// Best system utility any scheduler could reach on `trace` knowing every
/// arrival and service time in advance.
pub fn clairvoyant_best(trace: &Trace, params: &UtilityParams, max_packets: usize) -> Result<OracleResult, OracleError> {
    let n = trace.total_len();
    if n > max_packets {
        return Err(OracleError::TraceTooLarge { packets: n, max: max_packets });
    }
    let packets: Vec<Packet> = trace
        .interleaved()
        .into_iter()
        .map(|(class, index)| Packet {
            class,
            index,
            arrival: trace.arrivals(class)[index],
            service: trace.services(class)[index],
        })
        .collect();

    let mut rank = vec![0; n];
    let mut done = vec![SimTime::ZERO; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut explored = 0u64;
    for order in (0..n).permutations(n) {
        explored += 1;
        for (r, &p) in order.iter().enumerate() {
            rank[p] = r;
        }
        priority_schedule(&packets, &rank, &mut done, None);
        let v = schedule_value(&packets, &done, params);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, rank.clone()));
        }
    }
    let (best_v, best_rank) = best.expect("at least the empty order");
    let mut best_schedule = Vec::new();
    priority_schedule(&packets, &best_rank, &mut done, Some(&mut best_schedule));
    Ok(OracleResult { best_v, best_schedule, explored })
}
