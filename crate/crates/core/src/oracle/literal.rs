//! Step-by-step interpreter of the threshold scheduler's pseudocode.
//!
//! The loop keeps the original shape: `t1` is the clock, `t2` the
//! completion of the packet last put in service, `t3` the next head
//! arrival, `p1`/`p2` the class cursors and `z` the class last served. A
//! packet is committed as soon as it is chosen and the clock jumps to its
//! completion; an ED packet is preempted after the fact by retreating the
//! clock to the PU threshold instant and rewinding the ED cursor.
//!
//! Four readings differ from the text taken verbatim:
//!
//! - the preemption branch selects the PU head (`x = 1`); setting only the
//!   active class would hand the server back to the interrupted ED packet;
//! - "both waiting" includes a head arriving exactly now (`t1 ≥ max`);
//! - after an idle jump, if both heads have arrived at the new instant the
//!   threshold rule picks between them rather than the arrival tie-break;
//! - the drop test compares against the PU packet's arrival plus `l_d`.
//!
//! Without these the interpreter contradicts its own stated behavior on
//! two-packet traces (a PU and an ED arriving together are served PU
//! first). Infinite arrivals past the end of a queue saturate.

use crate::model::{PacketClass, PacketRecord, UtilityParams};
use crate::time::SimTime;
use crate::workload::Trace;

const INF: SimTime = SimTime::MAX;

fn sat_add(a: SimTime, b: SimTime) -> SimTime {
    SimTime(a.0.saturating_add(b.0))
}

/// Runs the threshold scheduler on `trace` and returns one record per
/// packet in arrival order (PU first on ties).
pub fn interpret(trace: &Trace, lt: SimTime, drop_expired: bool, params: &UtilityParams) -> Vec<PacketRecord> {
    let ld = params.deadline();
    let (r1, r2) = (trace.pu_arrivals.len(), trace.ed_arrivals.len());
    let pa = |p: usize| if p < r1 { trace.pu_arrivals[p] } else { INF };
    let ea = |p: usize| if p < r2 { trace.ed_arrivals[p] } else { INF };
    let mut ed_s = trace.ed_services.clone();
    let mut pu_d: Vec<Option<SimTime>> = vec![None; r1];
    let mut ed_d: Vec<Option<SimTime>> = vec![None; r2];
    let mut dropped = vec![false; r1];

    let (mut p1, mut p2) = (0usize, 0usize);
    let (mut t1, mut t2) = (SimTime::ZERO, SimTime::ZERO);
    let mut z: Option<PacketClass> = None;

    while p1 < r1 || p2 < r2 {
        let (t3, mut x) = if pa(p1) <= ea(p2) { (pa(p1), PacketClass::Pu) } else { (ea(p2), PacketClass::Ed) };
        let threshold = |t1: SimTime| if t1 > sat_add(pa(p1), lt) { PacketClass::Pu } else { PacketClass::Ed };

        if t1 <= t3 {
            t1 = t3;
            if pa(p1) <= t1 && ea(p2) <= t1 {
                x = threshold(t1);
            }
        } else if z == Some(PacketClass::Ed) && t2 > sat_add(pa(p1), lt) {
            p2 -= 1;
            x = PacketClass::Pu;
            let instant = pa(p1) + lt;
            ed_s[p2] = t2 - instant;
            t1 = instant;
        } else if t1 >= pa(p1).max(ea(p2)) {
            x = threshold(t1);
        }

        match x {
            PacketClass::Pu => {
                z = Some(PacketClass::Pu);
                t2 = t1 + trace.pu_services[p1];
                pu_d[p1] = Some(t2);
                p1 += 1;
            }
            PacketClass::Ed => {
                z = Some(PacketClass::Ed);
                t2 = t1 + ed_s[p2];
                ed_d[p2] = Some(t2);
                p2 += 1;
            }
        }

        if drop_expired && z == Some(PacketClass::Pu) && t2 > pa(p1 - 1) + ld {
            let deadline = pa(p1 - 1) + ld;
            pu_d[p1 - 1] = Some(deadline + SimTime::TICK);
            dropped[p1 - 1] = true;
            t1 = t1.max(deadline);
        } else {
            t1 = t2;
        }
    }

    trace
        .interleaved()
        .into_iter()
        .map(|(class, i)| PacketRecord {
            class,
            arrival: trace.arrivals(class)[i],
            service_demand: trace.services(class)[i],
            completion: match class {
                PacketClass::Pu => pu_d[i],
                PacketClass::Ed => ed_d[i],
            },
            dropped: class == PacketClass::Pu && dropped[i],
        })
        .collect()
}
