//! Scheduling decision rules.
//!
//! Each rule looks at the queue, the server and the current instant and
//! returns one [`SchedulingAction`]. The engine consults the active rule at
//! every decision instant and keeps consulting it until it answers
//! [`SchedulingAction::Continue`] or [`SchedulingAction::Idle`].
//!
//! Within a class packets are always served in arrival order, so a rule only
//! ever chooses between the two class heads.

use crate::engine::{QueueState, ServerState};
use crate::model::{EdDueOffset, PacketClass, PolicySpec, PriorityClass, UtilityParams};
use crate::time::SimTime;
use crate::workload::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulingAction {
    ServePuHead,
    ServeEdHead,
    /// Interrupt the ED packet in service (it keeps its residual) and serve
    /// the PU head.
    PreemptToPu,
    /// Interrupt the PU packet in service and serve the ED head.
    PreemptToEd,
    /// Leave the server as it is.
    Continue,
    /// Nothing waits and nothing is in service.
    Idle,
}

impl SchedulingAction {
    pub fn serve(class: PacketClass) -> SchedulingAction {
        match class {
            PacketClass::Pu => SchedulingAction::ServePuHead,
            PacketClass::Ed => SchedulingAction::ServeEdHead,
        }
    }

    pub fn preempt_to(class: PacketClass) -> SchedulingAction {
        match class {
            PacketClass::Pu => SchedulingAction::PreemptToPu,
            PacketClass::Ed => SchedulingAction::PreemptToEd,
        }
    }
}

/// Serve the single waiting class, or report idleness. `None` when both
/// classes wait.
fn single_class(queue: &QueueState) -> Option<SchedulingAction> {
    match (queue.waiting(PacketClass::Pu), queue.waiting(PacketClass::Ed)) {
        (false, false) => Some(SchedulingAction::Idle),
        (true, false) => Some(SchedulingAction::ServePuHead),
        (false, true) => Some(SchedulingAction::ServeEdHead),
        (true, true) => None,
    }
}

fn head_arrival(queue: &QueueState, trace: &Trace, class: PacketClass) -> SimTime {
    trace.arrivals(class)[queue.head(class)]
}

/// First come, first served. Ties go to PU. Expects an idle server.
pub fn decide_fcfs(queue: &QueueState, trace: &Trace, _now: SimTime) -> SchedulingAction {
    if let Some(action) = single_class(queue) {
        return action;
    }
    if head_arrival(queue, trace, PacketClass::Pu) <= head_arrival(queue, trace, PacketClass::Ed) {
        SchedulingAction::ServePuHead
    } else {
        SchedulingAction::ServeEdHead
    }
}

/// Earliest due date: PU due at arrival + `l_d`, ED at arrival +
/// `ed_due_offset`. Ties go to the earlier arrival, then to PU. Expects an
/// idle server.
pub fn decide_edd(
    queue: &QueueState,
    trace: &Trace,
    params: &UtilityParams,
    ed_due_offset: EdDueOffset,
    _now: SimTime,
) -> SchedulingAction {
    if let Some(action) = single_class(queue) {
        return action;
    }
    let offset = match ed_due_offset {
        EdDueOffset::Unbounded => return SchedulingAction::ServePuHead,
        EdDueOffset::Finite(off) => off,
    };
    let pu_arrival = head_arrival(queue, trace, PacketClass::Pu);
    let ed_arrival = head_arrival(queue, trace, PacketClass::Ed);
    let pu_key = (pu_arrival + params.deadline(), pu_arrival, 0);
    let ed_key = (ed_arrival + offset, ed_arrival, 1);
    if pu_key <= ed_key {
        SchedulingAction::ServePuHead
    } else {
        SchedulingAction::ServeEdHead
    }
}

/// Preemptive-resume static priority.
pub fn decide_priority(
    queue: &QueueState,
    server: &ServerState,
    priority_class: PriorityClass,
    _now: SimTime,
) -> SchedulingAction {
    let high = priority_class.high();
    match server.active_class() {
        Some(active) if active == high => SchedulingAction::Continue,
        Some(_) if queue.waiting(high) => SchedulingAction::preempt_to(high),
        Some(_) => SchedulingAction::Continue,
        None => single_class(queue).unwrap_or(SchedulingAction::serve(high)),
    }
}

/// The threshold rule.
///
/// While the oldest waiting PU packet is younger than `lt`, ED packets go
/// first. An ED packet in service is preempted as soon as the oldest PU's
/// age reaches `lt`. PU packets in service are never interrupted; deadline
/// drops are carried out by the engine.
pub fn decide_proposed(
    queue: &QueueState,
    server: &ServerState,
    trace: &Trace,
    lt: SimTime,
    now: SimTime,
) -> SchedulingAction {
    let pu_age = || now - head_arrival(queue, trace, PacketClass::Pu);
    match server.active_class() {
        Some(PacketClass::Pu) => SchedulingAction::Continue,
        Some(PacketClass::Ed) => {
            if queue.waiting(PacketClass::Pu) && pu_age() >= lt {
                SchedulingAction::PreemptToPu
            } else {
                SchedulingAction::Continue
            }
        }
        None => single_class(queue).unwrap_or_else(|| {
            if pu_age() > lt {
                SchedulingAction::ServePuHead
            } else {
                SchedulingAction::ServeEdHead
            }
        }),
    }
}

/// Dispatches to the rule selected by `policy`. Non-preemptive rules answer
/// `Continue` while the server is busy.
pub fn decide(
    policy: &PolicySpec,
    queue: &QueueState,
    server: &ServerState,
    trace: &Trace,
    params: &UtilityParams,
    now: SimTime,
) -> SchedulingAction {
    match *policy {
        PolicySpec::Fcfs if server.busy() => SchedulingAction::Continue,
        PolicySpec::Fcfs => decide_fcfs(queue, trace, now),
        PolicySpec::Edd { .. } if server.busy() => SchedulingAction::Continue,
        PolicySpec::Edd { ed_due_offset } => decide_edd(queue, trace, params, ed_due_offset, now),
        PolicySpec::PriorityPreemptive { priority_class } => decide_priority(queue, server, priority_class, now),
        PolicySpec::Proposed { lt, .. } => decide_proposed(queue, server, trace, lt, now),
    }
}

/// The next instant, strictly after `now`, at which the rule may change its
/// mind without any arrival or completion happening: for the threshold
/// rule, the oldest PU's threshold crossing while ED is in service.
pub fn next_wakeup(
    policy: &PolicySpec,
    queue: &QueueState,
    server: &ServerState,
    trace: &Trace,
    now: SimTime,
) -> Option<SimTime> {
    let PolicySpec::Proposed { lt, .. } = *policy else {
        return None;
    };
    let job = server.active?;
    if job.class != PacketClass::Ed || !queue.waiting(PacketClass::Pu) {
        return None;
    }
    let instant = head_arrival(queue, trace, PacketClass::Pu) + lt;
    (instant > now && instant < job.completion).then_some(instant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ActiveJob;

    fn ms(x: f64) -> SimTime {
        SimTime::from_ms(x)
    }

    fn params() -> UtilityParams {
        UtilityParams { l_d: 10.0, a: 1.0, b: 20.0, beta_pu: 1.0, beta_ed: 1.0 }
    }

    /// Queue with the first PU and ED packets of `trace` waiting.
    fn both_waiting() -> QueueState {
        let mut q = QueueState::default();
        q.arrived = [1, 1];
        q
    }

    fn ed_in_service(completion: f64) -> ServerState {
        ServerState {
            active: Some(ActiveJob {
                class: PacketClass::Ed,
                index: 0,
                started: SimTime::ZERO,
                completion: ms(completion),
                aborting: false,
            }),
        }
    }

    #[test]
    fn fcfs_rules() {
        let t = Trace::from_ms(&[(2.0, 1.0)], &[(1.0, 1.0)]).unwrap();
        assert_eq!(decide_fcfs(&both_waiting(), &t, ms(3.0)), SchedulingAction::ServeEdHead);
        let t = Trace::from_ms(&[(1.0, 1.0)], &[(1.0, 1.0)]).unwrap();
        assert_eq!(decide_fcfs(&both_waiting(), &t, ms(3.0)), SchedulingAction::ServePuHead);
        assert_eq!(decide_fcfs(&QueueState::default(), &t, ms(3.0)), SchedulingAction::Idle);
    }

    #[test]
    fn edd_rules() {
        let p = params();
        let off20 = EdDueOffset::Finite(ms(20.0));
        let t = Trace::from_ms(&[(0.0, 1.0)], &[(0.0, 1.0)]).unwrap();
        assert_eq!(decide_edd(&both_waiting(), &t, &p, off20, ms(5.0)), SchedulingAction::ServePuHead);
        let t = Trace::from_ms(&[(5.0, 1.0)], &[(0.0, 1.0)]).unwrap();
        assert_eq!(decide_edd(&both_waiting(), &t, &p, off20, ms(6.0)), SchedulingAction::ServePuHead);
        // ED due 0+5 beats PU due 5+10
        let off5 = EdDueOffset::Finite(ms(5.0));
        assert_eq!(decide_edd(&both_waiting(), &t, &p, off5, ms(6.0)), SchedulingAction::ServeEdHead);
        let mut only_ed = QueueState::default();
        only_ed.arrived = [0, 1];
        assert_eq!(
            decide_edd(&only_ed, &t, &p, EdDueOffset::Unbounded, ms(6.0)),
            SchedulingAction::ServeEdHead
        );
        assert_eq!(
            decide_edd(&both_waiting(), &t, &p, EdDueOffset::Unbounded, ms(6.0)),
            SchedulingAction::ServePuHead
        );
    }

    #[test]
    fn priority_rules() {
        let mut pu_waiting = QueueState::default();
        pu_waiting.arrived = [1, 0];
        assert_eq!(
            decide_priority(&pu_waiting, &ed_in_service(9.0), PriorityClass::PuHigh, ms(1.0)),
            SchedulingAction::PreemptToPu
        );
        let pu_busy = ServerState {
            active: Some(ActiveJob { class: PacketClass::Pu, ..ed_in_service(9.0).active.unwrap() }),
        };
        let mut ed_waiting = QueueState::default();
        ed_waiting.arrived = [0, 1];
        assert_eq!(
            decide_priority(&ed_waiting, &pu_busy, PriorityClass::PuHigh, ms(1.0)),
            SchedulingAction::Continue
        );
        assert_eq!(
            decide_priority(&both_waiting(), &ServerState::default(), PriorityClass::EdHigh, ms(1.0)),
            SchedulingAction::ServeEdHead
        );
        assert_eq!(
            decide_priority(&ed_waiting, &pu_busy, PriorityClass::EdHigh, ms(1.0)),
            SchedulingAction::PreemptToEd
        );
    }

    #[test]
    fn proposed_rules() {
        let lt = ms(4.0);
        let t = Trace::from_ms(&[(0.0, 2.0)], &[(0.0, 6.0)]).unwrap();
        // oldest PU age 3 < 4, idle server: ED first
        assert_eq!(
            decide_proposed(&both_waiting(), &ServerState::default(), &t, lt, ms(3.0)),
            SchedulingAction::ServeEdHead
        );
        // past the threshold: PU first
        assert_eq!(
            decide_proposed(&both_waiting(), &ServerState::default(), &t, lt, ms(4.5)),
            SchedulingAction::ServePuHead
        );
        // ED in service, PU age reaches 4 = lt
        let mut pu_waiting = QueueState::default();
        pu_waiting.arrived = [1, 1];
        pu_waiting.head = [0, 1];
        assert_eq!(
            decide_proposed(&pu_waiting, &ed_in_service(6.0), &t, lt, ms(4.0)),
            SchedulingAction::PreemptToPu
        );
        assert_eq!(
            decide_proposed(&pu_waiting, &ed_in_service(6.0), &t, lt, ms(3.9)),
            SchedulingAction::Continue
        );
        let mut only_pu = QueueState::default();
        only_pu.arrived = [1, 0];
        for now in [0.0, 3.0, 50.0] {
            assert_eq!(
                decide_proposed(&only_pu, &ServerState::default(), &t, lt, ms(now)),
                SchedulingAction::ServePuHead
            );
        }
    }

    #[test]
    fn wakeup_only_for_threshold_inside_ed_service() {
        let policy = PolicySpec::proposed(4.0, false);
        let t = Trace::from_ms(&[(0.0, 2.0)], &[(0.0, 6.0)]).unwrap();
        let mut q = QueueState::default();
        q.arrived = [1, 1];
        q.head = [0, 1];
        assert_eq!(next_wakeup(&policy, &q, &ed_in_service(6.0), &t, ms(0.0)), Some(ms(4.0)));
        assert_eq!(next_wakeup(&policy, &q, &ed_in_service(3.0), &t, ms(0.0)), None);
        assert_eq!(next_wakeup(&PolicySpec::Fcfs, &q, &ed_in_service(6.0), &t, ms(0.0)), None);
    }
}
