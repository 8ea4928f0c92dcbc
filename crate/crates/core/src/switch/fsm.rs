//! Event-response table of the switch process.
//!
//! The dispatcher in [`super::Switch`] classifies every (state, event) pair
//! into a [`Condition`] and looks the row up here, so the table below is the
//! single source for which action runs and which state follows.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsmState {
    /// Before the begin-simulation interrupt.
    Unstarted,
    Init,
    Config,
    Wait,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogicalEvent {
    Begsim,
    /// Init runs to completion without waiting for an interrupt.
    Immediate,
    CellArrival,
    NotifyComplete,
    EndOfFabricDelay,
    TimeToSend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    None,
    NeighborNotificationIncomplete,
    ApplicationTraffic,
    LinkTrafficVsvdOn,
    LinkTrafficVsvdOff,
    CellCanBeBuffered,
    CellCannotBeBuffered,
    MoreCellsWaiting,
    NoMoreCellsWaiting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    None,
    Initialize,
    QueueCell,
    ProcessEnqueuedCells,
    /// Source rules before enqueue, then fabric delay.
    SourceRules,
    /// Destination rules, source rules before enqueue, then fabric delay.
    DestinationThenSourceRules,
    ScheduleFabricDelay,
    EnqueueAndActivateScheduler,
    DestroyCell,
    DequeueSendReactivate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Row {
    pub state: FsmState,
    pub event: LogicalEvent,
    pub condition: Condition,
    pub action: Action,
    pub next: FsmState,
}

const fn row(
    state: FsmState,
    event: LogicalEvent,
    condition: Condition,
    action: Action,
    next: FsmState,
) -> Row {
    Row {
        state,
        event,
        condition,
        action,
        next,
    }
}

use Action as A;
use Condition as C;
use FsmState as S;
use LogicalEvent as E;

pub const EVENT_RESPONSE_TABLE: [Row; 11] = [
    row(S::Unstarted, E::Begsim, C::None, A::None, S::Init),
    row(S::Init, E::Immediate, C::None, A::Initialize, S::Config),
    row(S::Config, E::CellArrival, C::NeighborNotificationIncomplete, A::QueueCell, S::Config),
    row(S::Config, E::NotifyComplete, C::None, A::ProcessEnqueuedCells, S::Wait),
    row(S::Wait, E::CellArrival, C::ApplicationTraffic, A::SourceRules, S::Wait),
    row(S::Wait, E::CellArrival, C::LinkTrafficVsvdOn, A::DestinationThenSourceRules, S::Wait),
    row(S::Wait, E::CellArrival, C::LinkTrafficVsvdOff, A::ScheduleFabricDelay, S::Wait),
    row(S::Wait, E::EndOfFabricDelay, C::CellCanBeBuffered, A::EnqueueAndActivateScheduler, S::Wait),
    row(S::Wait, E::EndOfFabricDelay, C::CellCannotBeBuffered, A::DestroyCell, S::Wait),
    row(S::Wait, E::TimeToSend, C::MoreCellsWaiting, A::DequeueSendReactivate, S::Wait),
    row(S::Wait, E::TimeToSend, C::NoMoreCellsWaiting, A::None, S::Wait),
];

/// Looks up the response for a classified event. `None` means the
/// combination cannot occur in that state.
pub fn respond(state: FsmState, event: LogicalEvent, condition: Condition) -> Option<(Action, FsmState)> {
    EVENT_RESPONSE_TABLE
        .iter()
        .find(|r| r.state == state && r.event == event && r.condition == condition)
        .map(|r| (r.action, r.next))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_unique() {
        for (i, a) in EVENT_RESPONSE_TABLE.iter().enumerate() {
            for b in &EVENT_RESPONSE_TABLE[i + 1..] {
                assert!(
                    !(a.state == b.state && a.event == b.event && a.condition == b.condition),
                    "{a:?} duplicates {b:?}"
                );
            }
        }
    }

    #[test]
    fn only_wait_processes_traffic() {
        for r in EVENT_RESPONSE_TABLE {
            if matches!(
                r.action,
                A::SourceRules
                    | A::DestinationThenSourceRules
                    | A::ScheduleFabricDelay
                    | A::EnqueueAndActivateScheduler
                    | A::DequeueSendReactivate
            ) {
                assert_eq!(r.state, S::Wait);
            }
        }
    }

    #[test]
    fn transitions_run_forward() {
        fn rank(s: FsmState) -> u8 {
            match s {
                S::Unstarted => 0,
                S::Init => 1,
                S::Config => 2,
                S::Wait => 3,
            }
        }
        for r in EVENT_RESPONSE_TABLE {
            assert!(rank(r.next) == rank(r.state) || rank(r.next) == rank(r.state) + 1);
        }
        assert_eq!(respond(S::Wait, E::Begsim, C::None), None);
    }
}
