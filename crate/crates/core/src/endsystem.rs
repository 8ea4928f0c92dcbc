//! ABR source and destination behaviour.
//!
//! A [`VcState`] paces cells at ACR, interleaves one forward RM cell per
//! `nrm` in-rate cells and adapts ACR from backward RM cells. A
//! [`Destination`] returns forward RM cells, closing the loop. Both limit
//! out-of-rate RM cells with an [`OorLimiter`].

use alloc::collections::VecDeque;

use crate::model::{make_frm, turn_around, AbrParams, Cell, ModelError, Rate, RmPayload, Direction, Time, VcId};

/// Out-of-rate RM cells allowed per VC per second.
pub const OOR_PER_SECOND: usize = 10;

/// Sliding-window limiter: at most `limit` grants in any half-open window
/// `[t, t + window)`.
#[derive(Clone, Debug)]
pub struct OorLimiter {
    limit: usize,
    window: Time,
    recent: VecDeque<Time>,
}

impl Default for OorLimiter {
    fn default() -> Self {
        OorLimiter::new(OOR_PER_SECOND, 1.0)
    }
}

impl OorLimiter {
    pub fn new(limit: usize, window: Time) -> OorLimiter {
        OorLimiter {
            limit,
            window,
            recent: VecDeque::with_capacity(limit),
        }
    }

    fn expire(&mut self, now: Time) {
        while matches!(self.recent.front(), Some(&t) if t + self.window <= now) {
            self.recent.pop_front();
        }
    }

    pub fn try_acquire(&mut self, now: Time) -> bool {
        self.expire(now);
        if self.recent.len() < self.limit {
            self.recent.push_back(now);
            true
        } else {
            false
        }
    }

    /// Earliest time a grant could succeed.
    pub fn next_available(&self, now: Time) -> Time {
        if self.recent.len() < self.limit {
            return now;
        }
        let oldest = self.recent[self.recent.len() - self.limit];
        (oldest + self.window).max(now)
    }
}

/// Application cells waiting at a source.
#[derive(Clone, Debug)]
pub enum Backlog {
    /// Always has data to send.
    Greedy,
    /// Cells are created on emission.
    Count(u64),
    /// Cells handed over by an upstream segment (virtual source).
    Cells(VecDeque<Cell>),
}

impl Backlog {
    pub fn is_empty(&self) -> bool {
        match self {
            Backlog::Greedy => false,
            Backlog::Count(n) => *n == 0,
            Backlog::Cells(q) => q.is_empty(),
        }
    }

    /// Cells that exist as objects and are waiting here.
    pub fn held_cells(&self) -> usize {
        match self {
            Backlog::Cells(q) => q.len(),
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AcrTrigger {
    Start,
    Ci,
    Ni,
    Er,
    Increase,
    Adtf,
}

impl AcrTrigger {
    pub fn label(self) -> &'static str {
        match self {
            AcrTrigger::Start => "START",
            AcrTrigger::Ci => "CI",
            AcrTrigger::Ni => "NI",
            AcrTrigger::Er => "ER",
            AcrTrigger::Increase => "INC",
            AcrTrigger::Adtf => "ADTF",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcrChange {
    pub before: Rate,
    pub after: Rate,
    pub trigger: AcrTrigger,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Emission {
    /// A cell leaves now; `next` is the next allowed emission if more is queued.
    Cell { cell: Cell, next: Option<Time> },
    /// Spacing not yet satisfied.
    NotBefore(Time),
    Idle,
}

/// Per-connection source state.
#[derive(Clone, Debug)]
pub struct VcState {
    pub vc: VcId,
    pub params: AbrParams,
    pub acr: Rate,
    /// Time of the last in-rate emission.
    pub time_of_last_cell: Option<Time>,
    pub cells_since_frm: u32,
    pub backlog: Backlog,
    pub oor: OorLimiter,
    pub unack_frm: u64,
    next_seq: u64,
}

impl VcState {
    pub fn new(vc: VcId, params: AbrParams, backlog: Backlog) -> VcState {
        VcState {
            vc,
            params,
            acr: params.icr,
            time_of_last_cell: None,
            cells_since_frm: 0,
            backlog,
            oor: OorLimiter::default(),
            unack_frm: 0,
            next_seq: 0,
        }
    }

    /// Starts sequence numbering at `base`, keeping cells created by
    /// different sources of one VC distinguishable.
    pub fn with_seq_base(mut self, base: u64) -> VcState {
        self.next_seq = base;
        self
    }

    fn take_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    pub fn enqueue_count(&mut self, n: u64) {
        match &mut self.backlog {
            Backlog::Count(c) => *c += n,
            Backlog::Greedy => {}
            Backlog::Cells(_) => panic!("cell-backed backlog takes cells, not counts"),
        }
    }

    pub fn enqueue_cell(&mut self, cell: Cell) {
        match &mut self.backlog {
            Backlog::Cells(q) => q.push_back(cell),
            _ => panic!("count-backed backlog cannot hold foreign cells"),
        }
    }

    /// Earliest time the next in-rate cell may leave, ignoring backlog.
    pub fn earliest_emission(&self, now: Time) -> Option<Time> {
        if self.acr <= 0.0 {
            return None;
        }
        Some(match self.time_of_last_cell {
            Some(last) => (last + 1.0 / self.acr).max(now),
            None => now,
        })
    }

    fn frm_due(&self) -> bool {
        self.cells_since_frm + 1 >= self.params.nrm
    }

    pub fn next_emission(&mut self, now: Time) -> Emission {
        if self.acr <= 0.0 || self.backlog.is_empty() {
            return Emission::Idle;
        }
        if let Some(last) = self.time_of_last_cell {
            let earliest = last + 1.0 / self.acr;
            if now < earliest {
                return Emission::NotBefore(earliest);
            }
        }
        let cell = if self.frm_due() {
            self.cells_since_frm = 0;
            self.unack_frm += 1;
            let seq = self.take_seq();
            make_frm(self.vc, seq, self.acr, self.params.pcr, now)
        } else {
            self.cells_since_frm += 1;
            match &mut self.backlog {
                Backlog::Cells(q) => q.pop_front().expect("backlog checked non-empty"),
                Backlog::Count(n) => {
                    *n -= 1;
                    let seq = self.take_seq();
                    Cell::data(self.vc, seq, now)
                }
                Backlog::Greedy => {
                    let seq = self.take_seq();
                    Cell::data(self.vc, seq, now)
                }
            }
        };
        self.time_of_last_cell = Some(now);
        let next = if self.backlog.is_empty() {
            None
        } else {
            Some(now + 1.0 / self.acr)
        };
        Emission::Cell { cell, next }
    }

    pub fn on_brm_at_source(&mut self, brm: &RmPayload) -> Result<AcrChange, ModelError> {
        if brm.dir != Direction::Backward {
            return Err(ModelError::NotBackward(self.vc));
        }
        if self.unack_frm > 0 {
            self.unack_frm -= 1;
        }
        let p = &self.params;
        let before = self.acr;
        let mut acr = before;
        let mut trigger = if brm.ci {
            acr -= acr * p.rdf;
            AcrTrigger::Ci
        } else if !brm.ni {
            acr += p.rif * p.pcr;
            AcrTrigger::Increase
        } else {
            AcrTrigger::Ni
        };
        let ceiling = brm.er.min(p.pcr);
        if acr > ceiling {
            acr = ceiling;
            trigger = AcrTrigger::Er;
        }
        acr = acr.max(p.mcr);
        self.acr = acr;
        Ok(AcrChange {
            before,
            after: acr,
            trigger,
        })
    }

    /// ACR falls back to ICR after an idle period longer than ADTF.
    pub fn on_idle_restart(&mut self, now: Time) -> Option<AcrChange> {
        let last = self.time_of_last_cell?;
        if now - last > self.params.adtf && self.acr > self.params.icr {
            let before = self.acr;
            self.acr = self.params.icr;
            Some(AcrChange {
                before,
                after: self.acr,
                trigger: AcrTrigger::Adtf,
            })
        } else {
            None
        }
    }

    /// Out-of-rate FRM used to sense the network while ACR is zero.
    pub fn oor_probe(&mut self, now: Time) -> Option<Cell> {
        if self.acr > 0.0 || !self.oor.try_acquire(now) {
            return None;
        }
        let seq = self.take_seq();
        let mut cell = make_frm(self.vc, seq, 0.0, self.params.pcr, now);
        cell.clp = true;
        if let Some(rm) = cell.rm.as_mut() {
            rm.out_of_rate = true;
        }
        self.unack_frm += 1;
        Some(cell)
    }
}

/// A scheduled wake-up for a [`PacedSource`]. Wakes with a stale
/// generation are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wake {
    pub at: Time,
    pub generation: u64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Fired {
    pub cell: Option<Cell>,
    pub restart: Option<AcrChange>,
}

/// Drives a [`VcState`] from timer events: keeps exactly one live wake-up
/// armed at the next emission opportunity, and probes out of rate while
/// ACR is zero.
#[derive(Clone, Debug)]
pub struct PacedSource {
    pub state: VcState,
    armed: Option<Time>,
    generation: u64,
    last_probe: Option<Time>,
}

impl PacedSource {
    pub fn new(state: VcState) -> PacedSource {
        PacedSource {
            state,
            armed: None,
            generation: 0,
            last_probe: None,
        }
    }

    fn desired_wake(&self, now: Time) -> Option<Time> {
        if self.state.backlog.is_empty() {
            return None;
        }
        if self.state.acr <= 0.0 {
            let cadence = 1.0 / OOR_PER_SECOND as f64;
            let t = self.last_probe.map_or(now, |p| p + cadence);
            return Some(t.max(self.state.oor.next_available(now)).max(now));
        }
        self.state.earliest_emission(now)
    }

    /// Re-arms after any state change. Returns a wake to schedule when the
    /// previous one is no longer accurate.
    pub fn arm(&mut self, now: Time) -> Option<Wake> {
        let desired = self.desired_wake(now);
        if desired == self.armed {
            return None;
        }
        self.generation += 1;
        self.armed = desired;
        desired.map(|at| Wake {
            at,
            generation: self.generation,
        })
    }

    pub fn is_armed(&self) -> bool {
        self.armed.is_some()
    }

    /// Handles a wake-up. `None` means the wake was stale.
    pub fn fire(&mut self, generation: u64, now: Time) -> Option<Fired> {
        if generation != self.generation || self.armed.is_none() {
            return None;
        }
        self.armed = None;
        let restart = self.state.on_idle_restart(now);
        let cell = if self.state.acr > 0.0 {
            match self.state.next_emission(now) {
                Emission::Cell { cell, .. } => Some(cell),
                Emission::NotBefore(_) | Emission::Idle => None,
            }
        } else {
            let probe = self.state.oor_probe(now);
            if probe.is_some() {
                self.last_probe = Some(now);
            }
            probe
        };
        Some(Fired { cell, restart })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DestOutcome {
    /// Data cell absorbed.
    Consumed,
    /// BRM ready to send now.
    Brm(Cell),
    /// BRM held until the reverse direction can carry it. A previously held
    /// BRM it replaces is returned for loss accounting.
    Deferred { superseded: Option<Cell> },
}

/// Destination side of one VC.
#[derive(Clone, Debug)]
pub struct Destination {
    pub vc: VcId,
    pub last_efci_seen: bool,
    /// Map EFCI on the preceding data cell to CI in the returned RM cell.
    pub efci_to_ci: bool,
    /// Reverse-direction ACR available for in-rate BRMs; `None` when the
    /// reverse direction is unconstrained.
    pub reverse_acr: Option<Rate>,
    last_in_rate_brm: Option<Time>,
    pub oor: OorLimiter,
    pending: Option<Cell>,
}

impl Destination {
    pub fn new(vc: VcId, efci_to_ci: bool, reverse_acr: Option<Rate>) -> Destination {
        Destination {
            vc,
            last_efci_seen: false,
            efci_to_ci,
            reverse_acr,
            last_in_rate_brm: None,
            oor: OorLimiter::default(),
            pending: None,
        }
    }

    pub fn pending(&self) -> Option<&Cell> {
        self.pending.as_ref()
    }

    fn in_rate_slot(&mut self, now: Time) -> bool {
        match self.reverse_acr {
            None => true,
            Some(r) if r > 0.0 => {
                let free = match self.last_in_rate_brm {
                    Some(last) => now - last >= 1.0 / r,
                    None => true,
                };
                if free {
                    self.last_in_rate_brm = Some(now);
                }
                free
            }
            Some(_) => false,
        }
    }

    fn try_send(&mut self, mut brm: Cell, now: Time) -> Result<Cell, Cell> {
        if self.in_rate_slot(now) {
            return Ok(brm);
        }
        if self.oor.try_acquire(now) {
            brm.clp = true;
            if let Some(rm) = brm.rm.as_mut() {
                rm.out_of_rate = true;
            }
            return Ok(brm);
        }
        Err(brm)
    }

    pub fn on_cell(&mut self, cell: Cell, now: Time) -> Result<DestOutcome, ModelError> {
        match cell.rm {
            None => {
                self.last_efci_seen = cell.efci;
                Ok(DestOutcome::Consumed)
            }
            Some(_) => {
                let hint = self.efci_to_ci && self.last_efci_seen;
                let brm = turn_around(cell, hint)?;
                self.last_efci_seen = false;
                match self.try_send(brm, now) {
                    Ok(brm) => Ok(DestOutcome::Brm(brm)),
                    Err(brm) => Ok(DestOutcome::Deferred {
                        superseded: self.pending.replace(brm),
                    }),
                }
            }
        }
    }

    /// When a held BRM could next be sent.
    pub fn retry_at(&self, now: Time) -> Option<Time> {
        self.pending.as_ref()?;
        let oor = self.oor.next_available(now);
        let in_rate = match (self.reverse_acr, self.last_in_rate_brm) {
            (Some(r), Some(last)) if r > 0.0 => Some(last + 1.0 / r),
            (Some(r), None) if r > 0.0 => Some(now),
            _ => None,
        };
        Some(in_rate.map_or(oor, |t| t.min(oor)).max(now))
    }

    pub fn poll_pending(&mut self, now: Time) -> Option<Cell> {
        let brm = self.pending.take()?;
        match self.try_send(brm, now) {
            Ok(brm) => Some(brm),
            Err(brm) => {
                self.pending = Some(brm);
                None
            }
        }
    }
}
