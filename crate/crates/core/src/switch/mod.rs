//! The event-driven ATM switch process.
//!
//! A [`Switch`] is driven by the three interrupts of [`SwitchEvent`] plus the
//! begin-simulation / notify-complete control pair and a few timers
//! (averaging interval, virtual-source pacing, held BRM retry). Every
//! interrupt is classified into a [`fsm::Condition`] and dispatched through
//! [`fsm::respond`]. Side effects are reported as [`SwitchOutput`]s for the
//! engine to schedule and route.

pub mod buffer;
pub mod fsm;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use thiserror::Error;

use crate::endsystem::{AcrChange, Backlog, DestOutcome, Destination, PacedSource, VcState, Wake};
use crate::erica::{EricaConfig, EricaPortState, EricaTelemetry};
use crate::gcra::{GcraError, Policed, Policer};
use crate::model::{AbrParams, BufferConfig, Cell, ModelError, Rate, Time, VcId};

use buffer::{Pick, Scheduler, StreamDrops};
use fsm::{respond, Action, Condition, FsmState, LogicalEvent};

pub type PortId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwitchError {
    #[error("port {port}: invalid buffer configuration: {source}")]
    BufferConfig {
        port: PortId,
        #[source]
        source: ModelError,
    },
    #[error("port {port} has no buffer for QoS level {level}")]
    MissingLevel { port: PortId, level: u8 },
    #[error("route for vc {vc} names unknown port {port}")]
    UnknownPort { vc: VcId, port: PortId },
    #[error("{event:?} with condition {condition:?} is not valid in state {state:?}")]
    UnexpectedEvent {
        state: FsmState,
        event: LogicalEvent,
        condition: Condition,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gcra(#[from] GcraError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeedbackScheme {
    ExplicitRate,
    EfciBinary,
    RelativeRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ingress {
    /// From a local AAL client on this node.
    Application,
    Link(PortId),
}

/// The switch interrupts.
#[derive(Clone, Debug, PartialEq)]
pub enum SwitchEvent {
    CellArrival { cell: Cell, ingress: Ingress },
    EndOfFabricDelay { cell: Cell, port: PortId },
    TimeToSend { port: PortId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    BufferFull,
    Misrouted,
    Policed,
    /// A held BRM replaced by a newer one for the same VC.
    Superseded,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SwitchOutput {
    Schedule { at: Time, event: SwitchEvent },
    /// The cell starts transmission on the port's link now.
    Transmit { port: PortId, cell: Cell },
    WakeSource { vc: VcId, wake: Wake },
    RetryDestination { vc: VcId, at: Time },
    /// A cell created here (virtual-source RM cells).
    Created { cell: Cell },
    /// A BRM terminated by a virtual source.
    Delivered { cell: Cell },
    Dropped { cell: Cell, port: Option<PortId>, reason: DropReason },
    AcrChanged { vc: VcId, acr: Rate, change: AcrChange },
    ErRewritten { vc: VcId, before: Rate, after: Rate },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchConfig {
    pub feedback: FeedbackScheme,
    pub vsvd: bool,
    pub fabric_delay: Time,
    /// QoS level carrying ABR cells; lower levels are higher priority.
    pub abr_level: u8,
    pub efci_threshold: u32,
    pub ci_threshold: u32,
    pub ni_threshold: u32,
    /// Virtual destinations map EFCI to CI.
    pub efci_to_ci: bool,
    pub erica: EricaConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortSpec {
    /// Link rate in cells per second.
    pub link_rate: Rate,
    pub buffers: Vec<BufferConfig>,
}

/// Static routing entry for one VC at this switch.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    /// Output port towards the destination.
    pub forward: PortId,
    /// Output port towards the source; `None` when the VC originates here.
    pub reverse: Option<PortId>,
    pub qos_level: u8,
    /// Present for ABR connections.
    pub abr: Option<AbrParams>,
}

/// Per-port measurements closed at an averaging interval boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct PortSample {
    pub time: Time,
    pub port: PortId,
    /// (qos level, queue length) per buffer.
    pub queues: Vec<(u8, usize)>,
    pub utilization: f64,
    pub cells_sent: u64,
    pub drops: StreamDrops,
    pub erica: EricaTelemetry,
}

#[derive(Clone, Debug)]
pub struct Port {
    pub link_rate: Rate,
    pub scheduler: Scheduler,
    pub erica: EricaPortState,
    abr_index: Option<usize>,
    busy_until: Time,
    send_pending: bool,
    hp_count: u64,
    sent_in_interval: u64,
    pub sent_total: u64,
    pub drops: StreamDrops,
}

impl Port {
    pub fn averaging_interval(&self) -> Time {
        self.erica.averaging_interval
    }

    pub fn abr_queue_len(&self) -> usize {
        self.abr_index
            .map_or(0, |i| self.scheduler.buffers[i].len())
    }

    pub fn cell_time(&self) -> Time {
        1.0 / self.link_rate
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SwitchCounters {
    pub misrouted: u64,
    pub policed_drops: u64,
    pub tagged: u64,
    pub buffer_drops: u64,
}

#[derive(Clone, Debug)]
pub struct Switch {
    fsm: FsmState,
    config: SwitchConfig,
    port_specs: Vec<PortSpec>,
    ports: Vec<Port>,
    routes: BTreeMap<VcId, Route>,
    sources: BTreeMap<VcId, PacedSource>,
    destinations: BTreeMap<VcId, Destination>,
    policers: BTreeMap<VcId, (PortId, Policer)>,
    config_backlog: VecDeque<(Cell, Ingress)>,
    seq_base: u64,
    pub counters: SwitchCounters,
}

impl Switch {
    pub fn new(config: SwitchConfig, ports: Vec<PortSpec>, routes: BTreeMap<VcId, Route>) -> Switch {
        Switch {
            fsm: FsmState::Unstarted,
            config,
            port_specs: ports,
            ports: Vec::new(),
            routes,
            sources: BTreeMap::new(),
            destinations: BTreeMap::new(),
            policers: BTreeMap::new(),
            config_backlog: VecDeque::new(),
            seq_base: 0,
            counters: SwitchCounters::default(),
        }
    }

    /// First sequence number used for cells created by virtual sources.
    pub fn set_seq_base(&mut self, base: u64) {
        self.seq_base = base;
    }

    pub fn state(&self) -> FsmState {
        self.fsm
    }

    pub fn config(&self) -> &SwitchConfig {
        &self.config
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn port_mut(&mut self, port: PortId) -> &mut Port {
        &mut self.ports[port]
    }

    pub fn virtual_source(&self, vc: VcId) -> Option<&VcState> {
        self.sources.get(&vc).map(|s| &s.state)
    }

    pub fn config_backlog_len(&self) -> usize {
        self.config_backlog.len()
    }

    /// Installs usage parameter control for cells of `vc` entering on `ingress`.
    pub fn install_policer(&mut self, vc: VcId, ingress: PortId, policer: Policer) {
        self.policers.insert(vc, (ingress, policer));
    }

    fn transition(&mut self, event: LogicalEvent, condition: Condition) -> Result<Action, SwitchError> {
        let (action, next) = respond(self.fsm, event, condition).ok_or(SwitchError::UnexpectedEvent {
            state: self.fsm,
            event,
            condition,
        })?;
        self.fsm = next;
        Ok(action)
    }

    /// Begin-simulation interrupt: Init loads and validates the buffer
    /// configuration and ABR attributes, then the switch waits in Config
    /// for neighbour notification. Returns the two startup steps as
    /// (action, next state).
    pub fn begin_sim(&mut self) -> Result<[(Action, FsmState); 2], SwitchError> {
        let begin = self.transition(LogicalEvent::Begsim, Condition::None)?;
        let after_begin = self.fsm;
        self.initialize()?;
        let init = self.transition(LogicalEvent::Immediate, Condition::None)?;
        Ok([(begin, after_begin), (init, self.fsm)])
    }

    fn initialize(&mut self) -> Result<(), SwitchError> {
        let mut ports = Vec::with_capacity(self.port_specs.len());
        for (id, spec) in self.port_specs.iter().enumerate() {
            for b in &spec.buffers {
                b.validate(spec.link_rate)
                    .map_err(|source| SwitchError::BufferConfig { port: id, source })?;
            }
            let scheduler = Scheduler::new(spec.buffers.clone(), spec.link_rate);
            let interval = self.config.erica.averaging_cells as f64 / spec.link_rate;
            ports.push(Port {
                link_rate: spec.link_rate,
                abr_index: scheduler.index_of(self.config.abr_level),
                scheduler,
                erica: EricaPortState::new(&self.config.erica, interval),
                busy_until: 0.0,
                send_pending: false,
                hp_count: 0,
                sent_in_interval: 0,
                sent_total: 0,
                drops: StreamDrops::default(),
            });
        }
        for (&vc, route) in &self.routes {
            for port in core::iter::once(route.forward).chain(route.reverse) {
                let p = ports.get(port).ok_or(SwitchError::UnknownPort { vc, port })?;
                if p.scheduler.index_of(route.qos_level).is_none() {
                    return Err(SwitchError::MissingLevel {
                        port,
                        level: route.qos_level,
                    });
                }
            }
            if let Some(params) = route.abr {
                params.validate()?;
                let originates = route.reverse.is_none();
                if originates || self.config.vsvd {
                    let vs = VcState::new(vc, params, Backlog::Cells(VecDeque::new())).with_seq_base(self.seq_base);
                    self.sources.insert(vc, PacedSource::new(vs));
                }
                if self.config.vsvd && !originates {
                    self.destinations
                        .insert(vc, Destination::new(vc, self.config.efci_to_ci, None));
                }
            }
        }
        self.ports = ports;
        Ok(())
    }

    /// Neighbour notification complete: replays cells queued during Config.
    pub fn notify_complete(&mut self, now: Time, out: &mut Vec<SwitchOutput>) -> Result<Action, SwitchError> {
        let action = self.transition(LogicalEvent::NotifyComplete, Condition::None)?;
        while let Some((cell, ingress)) = self.config_backlog.pop_front() {
            self.handle(SwitchEvent::CellArrival { cell, ingress }, now, out)?;
        }
        Ok(action)
    }

    /// Dispatches one interrupt and returns the table action that ran.
    pub fn handle(
        &mut self,
        event: SwitchEvent,
        now: Time,
        out: &mut Vec<SwitchOutput>,
    ) -> Result<Action, SwitchError> {
        match event {
            SwitchEvent::CellArrival { cell, ingress } => self.on_cell_arrival(cell, ingress, now, out),
            SwitchEvent::EndOfFabricDelay { cell, port } => self.on_end_of_fabric_delay(cell, port, now, out),
            SwitchEvent::TimeToSend { port } => self.on_time_to_send(port, now, out),
        }
    }

    fn on_cell_arrival(
        &mut self,
        mut cell: Cell,
        ingress: Ingress,
        now: Time,
        out: &mut Vec<SwitchOutput>,
    ) -> Result<Action, SwitchError> {
        let condition = match (self.fsm, ingress) {
            (FsmState::Config, _) => Condition::NeighborNotificationIncomplete,
            (_, Ingress::Application) => Condition::ApplicationTraffic,
            (_, Ingress::Link(_)) if self.config.vsvd => Condition::LinkTrafficVsvdOn,
            (_, Ingress::Link(_)) => Condition::LinkTrafficVsvdOff,
        };
        let action = self.transition(LogicalEvent::CellArrival, condition)?;
        if action == Action::QueueCell {
            self.config_backlog.push_back((cell, ingress));
            return Ok(action);
        }

        let Some(route) = self.routes.get(&cell.vc).cloned() else {
            self.counters.misrouted += 1;
            out.push(SwitchOutput::Dropped {
                cell,
                port: None,
                reason: DropReason::Misrouted,
            });
            return Ok(Action::DestroyCell);
        };

        if let (Ingress::Link(p), false) = (ingress, cell.is_brm()) {
            if let Some((police_port, policer)) = self.policers.get_mut(&cell.vc) {
                if *police_port == p {
                    match policer.police(cell, now)? {
                        Policed::Passed(c) => cell = c,
                        Policed::Tagged(c) => {
                            self.counters.tagged += 1;
                            cell = c;
                        }
                        Policed::Dropped(c) => {
                            self.counters.policed_drops += 1;
                            out.push(SwitchOutput::Dropped {
                                cell: c,
                                port: None,
                                reason: DropReason::Policed,
                            });
                            return Ok(Action::DestroyCell);
                        }
                    }
                }
            }
        }

        match action {
            Action::SourceRules => {
                if !self.sources.contains_key(&cell.vc) || cell.is_rm() {
                    self.counters.misrouted += 1;
                    out.push(SwitchOutput::Dropped {
                        cell,
                        port: None,
                        reason: DropReason::Misrouted,
                    });
                    return Ok(Action::DestroyCell);
                }
                self.source_enqueue(cell, now, out);
                Ok(action)
            }
            Action::DestinationThenSourceRules | Action::ScheduleFabricDelay => {
                if cell.is_brm() {
                    self.backward_rm(cell, &route, now, out)
                } else if action == Action::DestinationThenSourceRules
                    && self.destinations.contains_key(&cell.vc)
                {
                    self.virtual_destination(cell, &route, now, out)?;
                    Ok(action)
                } else {
                    self.send_to_fabric(cell, &route, route.forward, now, out);
                    Ok(Action::ScheduleFabricDelay)
                }
            }
            _ => unreachable!("cell arrival row with action {action:?}"),
        }
    }

    /// Feedback applied to a BRM crossing this switch, then either the
    /// local virtual source consumes it or it continues upstream.
    fn backward_rm(
        &mut self,
        mut cell: Cell,
        route: &Route,
        now: Time,
        out: &mut Vec<SwitchOutput>,
    ) -> Result<Action, SwitchError> {
        let vc = cell.vc;
        let port = &mut self.ports[route.forward];
        if let Some(rm) = cell.rm.as_mut() {
            match self.config.feedback {
                FeedbackScheme::ExplicitRate => {
                    let before = rm.er;
                    rm.er = port.erica.on_brm(vc, before);
                    out.push(SwitchOutput::ErRewritten {
                        vc,
                        before,
                        after: rm.er,
                    });
                }
                FeedbackScheme::RelativeRate => {
                    let q = port.abr_queue_len();
                    if q > self.config.ci_threshold as usize {
                        rm.ci = true;
                    }
                    if q > self.config.ni_threshold as usize {
                        rm.ni = true;
                    }
                }
                FeedbackScheme::EfciBinary => {}
            }
        }
        if let Some(vs) = self.sources.get_mut(&vc) {
            let rm = cell.rm.expect("backward RM cell");
            let change = vs.state.on_brm_at_source(&rm)?;
            push_acr(out, vc, vs.state.acr, change);
            if let Some(wake) = vs.arm(now) {
                out.push(SwitchOutput::WakeSource { vc, wake });
            }
            out.push(SwitchOutput::Delivered { cell });
            return Ok(if self.config.vsvd {
                Action::DestinationThenSourceRules
            } else {
                Action::ScheduleFabricDelay
            });
        }
        match route.reverse {
            Some(rev) => {
                self.send_to_fabric(cell, route, rev, now, out);
                Ok(Action::ScheduleFabricDelay)
            }
            None => {
                self.counters.misrouted += 1;
                out.push(SwitchOutput::Dropped {
                    cell,
                    port: None,
                    reason: DropReason::Misrouted,
                });
                Ok(Action::DestroyCell)
            }
        }
    }

    /// Destination rules for the upstream segment, then source rules for the
    /// downstream one. Forward RM cells are turned around carrying at most
    /// the virtual source's ACR.
    fn virtual_destination(
        &mut self,
        cell: Cell,
        route: &Route,
        now: Time,
        out: &mut Vec<SwitchOutput>,
    ) -> Result<(), SwitchError> {
        let vc = cell.vc;
        let dest = self.destinations.get_mut(&vc).expect("checked by caller");
        if cell.is_data() {
            dest.on_cell(cell.clone(), now)?;
            self.source_enqueue(cell, now, out);
            return Ok(());
        }
        match dest.on_cell(cell, now)? {
            DestOutcome::Brm(brm) => self.send_virtual_brm(brm, route, now, out),
            DestOutcome::Deferred { superseded } => {
                if let Some(old) = superseded {
                    out.push(SwitchOutput::Dropped {
                        cell: old,
                        port: None,
                        reason: DropReason::Superseded,
                    });
                }
                if let Some(at) = dest.retry_at(now) {
                    out.push(SwitchOutput::RetryDestination { vc, at });
                }
            }
            DestOutcome::Consumed => {}
        }
        Ok(())
    }

    fn send_virtual_brm(&mut self, mut brm: Cell, route: &Route, now: Time, out: &mut Vec<SwitchOutput>) {
        let vs_acr = self.sources.get(&brm.vc).map(|s| s.state.acr);
        if let (Some(rm), Some(acr)) = (brm.rm.as_mut(), vs_acr) {
            rm.er = rm.er.min(acr);
        }
        let rev = route.reverse.expect("virtual destination has an upstream port");
        self.send_to_fabric(brm, route, rev, now, out);
    }

    pub fn on_destination_retry(&mut self, vc: VcId, now: Time, out: &mut Vec<SwitchOutput>) {
        let Some(route) = self.routes.get(&vc).cloned() else {
            return;
        };
        let Some(dest) = self.destinations.get_mut(&vc) else {
            return;
        };
        if let Some(brm) = dest.poll_pending(now) {
            self.send_virtual_brm(brm, &route, now, out);
        } else if let Some(at) = dest.retry_at(now) {
            if at > now {
                out.push(SwitchOutput::RetryDestination { vc, at });
            }
        }
    }

    fn source_enqueue(&mut self, cell: Cell, now: Time, out: &mut Vec<SwitchOutput>) {
        let vc = cell.vc;
        let vs = self.sources.get_mut(&vc).expect("virtual source present");
        vs.state.enqueue_cell(cell);
        if let Some(wake) = vs.arm(now) {
            out.push(SwitchOutput::WakeSource { vc, wake });
        }
    }

    /// Pacing timer of a virtual (or local) source.
    pub fn on_source_wake(&mut self, vc: VcId, generation: u64, now: Time, out: &mut Vec<SwitchOutput>) {
        let Some(vs) = self.sources.get_mut(&vc) else {
            return;
        };
        let Some(fired) = vs.fire(generation, now) else {
            return;
        };
        if let Some(change) = fired.restart {
            push_acr(out, vc, vs.state.acr, change);
        }
        if let Some(wake) = vs.arm(now) {
            out.push(SwitchOutput::WakeSource { vc, wake });
        }
        if let Some(cell) = fired.cell {
            if cell.is_rm() {
                out.push(SwitchOutput::Created { cell: cell.clone() });
            }
            let route = self.routes[&vc].clone();
            self.send_to_fabric(cell, &route, route.forward, now, out);
        }
    }

    /// Measurement bookkeeping for a cell entering the fabric towards `port`,
    /// then the fabric delay.
    fn send_to_fabric(&mut self, cell: Cell, route: &Route, port: PortId, now: Time, out: &mut Vec<SwitchOutput>) {
        let abr_level = self.config.abr_level;
        let p = &mut self.ports[port];
        if route.abr.is_some() {
            p.erica.record_abr_cell(cell.vc, !cell.is_out_of_rate());
            if let Some(rm) = cell.rm.filter(|_| cell.is_frm()) {
                p.erica.on_frm(cell.vc, rm.ccr);
            }
        } else if route.qos_level < abr_level {
            p.hp_count += 1;
        }
        out.push(SwitchOutput::Schedule {
            at: now + self.config.fabric_delay,
            event: SwitchEvent::EndOfFabricDelay { cell, port },
        });
    }

    fn on_end_of_fabric_delay(
        &mut self,
        cell: Cell,
        port: PortId,
        now: Time,
        out: &mut Vec<SwitchOutput>,
    ) -> Result<Action, SwitchError> {
        let level = self.routes.get(&cell.vc).map(|r| r.qos_level);
        let p = &mut self.ports[port];
        let idx = level.and_then(|l| p.scheduler.index_of(l));
        let fits = matches!(idx, Some(i) if !p.scheduler.buffers[i].is_full());
        let condition = if fits {
            Condition::CellCanBeBuffered
        } else {
            Condition::CellCannotBeBuffered
        };
        let action = self.transition(LogicalEvent::EndOfFabricDelay, condition)?;
        let p = &mut self.ports[port];
        match (action, idx) {
            (Action::EnqueueAndActivateScheduler, Some(i)) => {
                p.scheduler.buffers[i].push(cell).expect("capacity checked");
                if !p.send_pending {
                    p.send_pending = true;
                    out.push(SwitchOutput::Schedule {
                        at: p.busy_until.max(now),
                        event: SwitchEvent::TimeToSend { port },
                    });
                }
            }
            _ => {
                if let Some(i) = idx {
                    p.scheduler.buffers[i].drops.record(&cell);
                }
                p.drops.record(&cell);
                self.counters.buffer_drops += 1;
                out.push(SwitchOutput::Dropped {
                    cell,
                    port: Some(port),
                    reason: DropReason::BufferFull,
                });
            }
        }
        Ok(action)
    }

    fn on_time_to_send(&mut self, port: PortId, now: Time, out: &mut Vec<SwitchOutput>) -> Result<Action, SwitchError> {
        let waiting = self.ports.get(port).is_some_and(|p| p.scheduler.has_waiting());
        let condition = if waiting {
            Condition::MoreCellsWaiting
        } else {
            Condition::NoMoreCellsWaiting
        };
        let action = self.transition(LogicalEvent::TimeToSend, condition)?;
        let Some(p) = self.ports.get_mut(port) else {
            return Ok(action);
        };
        p.send_pending = false;
        if action != Action::DequeueSendReactivate {
            return Ok(action);
        }
        let abr_len = p.abr_queue_len();
        let next = match p.scheduler.pick(now) {
            Pick::Send { level_index, mut cell } => {
                if self.config.feedback == FeedbackScheme::EfciBinary
                    && Some(level_index) == p.abr_index
                    && abr_len > self.config.efci_threshold as usize
                {
                    cell.efci = true;
                }
                p.busy_until = now + p.cell_time();
                p.sent_in_interval += 1;
                p.sent_total += 1;
                out.push(SwitchOutput::Transmit { port, cell });
                p.scheduler.has_waiting().then_some(p.busy_until)
            }
            Pick::Blocked { until } => Some(until.max(p.busy_until)),
            Pick::Empty => None,
        };
        if let Some(at) = next {
            p.send_pending = true;
            out.push(SwitchOutput::Schedule {
                at,
                event: SwitchEvent::TimeToSend { port },
            });
        }
        Ok(action)
    }

    /// Closes an averaging interval on `port`.
    pub fn on_interval_end(&mut self, port: PortId, now: Time) -> PortSample {
        let p = &mut self.ports[port];
        let interval = p.erica.averaging_interval;
        let hp_bw = p.hp_count as f64 / interval;
        let erica = p.erica.interval_end(p.link_rate, hp_bw, now);
        let utilization = p.sent_in_interval as f64 / (p.link_rate * interval);
        let sample = PortSample {
            time: now,
            port,
            queues: p
                .scheduler
                .buffers
                .iter()
                .map(|b| (b.config.qos_level, b.len()))
                .collect(),
            utilization,
            cells_sent: p.sent_in_interval,
            drops: p.drops,
            erica,
        };
        p.hp_count = 0;
        p.sent_in_interval = 0;
        sample
    }

    /// Cells currently held inside the switch (buffers, virtual-source
    /// backlogs, held BRMs, Config backlog).
    pub fn held_cells(&self) -> usize {
        self.ports.iter().map(|p| p.scheduler.total_len()).sum::<usize>()
            + self.sources.values().map(|s| s.state.backlog.held_cells()).sum::<usize>()
            + self.destinations.values().filter(|d| d.pending().is_some()).count()
            + self.config_backlog.len()
    }
}

fn push_acr(out: &mut Vec<SwitchOutput>, vc: VcId, acr: Rate, change: AcrChange) {
    if change.after != change.before {
        out.push(SwitchOutput::AcrChanged { vc, acr, change });
    }
}

#[cfg(test)]
mod tests;
