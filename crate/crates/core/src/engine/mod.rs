//! Deterministic discrete-event engine.
//!
//! [`run`] resolves a [`Scenario`] into a [`Network`], builds one state
//! machine per node and dispatches events in `(time, insertion)` order until
//! the queue empties or the run duration passes. End systems host ABR
//! sources and destinations and background generators; switches are
//! [`Switch`] processes. Links are full duplex, FIFO per direction: a cell
//! sent at `t` arrives at `t + 424 / rate + propagation_delay`.

pub mod background;
pub mod queue;
pub mod scenario;
pub mod topology;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::endsystem::{AcrChange, AcrTrigger, Backlog, DestOutcome, Destination, PacedSource, VcState};
use crate::gcra::{GcraError, Policer};
use crate::metrics::{
    fairness_index, AcrRecord, ClrCounter, Conservation, DelayStats, InvariantChecks, OorRecord, PortRecord,
    PortSummary, RunReport, StepSeries, VcSummary,
};
use crate::model::{AbrParams, Cell, ClrStream, ModelError, ServiceCategory, Time, TrafficContract, VcId};
use crate::switch::{Ingress, PortSpec, Route, Switch, SwitchConfig, SwitchError, SwitchEvent, SwitchOutput};

use background::GeneratorState;
use queue::EventQueue;
use scenario::{Demand, Scenario, ScenarioError};
use topology::{Network, NodeKind, TopologyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("switch `{node}`: {source}")]
    Switch {
        node: String,
        #[source]
        source: SwitchError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gcra(#[from] GcraError),
}

// Relative slack for rate comparisons made on accumulated floating point.
const RATE_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
enum Event {
    NotifyComplete { node: usize },
    Arrival { node: usize, port: usize, cell: Cell },
    Switch { node: usize, event: SwitchEvent },
    TxDone { node: usize, port: usize },
    SourceStart { node: usize, vc: VcId },
    SourceWake { node: usize, vc: VcId, generation: u64 },
    AppArrival { node: usize, vc: VcId },
    Background { generator: usize },
    IntervalEnd { node: usize, port: usize, k: u64 },
    DestRetry { node: usize, vc: VcId },
}

impl Event {
    fn cell(&self) -> Option<&Cell> {
        match self {
            Event::Arrival { cell, .. }
            | Event::Switch {
                event: SwitchEvent::EndOfFabricDelay { cell, .. },
                ..
            } => Some(cell),
            _ => None,
        }
    }
}

#[derive(Debug, Default)]
struct TxPort {
    link: usize,
    queue: VecDeque<Cell>,
    busy: bool,
}

#[derive(Debug)]
struct EsSource {
    paced: PacedSource,
    port: usize,
    demand: Demand,
    last_in_rate: Option<Time>,
}

#[derive(Debug)]
struct EsDest {
    dest: Destination,
    port: usize,
    last_seq: Option<u64>,
}

#[derive(Debug, Default)]
struct EndSystem {
    ports: Vec<TxPort>,
    sources: BTreeMap<VcId, EsSource>,
    dests: BTreeMap<VcId, EsDest>,
    sinks: BTreeSet<VcId>,
}

#[derive(Debug)]
enum NodeState {
    End(EndSystem),
    Switch(Box<Switch>),
}

#[derive(Debug, Default)]
struct VcStats {
    clr: ClrCounter,
    delay: DelayStats,
    delivered: u64,
    delivered_steady: u64,
}

/// One run over a resolved network.
pub struct Simulation<'n> {
    net: &'n Network,
    queue: EventQueue<Event>,
    nodes: Vec<NodeState>,
    /// Per node, the link behind each port.
    ports: Vec<Vec<usize>>,
    generators: Vec<(GeneratorState, usize, usize)>,
    stats: BTreeMap<VcId, VcStats>,
    acr: Vec<AcrRecord>,
    port_records: Vec<PortRecord>,
    oor: Vec<OorRecord>,
    oor_seen: BTreeSet<(VcId, u64)>,
    outstanding_frm: BTreeSet<(VcId, u64)>,
    checks: InvariantChecks,
    conservation: Conservation,
    events: u64,
    out: Vec<SwitchOutput>,
}

/// Validates `scenario` and runs it.
pub fn run(scenario: &Scenario) -> Result<RunReport, EngineError> {
    let net = scenario.build()?;
    Simulation::new(&net)?.run()
}

fn port_of(ports: &[usize], link: usize) -> usize {
    ports
        .iter()
        .position(|&l| l == link)
        .expect("link attached to node")
}

impl<'n> Simulation<'n> {
    pub fn new(net: &'n Network) -> Result<Simulation<'n>, EngineError> {
        net.validate()?;
        let ports: Vec<Vec<usize>> = (0..net.nodes.len())
            .map(|n| {
                net.links
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.a == n || l.b == n)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let hop = |path: &[usize], i: usize| -> usize {
            net.link_between(path[i], path[i + 1]).expect("validated path")
        };

        let mut nodes = Vec::with_capacity(net.nodes.len());
        for (n, def) in net.nodes.iter().enumerate() {
            nodes.push(match def.kind {
                NodeKind::EndSystem => NodeState::End(EndSystem {
                    ports: ports[n]
                        .iter()
                        .map(|&link| TxPort {
                            link,
                            ..TxPort::default()
                        })
                        .collect(),
                    ..EndSystem::default()
                }),
                NodeKind::Switch => {
                    let settings = net.switch_settings[n].as_ref().expect("switch settings resolved");
                    let specs: Vec<PortSpec> = ports[n]
                        .iter()
                        .map(|&l| {
                            let rate = net.links[l].cell_rate();
                            PortSpec {
                                link_rate: rate,
                                buffers: settings.buffers.iter().map(|b| b.resolve(rate)).collect(),
                            }
                        })
                        .collect();
                    let fastest = specs.iter().map(|s| s.link_rate).fold(0.0, f64::max);
                    let fabric_delay = settings
                        .fabric_delay
                        .unwrap_or(if fastest > 0.0 { 4.0 / fastest } else { 0.0 });
                    let config = SwitchConfig {
                        feedback: settings.feedback,
                        vsvd: settings.vsvd,
                        fabric_delay,
                        abr_level: settings.abr_level,
                        efci_threshold: settings.efci_threshold(),
                        ci_threshold: settings.ci_threshold(),
                        ni_threshold: settings.ni_threshold(),
                        efci_to_ci: net.destination.efci_to_ci,
                        erica: settings.erica,
                    };
                    let mut routes = BTreeMap::new();
                    let mut policers = Vec::new();
                    let abr_contracts = net.abr.iter().map(|v| {
                        let contract = TrafficContract {
                            category: ServiceCategory::Abr,
                            pcr: v.params.pcr,
                            scr: None,
                            mbs: None,
                            mcr: v.params.mcr,
                            cdvt: v.cdvt,
                            qos: Default::default(),
                        };
                        (v.vc, v.path.as_slice(), settings.abr_level, Some(v.params), contract)
                    });
                    let bg_contracts = net.background.iter().map(|b| {
                        let g = &b.generator;
                        (g.vc, b.path.as_slice(), g.qos_level, None::<AbrParams>, g.contract())
                    });
                    for (vc, path, qos_level, abr, contract) in abr_contracts.chain(bg_contracts) {
                        let Some(i) = path.iter().position(|&p| p == n) else {
                            continue;
                        };
                        let forward = port_of(&ports[n], hop(path, i));
                        let reverse = port_of(&ports[n], hop(path, i - 1));
                        routes.insert(
                            vc,
                            Route {
                                forward,
                                reverse: Some(reverse),
                                qos_level,
                                abr,
                            },
                        );
                        if let Some(mode) = settings.policing {
                            if net.nodes[path[i - 1]].kind == NodeKind::EndSystem {
                                policers.push((vc, reverse, Policer::for_contract(&contract, mode)?));
                            }
                        }
                    }
                    let mut sw = Switch::new(config, specs, routes);
                    sw.set_seq_base((n as u64 + 1) << 40);
                    for (vc, port, p) in policers {
                        sw.install_policer(vc, port, p);
                    }
                    NodeState::Switch(Box::new(sw))
                }
            });
        }

        let mut sim = Simulation {
            net,
            queue: EventQueue::new(),
            nodes,
            ports,
            generators: Vec::new(),
            stats: BTreeMap::new(),
            acr: Vec::new(),
            port_records: Vec::new(),
            oor: Vec::new(),
            oor_seen: BTreeSet::new(),
            outstanding_frm: BTreeSet::new(),
            checks: InvariantChecks::default(),
            conservation: Conservation::default(),
            events: 0,
            out: Vec::new(),
        };

        // Begin simulation: every switch loads and validates its
        // configuration before anything is dispatched.
        for n in 0..sim.nodes.len() {
            if let NodeState::Switch(sw) = &mut sim.nodes[n] {
                sw.begin_sim().map_err(|source| EngineError::Switch {
                    node: net.nodes[n].name.clone(),
                    source,
                })?;
                let settings = net.switch_settings[n].as_ref().expect("switch settings resolved");
                sim.queue.push(settings.notify_delay, Event::NotifyComplete { node: n });
                for (port, p) in sw.ports().iter().enumerate() {
                    sim.queue.push(p.averaging_interval(), Event::IntervalEnd { node: n, port, k: 1 });
                }
            }
        }

        for v in &net.abr {
            let (src, dst) = (v.path[0], v.path[v.path.len() - 1]);
            let backlog = match v.demand {
                Demand::Greedy => Backlog::Greedy,
                Demand::Rate { .. } => Backlog::Count(0),
                Demand::Cells { count } => Backlog::Count(count),
            };
            let source = EsSource {
                paced: PacedSource::new(VcState::new(v.vc, v.params, backlog)),
                port: port_of(&sim.ports[src], hop(&v.path, 0)),
                demand: v.demand,
                last_in_rate: None,
            };
            let dest = EsDest {
                dest: Destination::new(v.vc, net.destination.efci_to_ci, net.destination.reverse_acr),
                port: port_of(&sim.ports[dst], hop(&v.path, v.path.len() - 2)),
                last_seq: None,
            };
            sim.end_mut(src).sources.insert(v.vc, source);
            sim.end_mut(dst).dests.insert(v.vc, dest);
            sim.stats.insert(v.vc, VcStats::default());
            sim.queue.push(v.start, Event::SourceStart { node: src, vc: v.vc });
            if matches!(v.demand, Demand::Rate { .. }) {
                sim.queue.push(v.start, Event::AppArrival { node: src, vc: v.vc });
            }
        }

        for (j, b) in net.background.iter().enumerate() {
            let (src, dst) = (b.path[0], b.path[b.path.len() - 1]);
            let port = port_of(&sim.ports[src], hop(&b.path, 0));
            let state = GeneratorState::new(b.generator.clone(), net.seed, j as u64);
            sim.queue.push(state.first_emission(), Event::Background { generator: j });
            sim.generators.push((state, src, port));
            sim.end_mut(dst).sinks.insert(b.generator.vc);
            sim.stats.insert(b.generator.vc, VcStats::default());
        }
        Ok(sim)
    }

    fn end_mut(&mut self, node: usize) -> &mut EndSystem {
        match &mut self.nodes[node] {
            NodeState::End(e) => e,
            NodeState::Switch(_) => panic!("node {node} is a switch"),
        }
    }

    fn now(&self) -> Time {
        self.queue.now()
    }

    fn switch_err(&self, node: usize) -> impl FnOnce(SwitchError) -> EngineError + '_ {
        move |source| EngineError::Switch {
            node: self.net.nodes[node].name.clone(),
            source,
        }
    }

    pub fn run(mut self) -> Result<RunReport, EngineError> {
        while let Some(t) = self.queue.peek_time() {
            if t > self.net.duration {
                break;
            }
            let (_, event) = self.queue.pop().expect("peeked");
            self.events += 1;
            self.dispatch(event)?;
        }
        Ok(self.finish())
    }

    fn dispatch(&mut self, event: Event) -> Result<(), EngineError> {
        let now = self.now();
        match event {
            Event::NotifyComplete { node } => {
                if let NodeState::Switch(sw) = &mut self.nodes[node] {
                    let r = sw.notify_complete(now, &mut self.out);
                    r.map_err(self.switch_err(node))?;
                }
                self.apply(node);
            }
            Event::Arrival { node, port, cell } => match &mut self.nodes[node] {
                NodeState::Switch(sw) => {
                    let r = sw.handle(
                        SwitchEvent::CellArrival {
                            cell,
                            ingress: Ingress::Link(port),
                        },
                        now,
                        &mut self.out,
                    );
                    r.map_err(self.switch_err(node))?;
                    self.apply(node);
                }
                NodeState::End(_) => self.end_arrival(node, cell)?,
            },
            Event::Switch { node, event } => {
                if let NodeState::Switch(sw) = &mut self.nodes[node] {
                    let r = sw.handle(event, now, &mut self.out);
                    r.map_err(self.switch_err(node))?;
                }
                self.apply(node);
            }
            Event::TxDone { node, port } => {
                let tx = &mut self.end_mut(node).ports[port];
                tx.busy = false;
                if let Some(cell) = tx.queue.pop_front() {
                    self.start_tx(node, port, cell);
                }
            }
            Event::SourceStart { node, vc } => {
                let src = self.end_mut(node).sources.get_mut(&vc).expect("source");
                let acr = src.paced.state.acr;
                let wake = src.paced.arm(now);
                self.acr.push(AcrRecord {
                    time: now,
                    node,
                    vc,
                    acr,
                    trigger: AcrTrigger::Start,
                });
                if let Some(w) = wake {
                    self.queue.push(w.at, Event::SourceWake { node, vc, generation: w.generation });
                }
            }
            Event::SourceWake { node, vc, generation } => match &mut self.nodes[node] {
                NodeState::Switch(sw) => {
                    sw.on_source_wake(vc, generation, now, &mut self.out);
                    self.apply(node);
                }
                NodeState::End(_) => self.source_wake(node, vc, generation),
            },
            Event::AppArrival { node, vc } => {
                let src = self.end_mut(node).sources.get_mut(&vc).expect("source");
                src.paced.state.enqueue_count(1);
                let wake = src.paced.arm(now);
                let Demand::Rate { rate } = src.demand else {
                    unreachable!("app arrivals only for rate demand")
                };
                if let Some(w) = wake {
                    self.queue.push(w.at, Event::SourceWake { node, vc, generation: w.generation });
                }
                self.queue.push(now + 1.0 / rate, Event::AppArrival { node, vc });
            }
            Event::Background { generator } => {
                let (state, node, port) = &mut self.generators[generator];
                let (node, port) = (*node, *port);
                let (cell, next) = state.emit(now);
                self.created(&cell);
                self.queue.push(next, Event::Background { generator });
                self.send(node, port, cell);
            }
            Event::IntervalEnd { node, port, k } => {
                if let NodeState::Switch(sw) = &mut self.nodes[node] {
                    let sample = sw.on_interval_end(port, now);
                    let interval = sw.ports()[port].averaging_interval();
                    self.port_records.push(PortRecord { node, sample });
                    self.queue
                        .push((k + 1) as f64 * interval, Event::IntervalEnd { node, port, k: k + 1 });
                }
            }
            Event::DestRetry { node, vc } => match &mut self.nodes[node] {
                NodeState::Switch(sw) => {
                    sw.on_destination_retry(vc, now, &mut self.out);
                    self.apply(node);
                }
                NodeState::End(es) => {
                    let d = es.dests.get_mut(&vc).expect("destination");
                    let port = d.port;
                    if let Some(brm) = d.dest.poll_pending(now) {
                        self.send_brm(node, port, brm);
                    } else if let Some(at) = d.dest.retry_at(now) {
                        self.queue.push(at, Event::DestRetry { node, vc });
                    }
                }
            },
        }
        Ok(())
    }

    fn source_wake(&mut self, node: usize, vc: VcId, generation: u64) {
        let now = self.now();
        let src = self.end_mut(node).sources.get_mut(&vc).expect("source");
        let Some(fired) = src.paced.fire(generation, now) else {
            return;
        };
        let params = src.paced.state.params;
        let acr = src.paced.state.acr;
        let port = src.port;
        let mut spacing_violation = false;
        if let Some(cell) = &fired.cell {
            if !cell.is_out_of_rate() {
                if let Some(last) = src.last_in_rate {
                    spacing_violation = now - last < (1.0 / acr) * (1.0 - RATE_EPS);
                }
                src.last_in_rate = Some(now);
            }
        }
        let wake = src.paced.arm(now);
        if let Some(change) = fired.restart {
            self.record_acr(node, vc, &params, change);
        }
        self.checks.spacing_violations += spacing_violation as u64;
        if let Some(w) = wake {
            self.queue.push(w.at, Event::SourceWake { node, vc, generation: w.generation });
        }
        if let Some(cell) = fired.cell {
            self.created(&cell);
            if cell.is_out_of_rate() {
                self.record_oor(node, &cell);
            }
            self.send(node, port, cell);
        }
    }

    fn end_arrival(&mut self, node: usize, cell: Cell) -> Result<(), EngineError> {
        let now = self.now();
        let vc = cell.vc;
        let es = self.end_mut(node);
        if cell.is_brm() {
            let Some(src) = es.sources.get_mut(&vc) else {
                self.dropped(&cell);
                return Ok(());
            };
            let rm = cell.rm.expect("backward RM cell");
            let change = src.paced.state.on_brm_at_source(&rm)?;
            let params = src.paced.state.params;
            let wake = src.paced.arm(now);
            self.record_acr(node, vc, &params, change);
            if let Some(w) = wake {
                self.queue.push(w.at, Event::SourceWake { node, vc, generation: w.generation });
            }
            self.delivered_brm(&cell);
            return Ok(());
        }
        if let Some(d) = es.dests.get_mut(&vc) {
            let port = d.port;
            let mut reordered = false;
            if cell.is_data() {
                reordered = d.last_seq.is_some_and(|s| cell.seq <= s);
                d.last_seq = Some(cell.seq);
            }
            let created_at = cell.created_at;
            let data = cell.is_data();
            match d.dest.on_cell(cell, now)? {
                DestOutcome::Consumed => {}
                DestOutcome::Brm(brm) => self.send_brm(node, port, brm),
                DestOutcome::Deferred { superseded } => {
                    let retry = d.dest.retry_at(now);
                    if let Some(old) = superseded {
                        self.dropped(&old);
                    }
                    if let Some(at) = retry {
                        self.queue.push(at, Event::DestRetry { node, vc });
                    }
                }
            }
            self.checks.reorderings += reordered as u64;
            if data {
                self.delivered_data(vc, created_at);
            }
            return Ok(());
        }
        if es.sinks.contains(&vc) {
            self.delivered_data(vc, cell.created_at);
            return Ok(());
        }
        self.dropped(&cell);
        Ok(())
    }

    fn send_brm(&mut self, node: usize, port: usize, brm: Cell) {
        if brm.is_out_of_rate() {
            self.record_oor(node, &brm);
        }
        self.send(node, port, brm);
    }

    /// Queues a cell on an end-system transmitter.
    fn send(&mut self, node: usize, port: usize, cell: Cell) {
        let tx = &mut self.end_mut(node).ports[port];
        if tx.busy {
            tx.queue.push_back(cell);
        } else {
            self.start_tx(node, port, cell);
        }
    }

    fn start_tx(&mut self, node: usize, port: usize, cell: Cell) {
        let now = self.now();
        let link = self.end_mut(node).ports[port].link;
        self.end_mut(node).ports[port].busy = true;
        self.queue
            .push(now + self.net.links[link].cell_time(), Event::TxDone { node, port });
        self.propagate(node, link, cell);
    }

    /// Schedules the arrival of a cell starting transmission now on `link`.
    fn propagate(&mut self, from: usize, link: usize, cell: Cell) {
        let l = &self.net.links[link];
        let to = l.other(from);
        let at = self.now() + l.cell_time() + l.propagation_delay;
        let port = port_of(&self.ports[to], link);
        self.queue.push(at, Event::Arrival { node: to, port, cell });
    }

    /// Routes the outputs a switch produced while handling one event.
    fn apply(&mut self, node: usize) {
        let outs = core::mem::take(&mut self.out);
        for o in outs {
            match o {
                SwitchOutput::Schedule { at, event } => {
                    if let SwitchEvent::EndOfFabricDelay { cell, .. } = &event {
                        if cell.is_brm() && cell.is_out_of_rate() && !self.oor_seen.contains(&(cell.vc, cell.seq)) {
                            let cell = cell.clone();
                            self.record_oor(node, &cell);
                        }
                    }
                    self.queue.push(at, Event::Switch { node, event });
                }
                SwitchOutput::Transmit { port, cell } => {
                    let link = self.ports[node][port];
                    self.propagate(node, link, cell);
                }
                SwitchOutput::WakeSource { vc, wake } => {
                    self.queue.push(
                        wake.at,
                        Event::SourceWake {
                            node,
                            vc,
                            generation: wake.generation,
                        },
                    );
                }
                SwitchOutput::RetryDestination { vc, at } => {
                    self.queue.push(at, Event::DestRetry { node, vc });
                }
                SwitchOutput::Created { cell } => {
                    self.created(&cell);
                    if cell.is_frm() && cell.is_out_of_rate() {
                        self.record_oor(node, &cell);
                    }
                }
                SwitchOutput::Delivered { cell } => self.delivered_brm(&cell),
                SwitchOutput::Dropped { cell, .. } => self.dropped(&cell),
                SwitchOutput::AcrChanged { vc, change, .. } => {
                    let params = match &self.nodes[node] {
                        NodeState::Switch(sw) => sw.virtual_source(vc).map(|s| s.params),
                        NodeState::End(_) => None,
                    };
                    if let Some(params) = params {
                        self.record_acr(node, vc, &params, change);
                    }
                }
                SwitchOutput::ErRewritten { before, after, .. } => {
                    self.checks.er_checks += 1;
                    if after > before {
                        self.checks.er_increases += 1;
                    }
                }
            }
        }
    }

    fn record_acr(&mut self, node: usize, vc: VcId, params: &AbrParams, change: AcrChange) {
        self.checks.acr_updates += 1;
        let a = change.after;
        if !(a >= params.mcr * (1.0 - RATE_EPS) && a <= params.pcr * (1.0 + RATE_EPS)) {
            self.checks.acr_out_of_bounds += 1;
        }
        self.acr.push(AcrRecord {
            time: self.now(),
            node,
            vc,
            acr: a,
            trigger: change.trigger,
        });
    }

    fn record_oor(&mut self, node: usize, cell: &Cell) {
        self.oor_seen.insert((cell.vc, cell.seq));
        self.oor.push(OorRecord {
            time: self.now(),
            node,
            vc: cell.vc,
        });
    }

    fn created(&mut self, cell: &Cell) {
        self.conservation.created += 1;
        if cell.is_frm() {
            self.outstanding_frm.insert((cell.vc, cell.seq));
        }
        if let Some(s) = self.stats.get_mut(&cell.vc) {
            s.clr.record_sent(cell.clp);
        }
    }

    fn delivered_brm(&mut self, cell: &Cell) {
        self.conservation.delivered += 1;
        if !self.outstanding_frm.remove(&(cell.vc, cell.seq)) {
            self.checks.unmatched_brms += 1;
        }
    }

    fn delivered_data(&mut self, vc: VcId, created_at: Time) {
        let now = self.now();
        self.conservation.delivered += 1;
        let steady = now >= self.net.steady_start;
        let s = self.stats.get_mut(&vc).expect("known vc");
        s.delivered += 1;
        if steady {
            s.delivered_steady += 1;
            s.delay.record_delivery(created_at, now);
        }
    }

    fn dropped(&mut self, cell: &Cell) {
        self.conservation.dropped += 1;
        if cell.is_rm() {
            self.outstanding_frm.remove(&(cell.vc, cell.seq));
        }
        if !cell.is_brm() {
            if let Some(s) = self.stats.get_mut(&cell.vc) {
                s.clr.record_lost(cell.clp);
            }
        }
    }

    fn in_flight(&self) -> u64 {
        let queued = self.queue.iter().filter(|e| e.cell().is_some()).count();
        let held: usize = self
            .nodes
            .iter()
            .map(|n| match n {
                NodeState::Switch(sw) => sw.held_cells(),
                NodeState::End(es) => {
                    es.ports.iter().map(|p| p.queue.len()).sum::<usize>()
                        + es.dests.values().filter(|d| d.dest.pending().is_some()).count()
                }
            })
            .sum();
        (queued + held) as u64
    }

    fn finish(self) -> RunReport {
        let net = self.net;
        let (from, to) = (net.steady_start, net.duration);
        let span = to - from;
        let mut conservation = self.conservation;
        conservation.in_flight = self.in_flight();
        let mut checks = self.checks;
        checks.causality_violations = self.queue.causality_violations;

        let mut vcs = Vec::new();
        let mut means = Vec::new();
        let abr = net.abr.iter().map(|v| (v.vc, v.path[0], v.start, true));
        let bg = net
            .background
            .iter()
            .map(|b| (b.generator.vc, b.path[0], b.generator.start, false));
        for (vc, src, start, is_abr) in abr.chain(bg) {
            let s = &self.stats[&vc];
            let points: Vec<(Time, f64)> = self
                .acr
                .iter()
                .filter(|r| r.node == src && r.vc == vc)
                .map(|r| (r.time, r.acr))
                .collect();
            let series = StepSeries::new(&points);
            let mean = series.time_weighted_mean(from, to);
            let range = series.range(from, to);
            if is_abr {
                if let Some(m) = mean {
                    means.push(m);
                }
            }
            vcs.push(VcSummary {
                vc,
                source: net.nodes[src].name.clone(),
                active_from: start,
                mean_acr: mean,
                min_acr: range.map(|r| r.0),
                max_acr: range.map(|r| r.1),
                throughput: if span > 0.0 { s.delivered_steady as f64 / span } else { 0.0 },
                delivered: s.delivered,
                delay: s.delay.summary(),
                clr_clp0: s.clr.clr(ClrStream::Clp0),
                clr_clp0_plus_1: s.clr.clr(ClrStream::Clp0Plus1),
            });
        }

        let mut port_summaries = Vec::new();
        for (n, node) in self.nodes.iter().enumerate() {
            let NodeState::Switch(sw) = node else {
                continue;
            };
            for (p, port) in sw.ports().iter().enumerate() {
                let interval = port.averaging_interval();
                let (cells, count) = self
                    .port_records
                    .iter()
                    .filter(|r| r.node == n && r.sample.port == p && r.sample.time - interval >= from - 1e-9)
                    .fold((0u64, 0u64), |(c, k), r| (c + r.sample.cells_sent, k + 1));
                let utilization = if count > 0 {
                    cells as f64 / (port.link_rate * interval * count as f64)
                } else {
                    0.0
                };
                let link = &net.links[self.ports[n][p]];
                port_summaries.push(PortSummary {
                    node: n,
                    port: p,
                    peer: net.nodes[link.other(n)].name.clone(),
                    link_rate: port.link_rate,
                    utilization,
                    drops: port.drops,
                });
            }
        }

        RunReport {
            scenario: net.name.clone(),
            seed: net.seed,
            duration: net.duration,
            steady_start: from,
            node_names: net.nodes.iter().map(|n| n.name.clone()).collect(),
            acr: self.acr,
            ports: self.port_records,
            vcs,
            port_summaries,
            fairness_index: fairness_index(&means).ok(),
            conservation,
            checks,
            oor_emissions: self.oor,
            events_dispatched: self.events,
        }
    }
}
