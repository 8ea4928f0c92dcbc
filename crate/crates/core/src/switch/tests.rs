use super::*;
use crate::model::{make_frm, turn_around};
use alloc::vec;

const LINK: Rate = 1000.0;
const FABRIC: Time = 0.004;

fn buffers(abr_capacity: u32) -> Vec<BufferConfig> {
    [(0, 100), (1, abr_capacity), (2, 100)]
        .into_iter()
        .map(|(qos_level, capacity)| BufferConfig {
            qos_level,
            capacity,
            min_bw: 0.0,
            max_bw: LINK,
        })
        .collect()
}

fn config(feedback: FeedbackScheme, vsvd: bool) -> SwitchConfig {
    SwitchConfig {
        feedback,
        vsvd,
        fabric_delay: FABRIC,
        abr_level: 1,
        efci_threshold: 5,
        ci_threshold: 8,
        ni_threshold: 4,
        efci_to_ci: true,
        erica: EricaConfig::default(),
    }
}

fn abr_route(forward: PortId, reverse: Option<PortId>) -> Route {
    Route {
        forward,
        reverse,
        qos_level: 1,
        abr: Some(AbrParams::with_pcr(LINK)),
    }
}

/// Two ports: 0 faces the sources, 1 faces the destinations. VC 1 is a
/// transit ABR connection, VC 7 a CBR one on level 0.
fn switch_with(cfg: SwitchConfig, abr_capacity: u32) -> Switch {
    let port = PortSpec {
        link_rate: LINK,
        buffers: buffers(abr_capacity),
    };
    let mut routes = BTreeMap::new();
    routes.insert(VcId(1), abr_route(1, Some(0)));
    routes.insert(
        VcId(7),
        Route {
            forward: 1,
            reverse: Some(0),
            qos_level: 0,
            abr: None,
        },
    );
    Switch::new(cfg, vec![port.clone(), port], routes)
}

fn running(cfg: SwitchConfig) -> Switch {
    running_with(cfg, 10)
}

fn running_with(cfg: SwitchConfig, abr_capacity: u32) -> Switch {
    let mut sw = switch_with(cfg, abr_capacity);
    sw.begin_sim().unwrap();
    sw.notify_complete(0.0, &mut Vec::new()).unwrap();
    sw
}

fn link_arrival(cell: Cell, port: PortId) -> SwitchEvent {
    SwitchEvent::CellArrival {
        cell,
        ingress: Ingress::Link(port),
    }
}

fn scheduled(out: &[SwitchOutput]) -> Vec<(Time, SwitchEvent)> {
    out.iter()
        .filter_map(|o| match o {
            SwitchOutput::Schedule { at, event } => Some((*at, event.clone())),
            _ => None,
        })
        .collect()
}

fn transmitted(out: &[SwitchOutput]) -> Vec<(PortId, Cell)> {
    out.iter()
        .filter_map(|o| match o {
            SwitchOutput::Transmit { port, cell } => Some((*port, cell.clone())),
            _ => None,
        })
        .collect()
}

/// Runs scheduled events in time order until none remain or `until` passes.
fn drain(sw: &mut Switch, mut pending: Vec<(Time, SwitchEvent)>, until: Time) -> Vec<(Time, PortId, Cell)> {
    let mut sent = Vec::new();
    while !pending.is_empty() {
        let i = (0..pending.len())
            .min_by(|&a, &b| pending[a].0.total_cmp(&pending[b].0))
            .unwrap();
        let (at, event) = pending.remove(i);
        if at > until {
            break;
        }
        let mut out = Vec::new();
        sw.handle(event, at, &mut out).unwrap();
        sent.extend(transmitted(&out).into_iter().map(|(p, c)| (at, p, c)));
        pending.extend(scheduled(&out));
    }
    sent
}

// One driver per row: brings a switch to the row's state, raises the row's
// event under its condition and reports the action taken and the next state.
fn exercise(row: &fsm::Row) -> (Action, FsmState) {
    use fsm::{Condition as C, FsmState as S, LogicalEvent as E};
    let vsvd = row.condition == C::LinkTrafficVsvdOn;
    let mut sw = switch_with(config(FeedbackScheme::ExplicitRate, vsvd), 1);
    if vsvd {
        sw.routes.get_mut(&VcId(1)).unwrap().reverse = Some(0);
    }
    if row.condition == C::ApplicationTraffic {
        sw.routes.insert(VcId(2), abr_route(1, None));
    }
    let mut out = Vec::new();
    match (row.state, row.event) {
        (S::Unstarted, E::Begsim) => {
            let action = sw.transition(E::Begsim, C::None).unwrap();
            return (action, sw.state());
        }
        (S::Init, E::Immediate) => {
            sw.transition(E::Begsim, C::None).unwrap();
            let action = sw.transition(E::Immediate, C::None).unwrap();
            sw.initialize().unwrap();
            return (action, sw.state());
        }
        _ => {
            sw.begin_sim().unwrap();
        }
    }
    if row.state == S::Config {
        return match row.event {
            E::CellArrival => {
                let a = sw.handle(link_arrival(Cell::data(VcId(1), 0, 0.0), 0), 0.0, &mut out).unwrap();
                assert_eq!(sw.config_backlog_len(), 1);
                assert!(out.is_empty());
                (a, sw.state())
            }
            E::NotifyComplete => {
                sw.handle(link_arrival(Cell::data(VcId(1), 0, 0.0), 0), 0.0, &mut out).unwrap();
                let a = sw.notify_complete(0.001, &mut out).unwrap();
                assert_eq!(sw.config_backlog_len(), 0);
                assert_eq!(scheduled(&out).len(), 1);
                (a, sw.state())
            }
            _ => unreachable!(),
        };
    }
    sw.notify_complete(0.0, &mut out).unwrap();
    out.clear();
    let action = match (row.event, row.condition) {
        (E::CellArrival, C::ApplicationTraffic) => {
            let a = sw
                .handle(
                    SwitchEvent::CellArrival {
                        cell: Cell::data(VcId(2), 0, 0.0),
                        ingress: Ingress::Application,
                    },
                    0.0,
                    &mut out,
                )
                .unwrap();
            assert!(out.iter().any(|o| matches!(o, SwitchOutput::WakeSource { vc: VcId(2), .. })));
            a
        }
        (E::CellArrival, _) => {
            let a = sw.handle(link_arrival(Cell::data(VcId(1), 0, 0.0), 0), 0.0, &mut out).unwrap();
            if !vsvd {
                assert_eq!(scheduled(&out)[0].0, FABRIC);
            }
            a
        }
        (E::EndOfFabricDelay, c) => {
            if c == C::CellCannotBeBuffered {
                sw.port_mut(1).scheduler.buffers[1].push(Cell::data(VcId(1), 0, 0.0)).unwrap();
            }
            sw.handle(
                SwitchEvent::EndOfFabricDelay {
                    cell: Cell::data(VcId(1), 1, 0.0),
                    port: 1,
                },
                0.0,
                &mut out,
            )
            .unwrap()
        }
        (E::TimeToSend, c) => {
            if c == C::MoreCellsWaiting {
                sw.port_mut(1).scheduler.buffers[1].push(Cell::data(VcId(1), 0, 0.0)).unwrap();
            }
            sw.handle(SwitchEvent::TimeToSend { port: 1 }, 0.0, &mut out).unwrap()
        }
        _ => unreachable!("no driver for {row:?}"),
    };
    (action, sw.state())
}

#[test]
fn event_response_table_conformance() {
    for row in &fsm::EVENT_RESPONSE_TABLE {
        assert_eq!(exercise(row), (row.action, row.next), "row {row:?}");
    }
}

#[test]
fn traffic_before_begin_is_rejected() {
    let mut sw = switch_with(config(FeedbackScheme::ExplicitRate, false), 10);
    let err = sw
        .handle(link_arrival(Cell::data(VcId(1), 0, 0.0), 0), 0.0, &mut Vec::new())
        .unwrap_err();
    assert!(matches!(err, SwitchError::UnexpectedEvent { state: FsmState::Unstarted, .. }));
}

#[test]
fn invalid_buffer_config_fails_startup() {
    let mut bad = buffers(10);
    bad[1].capacity = 0;
    let mut sw = Switch::new(
        config(FeedbackScheme::ExplicitRate, false),
        vec![PortSpec {
            link_rate: LINK,
            buffers: bad,
        }],
        BTreeMap::new(),
    );
    assert!(matches!(sw.begin_sim(), Err(SwitchError::BufferConfig { port: 0, .. })));

    let mut bad = buffers(10);
    bad[0].min_bw = 600.0;
    bad[0].max_bw = 500.0;
    let mut sw = Switch::new(
        config(FeedbackScheme::ExplicitRate, false),
        vec![PortSpec {
            link_rate: LINK,
            buffers: bad,
        }],
        BTreeMap::new(),
    );
    assert!(sw.begin_sim().is_err());
}

#[test]
fn valid_config_enters_config_with_empty_buffers() {
    let mut sw = switch_with(config(FeedbackScheme::ExplicitRate, false), 10);
    sw.begin_sim().unwrap();
    assert_eq!(sw.state(), FsmState::Config);
    assert!(sw.ports().iter().all(|p| p.scheduler.total_len() == 0));
}

#[test]
fn unroutable_cell_is_destroyed() {
    let mut sw = running(config(FeedbackScheme::ExplicitRate, false));
    let mut out = Vec::new();
    let a = sw.handle(link_arrival(Cell::data(VcId(99), 0, 0.0), 0), 0.0, &mut out).unwrap();
    assert_eq!(a, Action::DestroyCell);
    assert_eq!(sw.counters.misrouted, 1);
    assert!(matches!(
        out[..],
        [SwitchOutput::Dropped {
            reason: DropReason::Misrouted,
            ..
        }]
    ));
}

#[test]
fn enqueue_to_capacity_then_drop_tagged() {
    let mut sw = running(config(FeedbackScheme::ExplicitRate, false));
    for k in 0..9 {
        sw.port_mut(1).scheduler.buffers[1].push(Cell::data(VcId(1), k, 0.0)).unwrap();
    }
    let mut out = Vec::new();
    let eofd = |seq, clp| {
        let mut cell = Cell::data(VcId(1), seq, 0.0);
        cell.clp = clp;
        SwitchEvent::EndOfFabricDelay { cell, port: 1 }
    };
    sw.handle(eofd(9, false), 0.0, &mut out).unwrap();
    assert_eq!(sw.ports()[1].abr_queue_len(), 10);
    let a = sw.handle(eofd(10, true), 0.0, &mut out).unwrap();
    assert_eq!(a, Action::DestroyCell);
    assert_eq!(sw.ports()[1].drops.clp0_plus_1, 1);
    assert_eq!(sw.ports()[1].drops.clp0, 0);
    sw.handle(eofd(11, false), 0.0, &mut out).unwrap();
    assert_eq!(sw.ports()[1].drops.clp0, 1);
    assert_eq!(sw.ports()[1].drops.clp0_plus_1, 2);
}

#[test]
fn brm_er_rewritten_in_situ() {
    let mut sw = running(config(FeedbackScheme::ExplicitRate, false));
    {
        let e = &mut sw.port_mut(1).erica;
        e.interval_end(150.0, 0.0, 0.1);
        e.target_abr_capacity = 135.0;
        e.fair_share = 45.0;
        e.z = 1.5;
        e.max_alloc_previous = 45.0;
        e.ccr_table.insert(VcId(1), 90.0);
    }
    let brm = turn_around(make_frm(VcId(1), 3, 90.0, 149.0, 0.0), false).unwrap();
    let mut out = Vec::new();
    sw.handle(link_arrival(brm, 1), 0.2, &mut out).unwrap();
    assert!(out.contains(&SwitchOutput::ErRewritten {
        vc: VcId(1),
        before: 149.0,
        after: 60.0,
    }));
    match &scheduled(&out)[..] {
        [(at, SwitchEvent::EndOfFabricDelay { cell, port: 0 })] => {
            assert_eq!(*at, 0.2 + FABRIC);
            assert_eq!(cell.rm.unwrap().er, 60.0);
        }
        s => panic!("{s:?}"),
    }
}

#[test]
fn frm_updates_erica_and_input_count() {
    let mut sw = running(config(FeedbackScheme::ExplicitRate, false));
    let mut out = Vec::new();
    sw.handle(link_arrival(make_frm(VcId(1), 0, 321.0, LINK, 0.0), 0), 0.0, &mut out).unwrap();
    sw.handle(link_arrival(Cell::data(VcId(1), 1, 0.0), 0), 0.0, &mut out).unwrap();
    let e = &sw.ports()[1].erica;
    assert_eq!(e.ccr_table[&VcId(1)], 321.0);
    assert_eq!(e.abr_input_count, 2);
}

#[test]
fn efci_marking_above_threshold() {
    let mut sw = running_with(config(FeedbackScheme::EfciBinary, false), 100);
    let mut pending = Vec::new();
    // An FRM then data cells land at once; the queue exceeds the threshold
    // of 5 while the first 4 of 12 depart.
    let mut out = Vec::new();
    sw.handle(link_arrival(make_frm(VcId(1), 0, 100.0, LINK, 0.0), 0), 0.0, &mut out).unwrap();
    for k in 1..12 {
        sw.handle(link_arrival(Cell::data(VcId(1), k, 0.0), 0), 0.0, &mut out).unwrap();
    }
    pending.extend(scheduled(&out));
    let sent = drain(&mut sw, pending, 1.0);
    assert_eq!(sent.len(), 12);
    let marks: Vec<bool> = sent.iter().map(|(_, _, c)| c.efci).collect();
    // The queue before each departure is 12, 11, ..., 1.
    let expected: Vec<bool> = (0..12).map(|i| 12 - i > 5).collect();
    assert_eq!(marks, expected);
    assert!(sent[0].2.is_frm() && sent[0].2.efci);
}

#[test]
fn relative_rate_bits_from_queue() {
    let mut sw = running(config(FeedbackScheme::RelativeRate, false));
    let brm = || turn_around(make_frm(VcId(1), 0, 100.0, LINK, 0.0), false).unwrap();
    let bits = |sw: &mut Switch| {
        let mut out = Vec::new();
        sw.handle(link_arrival(brm(), 1), 0.0, &mut out).unwrap();
        match &scheduled(&out)[..] {
            [(_, SwitchEvent::EndOfFabricDelay { cell, .. })] => {
                let rm = cell.rm.unwrap();
                (rm.ci, rm.ni)
            }
            s => panic!("{s:?}"),
        }
    };
    assert_eq!(bits(&mut sw), (false, false));
    for k in 0..5 {
        sw.port_mut(1).scheduler.buffers[1].push(Cell::data(VcId(1), k, 0.0)).unwrap();
    }
    assert_eq!(bits(&mut sw), (false, true));
    for k in 5..9 {
        sw.port_mut(1).scheduler.buffers[1].push(Cell::data(VcId(1), k, 0.0)).unwrap();
    }
    assert_eq!(bits(&mut sw), (true, true));
}

#[test]
fn back_to_back_sends_and_fifo_per_vc() {
    let mut sw = running(config(FeedbackScheme::ExplicitRate, false));
    let mut out = Vec::new();
    for k in 0..8 {
        sw.handle(link_arrival(Cell::data(VcId(1), k, 0.0), 0), 0.0, &mut out).unwrap();
    }
    let sent = drain(&mut sw, scheduled(&out), 1.0);
    let seqs: Vec<u64> = sent.iter().map(|(_, _, c)| c.seq).collect();
    assert_eq!(seqs, (0..8).collect::<Vec<_>>());
    for w in sent.windows(2) {
        assert!((w[1].0 - w[0].0 - 1.0 / LINK).abs() < 1e-12);
    }
    assert_eq!(sent[0].0, FABRIC);
}

#[test]
fn cbr_preempts_abr() {
    let mut sw = running(config(FeedbackScheme::ExplicitRate, false));
    for k in 0..5 {
        sw.port_mut(1).scheduler.buffers[1].push(Cell::data(VcId(1), k, 0.0)).unwrap();
    }
    let mut out = Vec::new();
    sw.handle(
        SwitchEvent::EndOfFabricDelay {
            cell: Cell::data(VcId(7), 0, 0.0),
            port: 1,
        },
        0.0,
        &mut out,
    )
    .unwrap();
    let sent = drain(&mut sw, scheduled(&out), 1.0);
    assert_eq!(sent[0].2.vc, VcId(7));
    assert_eq!(sent.len(), 6);
}

#[test]
fn capped_priority_yields_half_the_slots() {
    let port = |cap: Rate| PortSpec {
        link_rate: LINK,
        buffers: vec![
            BufferConfig {
                qos_level: 0,
                capacity: 1000,
                min_bw: 0.0,
                max_bw: cap,
            },
            BufferConfig {
                qos_level: 1,
                capacity: 1000,
                min_bw: 0.0,
                max_bw: LINK,
            },
            BufferConfig {
                qos_level: 2,
                capacity: 1000,
                min_bw: 0.0,
                max_bw: LINK,
            },
        ],
    };
    let mut routes = BTreeMap::new();
    routes.insert(
        VcId(7),
        Route {
            forward: 0,
            reverse: None,
            qos_level: 0,
            abr: None,
        },
    );
    routes.insert(
        VcId(8),
        Route {
            forward: 0,
            reverse: None,
            qos_level: 2,
            abr: None,
        },
    );
    let mut sw = Switch::new(config(FeedbackScheme::ExplicitRate, false), vec![port(LINK / 2.0)], routes);
    sw.begin_sim().unwrap();
    sw.notify_complete(0.0, &mut Vec::new()).unwrap();
    let mut out = Vec::new();
    for k in 0..400 {
        for vc in [7, 8] {
            sw.handle(
                SwitchEvent::EndOfFabricDelay {
                    cell: Cell::data(VcId(vc), k, 0.0),
                    port: 0,
                },
                0.0,
                &mut out,
            )
            .unwrap();
        }
    }
    let sent = drain(&mut sw, scheduled(&out), 0.2 - 1e-9);
    let high = sent.iter().filter(|(_, _, c)| c.vc == VcId(7)).count();
    let low = sent.iter().filter(|(_, _, c)| c.vc == VcId(8)).count();
    assert_eq!(high + low, 200);
    assert!((99..=101).contains(&high), "{high} / {low}");
}

#[test]
fn vsvd_turns_frm_around_and_regenerates() {
    let mut sw = running(config(FeedbackScheme::ExplicitRate, true));
    let mut out = Vec::new();
    let a = sw
        .handle(link_arrival(make_frm(VcId(1), 0, 500.0, LINK, 0.0), 0), 0.0, &mut out)
        .unwrap();
    assert_eq!(a, Action::DestinationThenSourceRules);
    let icr = AbrParams::with_pcr(LINK).icr;
    match &scheduled(&out)[..] {
        [(_, SwitchEvent::EndOfFabricDelay { cell, port: 0 })] => {
            assert!(cell.is_brm());
            assert_eq!(cell.rm.unwrap().er, icr);
        }
        s => panic!("{s:?}"),
    }
    // Data goes to the virtual source, which wakes to pace it downstream.
    out.clear();
    sw.handle(link_arrival(Cell::data(VcId(1), 1, 0.0), 0), 0.0, &mut out).unwrap();
    let wake = out
        .iter()
        .find_map(|o| match o {
            SwitchOutput::WakeSource { vc: VcId(1), wake } => Some(*wake),
            _ => None,
        })
        .unwrap();
    out.clear();
    sw.on_source_wake(VcId(1), wake.generation, wake.at, &mut out);
    match &scheduled(&out)[..] {
        [(_, SwitchEvent::EndOfFabricDelay { cell, port: 1 })] => assert_eq!(cell.seq, 1),
        s => panic!("{s:?}"),
    }
    // A BRM from downstream terminates at the virtual source.
    out.clear();
    let brm = turn_around(make_frm(VcId(1), 5, icr, 300.0, 0.0), false).unwrap();
    sw.handle(link_arrival(brm, 1), 0.01, &mut out).unwrap();
    assert!(out.iter().any(|o| matches!(o, SwitchOutput::Delivered { .. })));
    assert_eq!(sw.virtual_source(VcId(1)).unwrap().acr, icr + LINK / 16.0);
    assert!(scheduled(&out).is_empty());
}

#[test]
fn held_cells_count_buffers_and_backlogs() {
    let mut sw = switch_with(config(FeedbackScheme::ExplicitRate, false), 10);
    sw.begin_sim().unwrap();
    let mut out = Vec::new();
    sw.handle(link_arrival(Cell::data(VcId(1), 0, 0.0), 0), 0.0, &mut out).unwrap();
    assert_eq!(sw.held_cells(), 1);
    sw.notify_complete(0.0, &mut out).unwrap();
    assert_eq!(sw.held_cells(), 0);
    sw.port_mut(1).scheduler.buffers[1].push(Cell::data(VcId(1), 1, 0.0)).unwrap();
    assert_eq!(sw.held_cells(), 1);
}

#[test]
fn interval_sample_reports_utilization() {
    let mut sw = running_with(config(FeedbackScheme::ExplicitRate, false), 100);
    let mut out = Vec::new();
    for k in 0..50 {
        sw.handle(link_arrival(Cell::data(VcId(1), k, 0.0), 0), 0.0, &mut out).unwrap();
    }
    drain(&mut sw, scheduled(&out), 0.1);
    let s = sw.on_interval_end(1, 0.1);
    assert_eq!(s.cells_sent, 50);
    assert!((s.utilization - 0.5).abs() < 1e-12);
    assert_eq!(s.erica.abr_input_rate, 500.0);
    assert_eq!(s.erica.active_vcs, 1);
}
