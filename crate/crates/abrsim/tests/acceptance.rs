//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use abrsim::report::render;
use abrsim_core::engine::background::BackgroundKind;
use abrsim_core::engine::scenario::{BackgroundSpec, Demand, VcOverride, TEMPLATES};
use abrsim_core::erica::{EricaConfig, EricaPortState};
use abrsim_core::gcra::{GcraState, Verdict};
use abrsim_core::metrics::{fairness_index, StepSeries};
use abrsim_core::model::{AbrParams, BufferConfig};
use abrsim_core::switch::fsm::{Action, Condition, FsmState, Row, EVENT_RESPONSE_TABLE};
use abrsim_core::switch::{
    FeedbackScheme, Ingress, PortSpec, Route, Switch, SwitchConfig, SwitchEvent,
};
use abrsim_core::{run, Cell, Rate, RunReport, Scenario, VcId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = fn(&mut Runs) -> Outcome;

/// Scenarios run by the closed-loop criteria, kept for the invariant and
/// determinism checks.
#[derive(Default)]
struct Runs {
    done: Vec<(String, Scenario, RunReport)>,
}

impl Runs {
    fn run(&mut self, label: &str, s: Scenario) -> Result<RunReport, String> {
        let report = run(&s).map_err(|e| format!("{label}: {e}"))?;
        self.done.push((label.to_owned(), s, report.clone()));
        Ok(report)
    }
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn erica_port(link: Rate, interval: f64, cells: u64, vcs: &[(u32, Rate)]) -> EricaPortState {
    let mut p = EricaPortState::new(&EricaConfig::default(), interval);
    // Two identical intervals so MaxAllocPrevious holds the first fair share.
    for _ in 0..2 {
        for &(vc, ccr) in vcs {
            p.on_frm(VcId(vc), ccr);
        }
        for _ in 0..cells {
            p.record_abr_cell(VcId(vcs[0].0), true);
        }
        p.interval_end(link, 0.0, 0.0);
    }
    p
}

fn erica_vectors(_: &mut Runs) -> Outcome {
    // Link 150 at fraction 0.9 gives target 135; three VCs give FS 45.
    let mut over = erica_port(150.0, 2.0, 405, &[(1, 90.0), (2, 1.0), (3, 1.0)]);
    let mut under = erica_port(150.0, 2.0, 243, &[(1, 9.0), (2, 1.0), (3, 1.0)]);
    let mut single = erica_port(1000.0, 0.1, 90, &[(1, 900.0)]);
    let got = [
        (over.z, over.on_brm(VcId(1), 149.0), 60.0),
        (under.z, under.on_brm(VcId(1), 149.0), 45.0),
        (single.z, single.on_brm(VcId(1), 1000.0), 900.0),
    ];
    let detail = format!(
        "overload z={} er={}, underload z={} er={}, single-VC z={} er={}",
        got[0].0, got[0].1, got[1].0, got[1].1, got[2].0, got[2].1
    );
    ensure(got.iter().all(|&(_, er, want)| er == want), detail)
}

fn leaky_bucket(increment: i64, limit: i64, arrivals: &[i64]) -> Vec<Verdict> {
    let (mut level, mut last) = (0i64, 0i64);
    arrivals
        .iter()
        .map(|&t| {
            let drained = (level - (t - last)).max(0);
            if drained > limit {
                Verdict::NonConforming
            } else {
                level = drained + increment;
                last = t;
                Verdict::Conforming
            }
        })
        .collect()
}

fn gcra_oracle(_: &mut Runs) -> Outcome {
    // Times on a 1/16 grid are exact in binary floating point.
    const TICKS: i64 = 16;
    const SEQUENCES: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cells = 0usize;
    for case in 0..SEQUENCES {
        let inc = rng.random_range(TICKS..=100 * TICKS);
        let limit = rng.random_range(0..=5 * inc);
        let len = rng.random_range(1..=1000);
        let mut t = 0i64;
        let arrivals: Vec<i64> = (0..len)
            .map(|_| {
                t += rng.random_range(0..=2 * inc);
                t
            })
            .collect();
        let mut g = GcraState::with_increment(inc as f64 / TICKS as f64, limit as f64 / TICKS as f64)
            .map_err(|e| e.to_string())?;
        let got: Vec<Verdict> = arrivals
            .iter()
            .map(|&a| g.check(a as f64 / TICKS as f64).expect("arrivals are ordered"))
            .collect();
        if got != leaky_bucket(inc, limit, &arrivals) {
            return Err(format!("sequence {case} (T={inc}/16, tau={limit}/16) diverges"));
        }
        cells += len;
    }
    Ok(format!("{SEQUENCES} sequences, {cells} cells, verdicts identical"))
}

fn n_source_convergence(runs: &mut Runs) -> Outcome {
    let s = Scenario::n_source(5);
    let intervals = s.duration / 0.1;
    let r = runs.run("n_source", s)?;
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &r.vcs {
        let node = r.node_index(&v.source).ok_or("source node")?;
        let points = r.acr_points(node, v.vc);
        let (lo, hi) = StepSeries::new(&points)
            .range(r.steady_start, r.duration)
            .ok_or("no ACR in steady window")?;
        worst = (worst.0.min(lo), worst.1.max(hi));
    }
    let j = r.fairness_index.ok_or("no fairness index")?;
    let u = r.port_summary("sw1", "sw2").ok_or("bottleneck port")?.utilization;
    ensure(
        intervals >= 200.0 && worst.0 >= 162.0 && worst.1 <= 198.0 && j >= 0.99 && (0.85..=0.95).contains(&u),
        format!(
            "{intervals} intervals, steady ACR range [{:.3}, {:.3}], fairness {j:.5}, utilization {u:.4}",
            worst.0, worst.1
        ),
    )
}

fn max_min(runs: &mut Runs) -> Outcome {
    let mut s = Scenario::n_source(2);
    s.vc.push(VcOverride {
        source: 1,
        demand: Some(Demand::Rate { rate: 50.0 }),
        ..VcOverride::default()
    });
    let r = runs.run("max_min", s)?;
    let (a, b) = (r.vc(VcId(1)).ok_or("vc 1")?, r.vc(VcId(2)).ok_or("vc 2")?);
    let b_acr = b.mean_acr.ok_or("vc 2 has no ACR")?;
    ensure(
        within(a.throughput, 50.0, 0.1) && b_acr >= 700.0,
        format!(
            "A throughput {:.2}, B allocation {b_acr:.2} (throughput {:.2})",
            a.throughput, b.throughput
        ),
    )
}

fn transient(runs: &mut Runs) -> Outcome {
    let mut s = Scenario::n_source(5);
    let start = s.duration / 2.0;
    s.vc.push(VcOverride {
        source: 5,
        start: Some(start),
        ..VcOverride::default()
    });
    let interval = 0.1;
    let r = runs.run("transient", s)?;
    let series: Vec<Vec<(f64, f64)>> = r
        .vcs
        .iter()
        .map(|v| r.acr_points(r.node_index(&v.source).expect("source node"), v.vc))
        .collect();
    // Index over the VCs that have an ACR at `t`, and how many those are.
    let fairness_at = |t: f64| -> (usize, f64) {
        let acrs: Vec<f64> = series.iter().filter_map(|p| StepSeries::new(p).value_at(t)).collect();
        (acrs.len(), fairness_index(&acrs).unwrap_or(0.0))
    };
    let samples = ((r.duration - start) / interval).floor() as usize;
    let values: Vec<f64> = (1..=samples)
        .map(|k| match fairness_at(start + k as f64 * interval) {
            (5, j) => j,
            _ => 0.0,
        })
        .collect();
    // First interval after which the index stays at or above 0.99.
    let settled = values
        .iter()
        .rposition(|&j| j < 0.99)
        .map_or(1, |i| i + 2);
    let (active, before) = fairness_at(start - interval);
    ensure(
        settled <= 50 && settled <= samples,
        format!(
            "fairness {before:.4} over {active} VCs before activation, {:.4} one interval after, >= 0.99 from interval {settled} on",
            values.first().copied().unwrap_or(0.0)
        ),
    )
}

fn cbr_displacement(runs: &mut Runs) -> Outcome {
    let mut s = Scenario::n_source(2);
    s.background.push(BackgroundSpec {
        kind: BackgroundKind::Cbr,
        pcr: 400.0,
        ..BackgroundSpec::default()
    });
    let r = runs.run("cbr_background", s)?;
    let acrs: Vec<f64> = [1, 2]
        .iter()
        .map(|&v| r.vc(VcId(v)).and_then(|s| s.mean_acr).ok_or("ABR vc"))
        .collect::<Result<_, _>>()?;
    let total: f64 = acrs.iter().sum();
    let j = fairness_index(&acrs).map_err(|e| e.to_string())?;
    ensure(
        within(total, 540.0, 0.1) && j >= 0.99,
        format!("ABR total {total:.2} ({:.2} + {:.2}), fairness {j:.5}", acrs[0], acrs[1]),
    )
}

fn vsvd_equivalence(runs: &mut Runs) -> Outcome {
    let hop = Scenario::template("vsvd_chain").ok_or("template")?;
    let mut e2e = hop.clone();
    e2e.name = "vsvd_chain_end_to_end".into();
    e2e.switch.vsvd = false;
    let a = runs.run("vsvd_chain", hop)?;
    let b = runs.run("vsvd_chain_end_to_end", e2e)?;
    let mut detail = Vec::new();
    let mut ok = !a.vcs.is_empty();
    for (x, y) in a.vcs.iter().zip(&b.vcs) {
        let (ax, by) = (x.mean_acr.ok_or("vsvd ACR")?, y.mean_acr.ok_or("e2e ACR")?);
        ok &= within(ax, by, 0.15);
        detail.push(format!("vc {}: {ax:.2} vs {by:.2}", x.vc));
    }
    ensure(ok, format!("hop-by-hop vs end-to-end {}", detail.join(", ")))
}

fn table_switch(vsvd: bool) -> Switch {
    let buffers: Vec<BufferConfig> = (0..3)
        .map(|qos_level| BufferConfig {
            qos_level,
            capacity: 10,
            min_bw: 0.0,
            max_bw: 1000.0,
        })
        .collect();
    let port = PortSpec {
        link_rate: 1000.0,
        buffers,
    };
    let route = |forward, reverse| Route {
        forward,
        reverse,
        qos_level: 1,
        abr: Some(AbrParams::with_pcr(1000.0)),
    };
    let mut routes = BTreeMap::new();
    routes.insert(VcId(1), route(1, Some(0)));
    routes.insert(VcId(2), route(1, None));
    let config = SwitchConfig {
        feedback: FeedbackScheme::ExplicitRate,
        vsvd,
        fabric_delay: 0.004,
        abr_level: 1,
        efci_threshold: 5,
        ci_threshold: 8,
        ni_threshold: 4,
        efci_to_ci: true,
        erica: EricaConfig::default(),
    };
    Switch::new(config, vec![port.clone(), port], routes)
}

fn link_cell(seq: u64) -> SwitchEvent {
    SwitchEvent::CellArrival {
        cell: Cell::data(VcId(1), seq, 0.0),
        ingress: Ingress::Link(0),
    }
}

/// Drives a switch into the row's state and condition through its public
/// interface and reports the action taken and the state that follows.
fn exercise(row: &Row) -> Result<(Action, FsmState), String> {
    use Condition as C;
    use FsmState as S;
    let e = |err: abrsim_core::switch::SwitchError| err.to_string();
    let mut sw = table_switch(row.condition == C::LinkTrafficVsvdOn);
    let mut out = Vec::new();
    let startup = sw.begin_sim().map_err(e)?;
    match row.state {
        S::Unstarted => return Ok(startup[0]),
        S::Init => return Ok(startup[1]),
        S::Config if row.condition == C::NeighborNotificationIncomplete => {
            let a = sw.handle(link_cell(0), 0.0, &mut out).map_err(e)?;
            return Ok((a, sw.state()));
        }
        S::Config => {
            sw.handle(link_cell(0), 0.0, &mut out).map_err(e)?;
            let a = sw.notify_complete(0.0, &mut out).map_err(e)?;
            return Ok((a, sw.state()));
        }
        S::Wait => {
            sw.notify_complete(0.0, &mut out).map_err(e)?;
        }
    }
    let abr = sw.ports()[1].scheduler.index_of(1).ok_or("ABR buffer")?;
    let event = match row.condition {
        C::ApplicationTraffic => SwitchEvent::CellArrival {
            cell: Cell::data(VcId(2), 0, 0.0),
            ingress: Ingress::Application,
        },
        C::LinkTrafficVsvdOn | C::LinkTrafficVsvdOff => link_cell(0),
        C::CellCanBeBuffered | C::CellCannotBeBuffered => {
            if row.condition == C::CellCannotBeBuffered {
                for seq in 0..10 {
                    sw.port_mut(1).scheduler.buffers[abr]
                        .push(Cell::data(VcId(1), seq, 0.0))
                        .map_err(|_| "buffer smaller than expected")?;
                }
            }
            SwitchEvent::EndOfFabricDelay {
                cell: Cell::data(VcId(1), 99, 0.0),
                port: 1,
            }
        }
        C::MoreCellsWaiting | C::NoMoreCellsWaiting => {
            if row.condition == C::MoreCellsWaiting {
                sw.port_mut(1).scheduler.buffers[abr]
                    .push(Cell::data(VcId(1), 0, 0.0))
                    .map_err(|_| "buffer full")?;
            }
            SwitchEvent::TimeToSend { port: 1 }
        }
        other => return Err(format!("no driver for condition {other:?}")),
    };
    let a = sw.handle(event, 0.0, &mut out).map_err(e)?;
    Ok((a, sw.state()))
}

fn invariant_suite(runs: &mut Runs) -> Outcome {
    for name in TEMPLATES {
        if !runs.done.iter().any(|(l, _, _)| l == name) {
            runs.run(name, Scenario::template(name).expect("template"))?;
        }
    }
    let mut problems = Vec::new();
    let (mut acr_updates, mut er_checks) = (0, 0);
    for (label, _, r) in &runs.done {
        if !r.checks.all_clear() {
            problems.push(format!("{label}: {:?}", r.checks));
        }
        if !r.conservation.balanced() {
            problems.push(format!("{label}: {:?}", r.conservation));
        }
        if r.max_oor_per_second() > 10 {
            problems.push(format!("{label}: {} out-of-rate RM cells in one second", r.max_oor_per_second()));
        }
        acr_updates += r.checks.acr_updates;
        er_checks += r.checks.er_checks;
    }
    let mut rows_green = 0;
    for row in &EVENT_RESPONSE_TABLE {
        match exercise(row) {
            Ok(got) if got == (row.action, row.next) => rows_green += 1,
            Ok(got) => problems.push(format!("table row {row:?} gave {got:?}")),
            Err(err) => problems.push(format!("table row {row:?}: {err}")),
        }
    }
    if acr_updates == 0 || er_checks == 0 {
        problems.push("monitors saw no ACR updates or ER rewrites".into());
    }
    let detail = format!(
        "{} runs, {acr_updates} ACR updates, {er_checks} ER rewrites, event-response table {rows_green}/{} rows",
        runs.done.len(),
        EVENT_RESPONSE_TABLE.len()
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

fn determinism(runs: &mut Runs) -> Outcome {
    let mut files = 0;
    for (label, s, first) in &runs.done {
        let again = run(s).map_err(|e| format!("{label}: {e}"))?;
        let (a, b) = (render(first, s), render(&again, s));
        for (name, bytes) in &a {
            if !name.ends_with(".csv") {
                continue;
            }
            if b.get(name) != Some(bytes) {
                return Err(format!("{label}: {name} differs between runs"));
            }
            files += 1;
        }
    }
    Ok(format!("{} scenarios re-run, {files} CSV files byte-identical", runs.done.len()))
}

fn main() -> ExitCode {
    let mut runs = Runs::default();
    let criteria: [(&str, Check); 9] = [
        ("ERICA unit vectors", erica_vectors),
        ("GCRA oracle equivalence", gcra_oracle),
        ("N-source convergence", n_source_convergence),
        ("max-min behaviour", max_min),
        ("transient re-convergence", transient),
        ("invariant suite", invariant_suite),
        ("background displacement", cbr_displacement),
        ("VS/VD equivalence", vsvd_equivalence),
        ("determinism", determinism),
    ];
    // The invariant and determinism checks look at every earlier run.
    let order = [0, 1, 2, 3, 4, 6, 7, 5, 8];
    let mut results = vec![None; criteria.len()];
    for &i in &order {
        let t = Instant::now();
        let outcome = criteria[i].1(&mut runs);
        results[i] = Some((outcome, t.elapsed()));
    }
    let mut failed = 0;
    for (i, (name, _)) in criteria.iter().enumerate() {
        let (outcome, took) = results[i].take().expect("every criterion ran");
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{}] {name} ({:.2?}): {detail}", i + 1, took);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
