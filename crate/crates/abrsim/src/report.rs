//! Run output: `report.toml` with the summary, `scenario.toml` with the
//! resolved input and one CSV per time series.
//!
//! CSV headers:
//!
//! | file | columns |
//! |---|---|
//! | `acr.csv` | time, node, vc, acr, trigger |
//! | `queue.csv` | time, node, port, peer, qos_level, queue_len |
//! | `utilization.csv` | time, node, port, peer, cells_sent, utilization, drops_clp0, drops_clp0_plus_1 |
//! | `erica.csv` | time, node, port, peer, z, active_vcs, fair_share, target_abr_capacity, abr_input_rate |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use abrsim_core::metrics::{PortSummary, RunReport, VcSummary};
use abrsim_core::{Scenario, Time};
use serde::Serialize;

use crate::error::CliError;
use crate::scenario_file::to_toml;

pub const FILES: [&str; 6] = [
    "report.toml",
    "scenario.toml",
    "acr.csv",
    "queue.csv",
    "utilization.csv",
    "erica.csv",
];

#[derive(Serialize)]
struct Summary<'a> {
    run: RunMeta<'a>,
    conservation: ConservationRow,
    checks: ChecksRow,
    vc: Vec<VcRow>,
    port: Vec<PortRow<'a>>,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    scenario: &'a str,
    seed: u64,
    duration: Time,
    steady_start: Time,
    events_dispatched: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fairness_index: Option<f64>,
    max_oor_per_second: usize,
}

#[derive(Serialize)]
struct ConservationRow {
    created: u64,
    delivered: u64,
    dropped: u64,
    in_flight: u64,
    balanced: bool,
}

#[derive(Serialize)]
struct ChecksRow {
    all_clear: bool,
    acr_updates: u64,
    acr_out_of_bounds: u64,
    er_checks: u64,
    er_increases: u64,
    spacing_violations: u64,
    reorderings: u64,
    unmatched_brms: u64,
    causality_violations: u64,
}

#[derive(Serialize)]
struct VcRow {
    vc: u32,
    source: String,
    active_from: Time,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_acr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_acr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_acr: Option<f64>,
    throughput: f64,
    delivered: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_ctd: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_ctd: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p2p_cdv: Option<Time>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clr_clp0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clr_clp0_plus_1: Option<f64>,
}

impl From<&VcSummary> for VcRow {
    fn from(v: &VcSummary) -> Self {
        VcRow {
            vc: v.vc.0,
            source: v.source.clone(),
            active_from: v.active_from,
            mean_acr: v.mean_acr,
            min_acr: v.min_acr,
            max_acr: v.max_acr,
            throughput: v.throughput,
            delivered: v.delivered,
            mean_ctd: v.delay.map(|d| d.mean_ctd),
            max_ctd: v.delay.map(|d| d.max_ctd),
            p2p_cdv: v.delay.map(|d| d.p2p_cdv),
            clr_clp0: v.clr_clp0,
            clr_clp0_plus_1: v.clr_clp0_plus_1,
        }
    }
}

#[derive(Serialize)]
struct PortRow<'a> {
    node: &'a str,
    port: usize,
    peer: &'a str,
    link_rate: f64,
    utilization: f64,
    drops_clp0: u64,
    drops_clp0_plus_1: u64,
}

impl<'a> PortRow<'a> {
    fn new(p: &'a PortSummary, names: &'a [String]) -> Self {
        PortRow {
            node: &names[p.node],
            port: p.port,
            peer: &p.peer,
            link_rate: p.link_rate,
            utilization: p.utilization,
            drops_clp0: p.drops.clp0,
            drops_clp0_plus_1: p.drops.clp0_plus_1,
        }
    }
}

/// A CSV row type. The header is written even when the series is empty.
trait Series: Serialize {
    const HEADER: &'static [&'static str];
}

impl Series for AcrRow<'_> {
    const HEADER: &'static [&'static str] = &["time", "node", "vc", "acr", "trigger"];
}

impl Series for QueueRow<'_> {
    const HEADER: &'static [&'static str] = &["time", "node", "port", "peer", "qos_level", "queue_len"];
}

impl Series for UtilizationRow<'_> {
    const HEADER: &'static [&'static str] = &[
        "time",
        "node",
        "port",
        "peer",
        "cells_sent",
        "utilization",
        "drops_clp0",
        "drops_clp0_plus_1",
    ];
}

impl Series for EricaRow<'_> {
    const HEADER: &'static [&'static str] = &[
        "time",
        "node",
        "port",
        "peer",
        "z",
        "active_vcs",
        "fair_share",
        "target_abr_capacity",
        "abr_input_rate",
    ];
}

#[derive(Serialize)]
struct AcrRow<'a> {
    time: Time,
    node: &'a str,
    vc: u32,
    acr: f64,
    trigger: &'static str,
}

#[derive(Serialize)]
struct QueueRow<'a> {
    time: Time,
    node: &'a str,
    port: usize,
    peer: &'a str,
    qos_level: u8,
    queue_len: usize,
}

#[derive(Serialize)]
struct UtilizationRow<'a> {
    time: Time,
    node: &'a str,
    port: usize,
    peer: &'a str,
    cells_sent: u64,
    utilization: f64,
    drops_clp0: u64,
    drops_clp0_plus_1: u64,
}

#[derive(Serialize)]
struct EricaRow<'a> {
    time: Time,
    node: &'a str,
    port: usize,
    peer: &'a str,
    z: f64,
    active_vcs: u32,
    fair_share: f64,
    target_abr_capacity: f64,
    abr_input_rate: f64,
}

/// Serialized run output, file name to contents.
pub fn render(report: &RunReport, scenario: &Scenario) -> BTreeMap<&'static str, Vec<u8>> {
    let names = &report.node_names;
    let peers: BTreeMap<(usize, usize), &str> = report
        .port_summaries
        .iter()
        .map(|p| ((p.node, p.port), p.peer.as_str()))
        .collect();
    let peer = |node: usize, port: usize| peers.get(&(node, port)).copied().unwrap_or("");

    let summary = Summary {
        run: RunMeta {
            scenario: &report.scenario,
            seed: report.seed,
            duration: report.duration,
            steady_start: report.steady_start,
            events_dispatched: report.events_dispatched,
            fairness_index: report.fairness_index,
            max_oor_per_second: report.max_oor_per_second(),
        },
        conservation: ConservationRow {
            created: report.conservation.created,
            delivered: report.conservation.delivered,
            dropped: report.conservation.dropped,
            in_flight: report.conservation.in_flight,
            balanced: report.conservation.balanced(),
        },
        checks: {
            let c = &report.checks;
            ChecksRow {
                all_clear: c.all_clear(),
                acr_updates: c.acr_updates,
                acr_out_of_bounds: c.acr_out_of_bounds,
                er_checks: c.er_checks,
                er_increases: c.er_increases,
                spacing_violations: c.spacing_violations,
                reorderings: c.reorderings,
                unmatched_brms: c.unmatched_brms,
                causality_violations: c.causality_violations,
            }
        },
        vc: report.vcs.iter().map(VcRow::from).collect(),
        port: report.port_summaries.iter().map(|p| PortRow::new(p, names)).collect(),
    };

    let mut files = BTreeMap::new();
    files.insert(
        "report.toml",
        toml::to_string(&summary).expect("summary serializes").into_bytes(),
    );
    files.insert("scenario.toml", to_toml(scenario).into_bytes());
    files.insert(
        "acr.csv",
        csv_bytes(report.acr.iter().map(|r| AcrRow {
            time: r.time,
            node: &names[r.node],
            vc: r.vc.0,
            acr: r.acr,
            trigger: r.trigger.label(),
        })),
    );
    files.insert(
        "queue.csv",
        csv_bytes(report.ports.iter().flat_map(|r| {
            let s = &r.sample;
            s.queues.iter().map(move |&(qos_level, queue_len)| QueueRow {
                time: s.time,
                node: &names[r.node],
                port: s.port,
                peer: peer(r.node, s.port),
                qos_level,
                queue_len,
            })
        })),
    );
    files.insert(
        "utilization.csv",
        csv_bytes(report.ports.iter().map(|r| {
            let s = &r.sample;
            UtilizationRow {
                time: s.time,
                node: &names[r.node],
                port: s.port,
                peer: peer(r.node, s.port),
                cells_sent: s.cells_sent,
                utilization: s.utilization,
                drops_clp0: s.drops.clp0,
                drops_clp0_plus_1: s.drops.clp0_plus_1,
            }
        })),
    );
    files.insert(
        "erica.csv",
        csv_bytes(report.ports.iter().map(|r| {
            let (s, e) = (&r.sample, &r.sample.erica);
            EricaRow {
                time: s.time,
                node: &names[r.node],
                port: s.port,
                peer: peer(r.node, s.port),
                z: e.z,
                active_vcs: e.active_vcs,
                fair_share: e.fair_share,
                target_abr_capacity: e.target_abr_capacity,
                abr_input_rate: e.abr_input_rate,
            }
        })),
    );
    files
}

fn csv_bytes<R: Series>(rows: impl Iterator<Item = R>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(R::HEADER).expect("in-memory CSV write");
    for row in rows {
        w.serialize(row).expect("in-memory CSV write");
    }
    w.into_inner().expect("in-memory CSV flush")
}

/// Writes every output file into `dir`, each through a temporary file and
/// a rename so a reader never sees a partial file.
pub fn write_report(dir: &Path, report: &RunReport, scenario: &Scenario) -> Result<(), CliError> {
    let write_err = |path: PathBuf| move |source| CliError::Write { path, source };
    fs::create_dir_all(dir).map_err(write_err(dir.to_owned()))?;
    for (name, bytes) in render(report, scenario) {
        let tmp = dir.join(format!(".{name}.tmp"));
        let dest = dir.join(name);
        fs::write(&tmp, bytes).map_err(write_err(tmp.clone()))?;
        fs::rename(&tmp, &dest).map_err(write_err(dest.clone()))?;
    }
    Ok(())
}
