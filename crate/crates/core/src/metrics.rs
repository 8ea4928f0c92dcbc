//! Statistics: transfer delay and delay variation, loss ratios, utilization
//! and fairness, plus the [`RunReport`] assembled at the end of a run.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::endsystem::AcrTrigger;
use crate::model::{ClrStream, Rate, Time, VcId};
use crate::switch::buffer::StreamDrops;
use crate::switch::PortSample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("fairness index needs at least one allocation")]
    Empty,
    #[error("allocations must be non-negative, got {0}")]
    Negative(f64),
    #[error("fairness index is undefined when every allocation is zero")]
    AllZero,
}

/// Running CTD accumulator for one VC.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DelayStats {
    count: u64,
    sum: f64,
    min: f64,
    max: f64,
}

impl DelayStats {
    pub fn record_delivery(&mut self, created_at: Time, delivered_at: Time) {
        let ctd = delivered_at - created_at;
        assert!(ctd >= 0.0, "cell delivered {ctd} s before it was created");
        if self.count == 0 {
            self.min = ctd;
            self.max = ctd;
        } else {
            self.min = self.min.min(ctd);
            self.max = self.max.max(ctd);
        }
        self.count += 1;
        self.sum += ctd;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn summary(&self) -> Option<DelaySummary> {
        (self.count > 0).then(|| DelaySummary {
            samples: self.count,
            mean_ctd: self.sum / self.count as f64,
            max_ctd: self.max,
            p2p_cdv: self.max - self.min,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelaySummary {
    pub samples: u64,
    pub mean_ctd: Time,
    pub max_ctd: Time,
    pub p2p_cdv: Time,
}

/// `(sum x)^2 / (n * sum x^2)`.
pub fn fairness_index(allocations: &[Rate]) -> Result<f64, MetricsError> {
    if allocations.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&x) = allocations.iter().find(|&&x| !(x >= 0.0)) {
        return Err(MetricsError::Negative(x));
    }
    let sum: f64 = allocations.iter().sum();
    let sum_sq: f64 = allocations.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok((sum * sum / (allocations.len() as f64 * sum_sq)).min(1.0))
}

/// Sent and lost cells of one VC, split by CLP stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClrCounter {
    pub sent_clp0: u64,
    pub sent_total: u64,
    pub lost: StreamDrops,
}

impl ClrCounter {
    pub fn record_sent(&mut self, clp: bool) {
        self.sent_total += 1;
        if !clp {
            self.sent_clp0 += 1;
        }
    }

    pub fn record_lost(&mut self, clp: bool) {
        self.lost.clp0_plus_1 += 1;
        if !clp {
            self.lost.clp0 += 1;
        }
    }

    /// Loss ratio of the stream; absent when nothing was sent on it.
    pub fn clr(&self, stream: ClrStream) -> Option<f64> {
        let (lost, sent) = match stream {
            ClrStream::Clp0 => (self.lost.clp0, self.sent_clp0),
            ClrStream::Clp0Plus1 => (self.lost.clp0_plus_1, self.sent_total),
        };
        (sent > 0).then(|| lost as f64 / sent as f64)
    }
}

/// Fraction of the link's cell slots used: `cells * 424 / (bits/s * interval)`.
pub fn utilization(cells_sent: u64, link_rate: Rate, interval: Time) -> f64 {
    cells_sent as f64 / (link_rate * interval)
}

/// A piecewise-constant series given by `(time, value)` change points.
#[derive(Clone, Copy, Debug)]
pub struct StepSeries<'a> {
    points: &'a [(Time, f64)],
}

impl<'a> StepSeries<'a> {
    /// `points` must be sorted by time.
    pub fn new(points: &'a [(Time, f64)]) -> StepSeries<'a> {
        StepSeries { points }
    }

    pub fn value_at(&self, t: Time) -> Option<f64> {
        let idx = self.points.partition_point(|&(pt, _)| pt <= t);
        idx.checked_sub(1).map(|i| self.points[i].1)
    }

    /// Samples that apply somewhere in `[from, to]`.
    fn segments(&self, from: Time, to: Time) -> impl Iterator<Item = (Time, Time, f64)> + '_ {
        let n = self.points.len();
        (0..n).filter_map(move |i| {
            let (start, v) = self.points[i];
            let end = if i + 1 < n { self.points[i + 1].0 } else { f64::INFINITY };
            let a = start.max(from);
            let b = end.min(to);
            (b > a || (a == b && start <= to && end > to && a == to)).then_some((a, b, v))
        })
    }

    pub fn time_weighted_mean(&self, from: Time, to: Time) -> Option<f64> {
        let (mut area, mut span) = (0.0, 0.0);
        for (a, b, v) in self.segments(from, to) {
            area += (b - a) * v;
            span += b - a;
        }
        (span > 0.0).then(|| area / span)
    }

    pub fn range(&self, from: Time, to: Time) -> Option<(f64, f64)> {
        self.segments(from, to).fold(None, |acc, (_, _, v)| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcrRecord {
    pub time: Time,
    pub node: usize,
    pub vc: VcId,
    pub acr: Rate,
    pub trigger: AcrTrigger,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortRecord {
    pub node: usize,
    pub sample: PortSample,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OorRecord {
    pub time: Time,
    pub node: usize,
    pub vc: VcId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VcSummary {
    pub vc: VcId,
    pub source: String,
    pub active_from: Time,
    pub mean_acr: Option<Rate>,
    pub min_acr: Option<Rate>,
    pub max_acr: Option<Rate>,
    /// Data cells delivered per second over the steady-state window.
    pub throughput: Rate,
    pub delivered: u64,
    pub delay: Option<DelaySummary>,
    pub clr_clp0: Option<f64>,
    pub clr_clp0_plus_1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortSummary {
    pub node: usize,
    pub port: usize,
    pub peer: String,
    pub link_rate: Rate,
    pub utilization: f64,
    pub drops: StreamDrops,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Conservation {
    pub created: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl Conservation {
    pub fn balanced(&self) -> bool {
        self.created == self.delivered + self.dropped + self.in_flight
    }
}

/// Violation counters kept by the engine while it runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InvariantChecks {
    pub acr_out_of_bounds: u64,
    pub acr_updates: u64,
    pub er_increases: u64,
    pub er_checks: u64,
    pub spacing_violations: u64,
    pub reorderings: u64,
    pub unmatched_brms: u64,
    pub causality_violations: u64,
}

impl InvariantChecks {
    pub fn all_clear(&self) -> bool {
        self.acr_out_of_bounds == 0
            && self.er_increases == 0
            && self.spacing_violations == 0
            && self.reorderings == 0
            && self.unmatched_brms == 0
            && self.causality_violations == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub duration: Time,
    /// Start of the steady-state window.
    pub steady_start: Time,
    pub node_names: Vec<String>,
    pub acr: Vec<AcrRecord>,
    pub ports: Vec<PortRecord>,
    pub vcs: Vec<VcSummary>,
    pub port_summaries: Vec<PortSummary>,
    /// Over steady-state mean ACRs of the ABR VCs.
    pub fairness_index: Option<f64>,
    pub conservation: Conservation,
    pub checks: InvariantChecks,
    pub oor_emissions: Vec<OorRecord>,
    pub events_dispatched: u64,
}

impl RunReport {
    pub fn vc(&self, vc: VcId) -> Option<&VcSummary> {
        self.vcs.iter().find(|s| s.vc == vc)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    /// ACR change points of `vc` at the node where it originates.
    pub fn acr_points(&self, node: usize, vc: VcId) -> Vec<(Time, f64)> {
        self.acr
            .iter()
            .filter(|r| r.node == node && r.vc == vc)
            .map(|r| (r.time, r.acr))
            .collect()
    }

    pub fn port_summary(&self, node: &str, peer: &str) -> Option<&PortSummary> {
        let idx = self.node_index(node)?;
        self.port_summaries
            .iter()
            .find(|p| p.node == idx && p.peer == peer)
    }

    /// Largest count of out-of-rate RM cells one VC emitted from one node in
    /// any window `[t, t + 1 s)`.
    pub fn max_oor_per_second(&self) -> usize {
        let mut keys: Vec<(usize, VcId)> = self.oor_emissions.iter().map(|r| (r.node, r.vc)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(node, vc)| {
                let times: Vec<Time> = self
                    .oor_emissions
                    .iter()
                    .filter(|r| r.node == node && r.vc == vc)
                    .map(|r| r.time)
                    .collect();
                let mut best = 0;
                let mut lo = 0;
                for hi in 0..times.len() {
                    while times[hi] >= times[lo] + 1.0 {
                        lo += 1;
                    }
                    best = best.max(hi - lo + 1);
                }
                best
            })
            .max()
            .unwrap_or(0)
    }
}
