//! ERICA explicit-rate allocation for one switch output port.
//!
//! Each averaging interval the port measures its ABR input rate and the
//! number of active VCs, then derives the load factor `z` and the fair
//! share. Backward RM cells crossing the port (for VCs whose forward path
//! uses it) get their ER field reduced to the port's allocation.

use alloc::collections::{BTreeMap, BTreeSet};

use crate::model::{Rate, Time, VcId};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EricaConfig {
    /// Fraction of ABR capacity targeted for use.
    pub target_fraction: f64,
    /// Overload tolerance; `z > 1 + delta` selects the overload branch.
    pub delta: f64,
    /// Averaging interval measured in cell slots of the output link.
    pub averaging_cells: u32,
}

impl Default for EricaConfig {
    fn default() -> Self {
        EricaConfig {
            target_fraction: 0.9,
            delta: 0.1,
            averaging_cells: 100,
        }
    }
}

/// One record per averaging interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EricaTelemetry {
    pub time: Time,
    pub z: f64,
    pub active_vcs: u32,
    pub fair_share: Rate,
    pub target_abr_capacity: Rate,
    pub abr_input_rate: Rate,
}

#[derive(Clone, Debug)]
pub struct EricaPortState {
    pub target_fraction: f64,
    pub averaging_interval: Time,
    pub delta: f64,
    pub target_abr_capacity: Rate,
    pub z: f64,
    pub fair_share: Rate,
    pub max_alloc_previous: Rate,
    pub max_alloc_current: Rate,
    pub ccr_table: BTreeMap<VcId, Rate>,
    /// ER computed for each VC that already received feedback this interval.
    pub fed_back_this_interval: BTreeMap<VcId, Rate>,
    pub abr_input_count: u64,
    pub active_vcs: BTreeSet<VcId>,
    intervals: u64,
}

impl EricaPortState {
    pub fn new(config: &EricaConfig, averaging_interval: Time) -> EricaPortState {
        EricaPortState {
            target_fraction: config.target_fraction,
            averaging_interval,
            delta: config.delta,
            target_abr_capacity: 0.0,
            z: 0.0,
            fair_share: 0.0,
            max_alloc_previous: 0.0,
            max_alloc_current: 0.0,
            ccr_table: BTreeMap::new(),
            fed_back_this_interval: BTreeMap::new(),
            abr_input_count: 0,
            active_vcs: BTreeSet::new(),
            intervals: 0,
        }
    }

    /// Number of completed averaging intervals.
    pub fn intervals(&self) -> u64 {
        self.intervals
    }

    /// Counts an ABR cell arriving for this port. Out-of-rate RM cells make
    /// the VC active but are not part of the input rate.
    pub fn record_abr_cell(&mut self, vc: VcId, in_rate: bool) {
        if in_rate {
            self.abr_input_count += 1;
        }
        self.active_vcs.insert(vc);
    }

    pub fn interval_end(
        &mut self,
        link_capacity: Rate,
        higher_priority_bw: Rate,
        now: Time,
    ) -> EricaTelemetry {
        let abr_capacity = link_capacity - higher_priority_bw;
        let abr_input_rate = self.abr_input_count as f64 / self.averaging_interval;
        let n = self.active_vcs.len() as u32;
        let target = self.target_fraction * abr_capacity;
        if target > 0.0 {
            self.target_abr_capacity = target;
            self.z = abr_input_rate / target;
            // With no active VC a newcomer may take the whole target.
            self.fair_share = if n == 0 { target } else { target / n as f64 };
        } else {
            self.target_abr_capacity = 0.0;
            self.z = f64::INFINITY;
            self.fair_share = 0.0;
        }
        self.max_alloc_previous = self.max_alloc_current;
        self.max_alloc_current = self.fair_share;
        self.abr_input_count = 0;
        self.active_vcs.clear();
        self.fed_back_this_interval.clear();
        self.intervals += 1;
        EricaTelemetry {
            time: now,
            z: self.z,
            active_vcs: n,
            fair_share: self.fair_share,
            target_abr_capacity: self.target_abr_capacity,
            abr_input_rate,
        }
    }

    pub fn on_frm(&mut self, vc: VcId, ccr_in_cell: Rate) {
        self.ccr_table.insert(vc, ccr_in_cell);
        self.active_vcs.insert(vc);
    }

    /// Returns the ER to write into a backward RM cell carrying `er_in_cell`.
    /// Before the first interval has closed the port has no measurement and
    /// passes the cell's ER through.
    pub fn on_brm(&mut self, vc: VcId, er_in_cell: Rate) -> Rate {
        if self.intervals == 0 {
            return er_in_cell;
        }
        if let Some(&granted) = self.fed_back_this_interval.get(&vc) {
            return er_in_cell.min(granted);
        }
        let ccr = self.ccr_table.get(&vc).copied().unwrap_or(0.0);
        let vc_share = if self.z.is_infinite() || ccr == 0.0 {
            0.0
        } else if self.z == 0.0 {
            f64::INFINITY
        } else {
            ccr / self.z
        };
        let mut er = if self.z > 1.0 + self.delta {
            self.fair_share.max(vc_share)
        } else {
            self.max_alloc_previous.max(vc_share)
        };
        self.max_alloc_current = self.max_alloc_current.max(er);
        if er > self.fair_share && ccr < self.fair_share {
            er = self.fair_share;
        }
        let er = er.min(self.target_abr_capacity);
        self.fed_back_this_interval.insert(vc, er);
        er_in_cell.min(er)
    }
}
