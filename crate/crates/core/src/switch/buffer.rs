//! Per-QoS-level output buffers and the bandwidth-aware priority scheduler.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::model::{BufferConfig, Cell, Rate, Time};

// Accrued credit is compared with this slack to absorb rounding.
const CREDIT_EPS: f64 = 1e-9;

/// Cell-loss counts split by stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamDrops {
    pub clp0: u64,
    pub clp0_plus_1: u64,
}

impl StreamDrops {
    pub fn record(&mut self, cell: &Cell) {
        self.clp0_plus_1 += 1;
        if !cell.clp {
            self.clp0 += 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Buffer {
    pub config: BufferConfig,
    queue: VecDeque<Cell>,
    // Credit buckets of depth one cell, refilled at max_bw / min_bw.
    cap_credit: f64,
    min_credit: f64,
    capped: bool,
    pub drops: StreamDrops,
}

impl Buffer {
    pub fn new(config: BufferConfig, link_rate: Rate) -> Buffer {
        Buffer {
            config,
            queue: VecDeque::new(),
            cap_credit: 1.0,
            min_credit: 0.0,
            capped: config.max_bw < link_rate,
            drops: StreamDrops::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.queue.len() >= self.config.capacity as usize
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.queue.iter()
    }

    /// Appends unless full; a full buffer hands the cell back.
    pub fn push(&mut self, cell: Cell) -> Result<(), Cell> {
        if self.is_full() {
            Err(cell)
        } else {
            self.queue.push_back(cell);
            Ok(())
        }
    }

    fn refill(&mut self, elapsed: Time) {
        self.cap_credit = (self.cap_credit + elapsed * self.config.max_bw).min(1.0);
        self.min_credit = (self.min_credit + elapsed * self.config.min_bw).min(1.0);
    }

    fn under_cap(&self) -> bool {
        !self.capped || self.cap_credit >= 1.0 - CREDIT_EPS
    }

    fn guaranteed(&self) -> bool {
        self.config.min_bw > 0.0 && self.min_credit >= 1.0 - CREDIT_EPS
    }

    fn take(&mut self) -> Cell {
        if self.capped {
            self.cap_credit = (self.cap_credit - 1.0).max(0.0);
        }
        if self.min_credit >= 1.0 - CREDIT_EPS {
            self.min_credit = (self.min_credit - 1.0).max(0.0);
        }
        self.queue.pop_front().expect("scheduler picked an empty buffer")
    }

    fn time_until_under_cap(&self) -> Time {
        if self.under_cap() {
            0.0
        } else {
            (1.0 - self.cap_credit) / self.config.max_bw
        }
    }
}

/// Outcome of a scheduling decision.
#[derive(Clone, Debug, PartialEq)]
pub enum Pick {
    Send { level_index: usize, cell: Cell },
    /// Cells are waiting but every non-empty buffer is at its rate cap.
    Blocked { until: Time },
    Empty,
}

/// Strict priority by QoS level. Buffers owed their minimum bandwidth go
/// first, and a buffer at its maximum bandwidth is skipped for the slot.
#[derive(Clone, Debug)]
pub struct Scheduler {
    pub buffers: Vec<Buffer>,
    last_refill: Time,
}

impl Scheduler {
    pub fn new(mut configs: Vec<BufferConfig>, link_rate: Rate) -> Scheduler {
        configs.sort_by_key(|c| c.qos_level);
        Scheduler {
            buffers: configs.into_iter().map(|c| Buffer::new(c, link_rate)).collect(),
            last_refill: 0.0,
        }
    }

    pub fn index_of(&self, qos_level: u8) -> Option<usize> {
        self.buffers.iter().position(|b| b.config.qos_level == qos_level)
    }

    pub fn total_len(&self) -> usize {
        self.buffers.iter().map(Buffer::len).sum()
    }

    pub fn has_waiting(&self) -> bool {
        self.buffers.iter().any(|b| !b.is_empty())
    }

    fn refill(&mut self, now: Time) {
        let elapsed = (now - self.last_refill).max(0.0);
        self.last_refill = now;
        for b in &mut self.buffers {
            b.refill(elapsed);
        }
    }

    pub fn pick(&mut self, now: Time) -> Pick {
        self.refill(now);
        let eligible = |b: &Buffer| !b.is_empty() && b.under_cap();
        let chosen = self
            .buffers
            .iter()
            .position(|b| eligible(b) && b.guaranteed())
            .or_else(|| self.buffers.iter().position(eligible));
        if let Some(i) = chosen {
            let cell = self.buffers[i].take();
            return Pick::Send {
                level_index: i,
                cell,
            };
        }
        let wait = self
            .buffers
            .iter()
            .filter(|b| !b.is_empty())
            .map(Buffer::time_until_under_cap)
            .fold(f64::INFINITY, f64::min);
        if wait.is_finite() {
            Pick::Blocked { until: now + wait }
        } else {
            Pick::Empty
        }
    }
}
