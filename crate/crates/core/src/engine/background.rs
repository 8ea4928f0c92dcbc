//! Background CBR, VBR and UBR cell generators.
//!
//! A VBR generator emits bursts of up to `mbs` cells at PCR spacing and
//! starts the next burst no earlier than the sustained-rate bucket drains,
//! so its output conforms to GCRA(1/SCR, (MBS - 1)(1/SCR - 1/PCR)).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Cell, Rate, ServiceCategory, Time, TrafficContract, VcId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BackgroundKind {
    Cbr,
    Vbr,
    Ubr,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackgroundError {
    #[error("background pcr must be positive, got {0}")]
    BadPcr(Rate),
    #[error("vbr generator needs 0 < scr <= pcr, got scr {scr} with pcr {pcr}")]
    BadScr { scr: Rate, pcr: Rate },
    #[error("vbr generator needs mbs >= 1")]
    BadMbs,
    #[error("off_jitter must be non-negative, got {0}")]
    BadJitter(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundGenerator {
    pub kind: BackgroundKind,
    pub vc: VcId,
    pub pcr: Rate,
    pub scr: Rate,
    pub mbs: u32,
    /// Extra off time as a fraction of the minimum, drawn uniformly in
    /// `[0, off_jitter)` per burst.
    pub off_jitter: f64,
    pub qos_level: u8,
    pub start: Time,
}

impl BackgroundGenerator {
    pub fn cbr(vc: VcId, pcr: Rate, qos_level: u8) -> BackgroundGenerator {
        BackgroundGenerator {
            kind: BackgroundKind::Cbr,
            vc,
            pcr,
            scr: pcr,
            mbs: 1,
            off_jitter: 0.0,
            qos_level,
            start: 0.0,
        }
    }

    pub fn vbr(vc: VcId, pcr: Rate, scr: Rate, mbs: u32, qos_level: u8) -> BackgroundGenerator {
        BackgroundGenerator {
            kind: BackgroundKind::Vbr,
            scr,
            mbs,
            ..BackgroundGenerator::cbr(vc, pcr, qos_level)
        }
    }

    pub fn validate(&self) -> Result<(), BackgroundError> {
        if !(self.pcr > 0.0 && self.pcr.is_finite()) {
            return Err(BackgroundError::BadPcr(self.pcr));
        }
        if self.kind == BackgroundKind::Vbr {
            if !(self.scr > 0.0 && self.scr <= self.pcr) {
                return Err(BackgroundError::BadScr {
                    scr: self.scr,
                    pcr: self.pcr,
                });
            }
            if self.mbs == 0 {
                return Err(BackgroundError::BadMbs);
            }
        }
        if !(self.off_jitter >= 0.0 && self.off_jitter.is_finite()) {
            return Err(BackgroundError::BadJitter(self.off_jitter));
        }
        Ok(())
    }

    pub fn contract(&self) -> TrafficContract {
        let category = match self.kind {
            BackgroundKind::Cbr => ServiceCategory::Cbr,
            BackgroundKind::Vbr => ServiceCategory::VbrRt,
            BackgroundKind::Ubr => ServiceCategory::Ubr,
        };
        let vbr = self.kind == BackgroundKind::Vbr;
        TrafficContract {
            category,
            pcr: self.pcr,
            scr: vbr.then_some(self.scr),
            mbs: vbr.then_some(self.mbs),
            mcr: 0.0,
            cdvt: 0.0,
            qos: Default::default(),
        }
    }
}

/// Emission state of one generator.
#[derive(Clone, Debug)]
pub struct GeneratorState {
    pub generator: BackgroundGenerator,
    rng: ChaCha8Rng,
    burst_start: Time,
    burst_len: u32,
    in_burst: u32,
    next_seq: u64,
}

impl GeneratorState {
    /// Generators of one run share `seed` and differ by `stream`.
    pub fn new(generator: BackgroundGenerator, seed: u64, stream: u64) -> GeneratorState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut state = GeneratorState {
            rng,
            burst_start: generator.start,
            burst_len: 1,
            in_burst: 0,
            next_seq: 0,
            generator,
        };
        state.burst_len = state.draw_burst();
        state
    }

    fn draw_burst(&mut self) -> u32 {
        match self.generator.kind {
            BackgroundKind::Vbr => self.rng.random_range(1..=self.generator.mbs),
            _ => 1,
        }
    }

    pub fn first_emission(&self) -> Time {
        self.generator.start
    }

    pub fn emitted(&self) -> u64 {
        self.next_seq
    }

    /// Emits the cell due at `now` and returns it with the next emission time.
    pub fn emit(&mut self, now: Time) -> (Cell, Time) {
        let g = &self.generator;
        let cell = Cell::data(g.vc, self.next_seq, now);
        self.next_seq += 1;
        let next = match g.kind {
            BackgroundKind::Cbr | BackgroundKind::Ubr => g.start + self.next_seq as f64 / g.pcr,
            BackgroundKind::Vbr => {
                self.in_burst += 1;
                if self.in_burst < self.burst_len {
                    self.burst_start + self.in_burst as f64 / g.pcr
                } else {
                    let min_cycle = self.burst_len as f64 / g.scr;
                    let jitter = if g.off_jitter > 0.0 {
                        g.off_jitter * self.rng.random::<f64>() * min_cycle
                    } else {
                        0.0
                    };
                    self.burst_start += min_cycle + jitter;
                    self.in_burst = 0;
                    self.burst_len = self.draw_burst();
                    self.burst_start
                }
            }
        };
        (cell, next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcra::{GcraState, Verdict};
    use alloc::vec::Vec;

    fn times(state: &mut GeneratorState, n: usize) -> Vec<Time> {
        let mut t = state.first_emission();
        (0..n)
            .map(|_| {
                let at = t;
                t = state.emit(at).1;
                at
            })
            .collect()
    }

    #[test]
    fn cbr_fixed_spacing() {
        let mut s = GeneratorState::new(BackgroundGenerator::cbr(VcId(9), 100.0, 0), 1, 0);
        let ts = times(&mut s, 4);
        assert_eq!(ts, [0.0, 0.01, 0.02, 0.03]);
    }

    #[test]
    fn vbr_bursts_and_conforms() {
        let mut g = BackgroundGenerator::vbr(VcId(9), 200.0, 100.0, 10, 0);
        g.off_jitter = 0.5;
        let contract = g.contract();
        let mut s = GeneratorState::new(g, 7, 0);
        let ts = times(&mut s, 5000);
        // Rounding in the schedule sits far inside a nanosecond.
        let tau = contract.burst_tolerance().unwrap() + 1e-9;
        let mut bucket = GcraState::new(100.0, tau).unwrap();
        let mut run = 1;
        for w in ts.windows(2) {
            let gap = w[1] - w[0];
            if (gap - 0.005).abs() < 1e-9 {
                run += 1;
                assert!(run <= 10);
            } else {
                assert!(gap > 0.005);
                run = 1;
            }
        }
        for &t in &ts {
            assert_eq!(bucket.check(t).unwrap(), Verdict::Conforming, "cell at {t}");
        }
        let rate = ts.len() as f64 / ts.last().unwrap();
        assert!(rate <= 100.0 + 1e-6, "long-run rate {rate}");
    }

    #[test]
    fn same_seed_same_schedule() {
        let g = BackgroundGenerator {
            off_jitter: 1.0,
            ..BackgroundGenerator::vbr(VcId(9), 200.0, 100.0, 10, 0)
        };
        let a = times(&mut GeneratorState::new(g.clone(), 3, 1), 200);
        let b = times(&mut GeneratorState::new(g, 3, 1), 200);
        assert_eq!(a, b);
    }

    #[test]
    fn validation() {
        assert!(BackgroundGenerator::vbr(VcId(9), 100.0, 200.0, 10, 0).validate().is_err());
        assert!(BackgroundGenerator::vbr(VcId(9), 200.0, 100.0, 0, 0).validate().is_err());
        assert!(BackgroundGenerator::cbr(VcId(9), 0.0, 0).validate().is_err());
    }
}
