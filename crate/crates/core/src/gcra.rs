//! Generic Cell Rate Algorithm in its virtual-scheduling form, plus the UPC
//! policing step that tags or drops nonconforming cells.

use thiserror::Error;

use crate::model::{Cell, Rate, Time, TrafficContract};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GcraError {
    #[error("GCRA rate must be positive, got {0}")]
    BadRate(f64),
    #[error("GCRA tolerance must be non-negative, got {0}")]
    BadTolerance(f64),
    #[error("arrival at {t} precedes previous arrival at {previous}")]
    OutOfOrder { t: Time, previous: Time },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Conforming,
    NonConforming,
}

/// Virtual-scheduling state: increment `T`, limit `tau` and the theoretical
/// arrival time of the next cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GcraState {
    increment: Time,
    limit: Time,
    tat: Time,
    last_arrival: Option<Time>,
}

impl GcraState {
    pub fn new(rate: Rate, tolerance: Time) -> Result<GcraState, GcraError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(GcraError::BadRate(rate));
        }
        Self::with_increment(1.0 / rate, tolerance)
    }

    pub fn with_increment(increment: Time, tolerance: Time) -> Result<GcraState, GcraError> {
        if !(increment > 0.0) || !increment.is_finite() {
            return Err(GcraError::BadRate(1.0 / increment));
        }
        if !(tolerance >= 0.0) {
            return Err(GcraError::BadTolerance(tolerance));
        }
        Ok(GcraState {
            increment,
            limit: tolerance,
            tat: 0.0,
            last_arrival: None,
        })
    }

    pub fn increment(&self) -> Time {
        self.increment
    }

    pub fn limit(&self) -> Time {
        self.limit
    }

    pub fn tat(&self) -> Time {
        self.tat
    }

    fn verdict_at(&self, t: Time) -> Result<Verdict, GcraError> {
        if let Some(previous) = self.last_arrival {
            if t < previous {
                return Err(GcraError::OutOfOrder { t, previous });
            }
        }
        Ok(if t < self.tat - self.limit {
            Verdict::NonConforming
        } else {
            Verdict::Conforming
        })
    }

    fn commit(&mut self, t: Time, verdict: Verdict) {
        self.last_arrival = Some(t);
        if verdict == Verdict::Conforming {
            self.tat = self.tat.max(t) + self.increment;
        }
    }

    pub fn check(&mut self, t: Time) -> Result<Verdict, GcraError> {
        let verdict = self.verdict_at(t)?;
        self.commit(t, verdict);
        Ok(verdict)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PoliceMode {
    Tag,
    Drop,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Policed {
    Passed(Cell),
    Tagged(Cell),
    Dropped(Cell),
}

/// Peak-rate bucket on PCR/CDVT, optionally composed with a sustainable-rate
/// bucket on SCR and the MBS-derived burst tolerance. A cell conforms only if
/// both buckets accept it, and only then do the buckets advance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Policer {
    peak: GcraState,
    sustained: Option<GcraState>,
    mode: PoliceMode,
}

impl Policer {
    pub fn new(peak: GcraState, sustained: Option<GcraState>, mode: PoliceMode) -> Policer {
        Policer {
            peak,
            sustained,
            mode,
        }
    }

    pub fn for_contract(contract: &TrafficContract, mode: PoliceMode) -> Result<Policer, GcraError> {
        let peak = GcraState::new(contract.pcr, contract.cdvt)?;
        let sustained = match (contract.scr, contract.burst_tolerance()) {
            (Some(scr), Some(tau_s)) => Some(GcraState::new(scr, tau_s + contract.cdvt)?),
            _ => None,
        };
        Ok(Policer::new(peak, sustained, mode))
    }

    pub fn check(&mut self, t: Time) -> Result<Verdict, GcraError> {
        let mut verdict = self.peak.verdict_at(t)?;
        if let Some(s) = &self.sustained {
            if s.verdict_at(t)? == Verdict::NonConforming {
                verdict = Verdict::NonConforming;
            }
        }
        self.peak.commit(t, verdict);
        if let Some(s) = &mut self.sustained {
            s.commit(t, verdict);
        }
        Ok(verdict)
    }

    pub fn police(&mut self, cell: Cell, t: Time) -> Result<Policed, GcraError> {
        let verdict = self.check(t)?;
        Ok(apply_verdict(cell, verdict, self.mode))
    }
}

/// Single-bucket UPC step.
pub fn police(
    state: &mut GcraState,
    cell: Cell,
    t: Time,
    mode: PoliceMode,
) -> Result<Policed, GcraError> {
    let verdict = state.check(t)?;
    Ok(apply_verdict(cell, verdict, mode))
}

fn apply_verdict(mut cell: Cell, verdict: Verdict, mode: PoliceMode) -> Policed {
    match (verdict, mode) {
        (Verdict::Conforming, _) => Policed::Passed(cell),
        (Verdict::NonConforming, PoliceMode::Tag) => {
            cell.clp = true;
            Policed::Tagged(cell)
        }
        (Verdict::NonConforming, PoliceMode::Drop) => Policed::Dropped(cell),
    }
}
