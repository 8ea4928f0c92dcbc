//! Shared vocabulary: cells, RM payloads, traffic contracts, QoS descriptors
//! and buffer configurations.
//!
//! Rates are cells per second, times and durations are seconds.

use core::fmt;

use thiserror::Error;

/// Cell rate in cells per second.
pub type Rate = f64;

/// Simulation time or duration in seconds.
pub type Time = f64;

/// Bits in one 53-byte ATM cell.
pub const CELL_BITS: u32 = 424;

/// Converts a link bit rate into a cell rate.
pub fn bits_to_cells(bits_per_second: f64) -> Rate {
    bits_per_second / CELL_BITS as f64
}

/// Converts a cell rate into a link bit rate.
pub fn cells_to_bits(cells_per_second: Rate) -> f64 {
    cells_per_second * CELL_BITS as f64
}

/// Virtual connection identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct VcId(pub u32);

impl fmt::Display for VcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("cell on vc {0} is not an RM cell")]
    NotRm(VcId),
    #[error("RM cell on vc {0} is already travelling backward")]
    AlreadyBackward(VcId),
    #[error("RM cell on vc {0} is travelling forward")]
    NotBackward(VcId),
    #[error("invalid {field}: {reason}")]
    Invalid {
        field: &'static str,
        reason: &'static str,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Data,
    Rm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Resource management payload carried by RM cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmPayload {
    pub dir: Direction,
    /// Congestion indication.
    pub ci: bool,
    /// No increase.
    pub ni: bool,
    /// Explicit rate.
    pub er: Rate,
    /// Current cell rate of the source when the cell was sent.
    pub ccr: Rate,
    pub out_of_rate: bool,
}

/// A single ATM cell travelling through the simulated network.
///
/// The RM payload is present exactly when the cell is an RM cell, so
/// [`Cell::kind`] is derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub vc: VcId,
    pub efci: bool,
    /// Cell loss priority; `true` is a tagged (CLP=1) cell.
    pub clp: bool,
    pub rm: Option<RmPayload>,
    pub seq: u64,
    pub created_at: Time,
}

impl Cell {
    pub fn data(vc: VcId, seq: u64, now: Time) -> Cell {
        Cell {
            vc,
            efci: false,
            clp: false,
            rm: None,
            seq,
            created_at: now,
        }
    }

    pub fn kind(&self) -> CellKind {
        if self.rm.is_some() {
            CellKind::Rm
        } else {
            CellKind::Data
        }
    }

    pub fn size_bits(&self) -> u32 {
        CELL_BITS
    }

    pub fn is_data(&self) -> bool {
        self.rm.is_none()
    }

    pub fn is_rm(&self) -> bool {
        self.rm.is_some()
    }

    pub fn is_frm(&self) -> bool {
        matches!(self.rm, Some(rm) if rm.dir == Direction::Forward)
    }

    pub fn is_brm(&self) -> bool {
        matches!(self.rm, Some(rm) if rm.dir == Direction::Backward)
    }

    pub fn is_out_of_rate(&self) -> bool {
        matches!(self.rm, Some(rm) if rm.out_of_rate)
    }

    /// Checks the header invariants of cells emitted by ABR end systems:
    /// data cells are untagged and out-of-rate RM cells are tagged.
    pub fn check_abr_invariants(&self) -> Result<(), ModelError> {
        match self.rm {
            None if self.clp => Err(ModelError::Invalid {
                field: "clp",
                reason: "ABR data cells must have CLP=0",
            }),
            Some(rm) if rm.out_of_rate && !self.clp => Err(ModelError::Invalid {
                field: "clp",
                reason: "out-of-rate RM cells must have CLP=1",
            }),
            Some(rm) if rm.er < 0.0 || rm.ccr < 0.0 => Err(ModelError::Invalid {
                field: "rm",
                reason: "ER and CCR must be non-negative",
            }),
            _ => Ok(()),
        }
    }
}

/// Builds an in-rate forward RM cell with clear feedback bits.
pub fn make_frm(vc: VcId, seq: u64, ccr: Rate, er_seed: Rate, now: Time) -> Cell {
    debug_assert!(ccr >= 0.0 && er_seed >= 0.0);
    Cell {
        vc,
        efci: false,
        clp: false,
        rm: Some(RmPayload {
            dir: Direction::Forward,
            ci: false,
            ni: false,
            er: er_seed,
            ccr,
            out_of_rate: false,
        }),
        seq,
        created_at: now,
    }
}

/// Reverses a forward RM cell at a destination. `congested_hint` raises CI,
/// it never clears a CI set upstream.
pub fn turn_around(mut frm: Cell, congested_hint: bool) -> Result<Cell, ModelError> {
    let rm = frm.rm.as_mut().ok_or(ModelError::NotRm(frm.vc))?;
    if rm.dir != Direction::Forward {
        return Err(ModelError::AlreadyBackward(frm.vc));
    }
    rm.dir = Direction::Backward;
    rm.ci |= congested_hint;
    Ok(frm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ServiceCategory {
    Cbr,
    VbrRt,
    VbrNrt,
    Abr,
    Ubr,
}

impl ServiceCategory {
    /// CBR and VBR are carried as higher-priority background load.
    pub fn is_background(self) -> bool {
        matches!(self, Self::Cbr | Self::VbrRt | Self::VbrNrt)
    }
}

/// Which cell stream a CLR objective applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ClrStream {
    Clp0,
    #[default]
    Clp0Plus1,
}

/// Requested or supported QoS parameters. The error-related ratios are
/// carried as contract metadata only.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct QosParams {
    pub max_ctd: Option<Time>,
    pub p2p_cdv: Option<Time>,
    pub clr_target: Option<f64>,
    pub clr_stream: ClrStream,
    pub cer: Option<f64>,
    pub secbr: Option<f64>,
    pub cmr: Option<f64>,
}

impl QosParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, v) in [
            ("max_ctd", self.max_ctd),
            ("p2p_cdv", self.p2p_cdv),
        ] {
            if matches!(v, Some(d) if !(d >= 0.0)) {
                return Err(ModelError::Invalid {
                    field,
                    reason: "durations must be non-negative",
                });
            }
        }
        for (field, v) in [
            ("clr_target", self.clr_target),
            ("cer", self.cer),
            ("secbr", self.secbr),
            ("cmr", self.cmr),
        ] {
            if matches!(v, Some(r) if !(0.0..=1.0).contains(&r)) {
                return Err(ModelError::Invalid {
                    field,
                    reason: "ratios must lie in [0, 1]",
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrafficContract {
    pub category: ServiceCategory,
    pub pcr: Rate,
    pub scr: Option<Rate>,
    pub mbs: Option<u32>,
    pub mcr: Rate,
    pub cdvt: Time,
    pub qos: QosParams,
}

impl TrafficContract {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.pcr > 0.0) {
            return Err(ModelError::Invalid {
                field: "pcr",
                reason: "must be positive",
            });
        }
        if !(self.mcr >= 0.0 && self.mcr <= self.pcr) {
            return Err(ModelError::Invalid {
                field: "mcr",
                reason: "must satisfy 0 <= mcr <= pcr",
            });
        }
        if matches!(self.scr, Some(scr) if !(scr > 0.0 && scr <= self.pcr)) {
            return Err(ModelError::Invalid {
                field: "scr",
                reason: "must satisfy 0 < scr <= pcr",
            });
        }
        if self.mbs == Some(0) {
            return Err(ModelError::Invalid {
                field: "mbs",
                reason: "must be at least 1",
            });
        }
        if !(self.cdvt >= 0.0) {
            return Err(ModelError::Invalid {
                field: "cdvt",
                reason: "must be non-negative",
            });
        }
        self.qos.validate()
    }

    /// Burst tolerance for the SCR bucket, `(MBS - 1) * (1/SCR - 1/PCR)`.
    pub fn burst_tolerance(&self) -> Option<Time> {
        let scr = self.scr?;
        let mbs = self.mbs.unwrap_or(1);
        Some((mbs - 1) as f64 * (1.0 / scr - 1.0 / self.pcr))
    }
}

/// ABR operating parameters negotiated at connection setup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbrParams {
    pub pcr: Rate,
    pub mcr: Rate,
    pub icr: Rate,
    /// Data cells per forward RM cell, counting the RM cell itself.
    pub nrm: u32,
    pub rif: f64,
    pub rdf: f64,
    /// Idle time after which ACR falls back to ICR.
    pub adtf: Time,
}

impl AbrParams {
    pub fn with_pcr(pcr: Rate) -> AbrParams {
        AbrParams {
            pcr,
            mcr: 0.0,
            icr: pcr / 10.0,
            nrm: 32,
            rif: 1.0 / 16.0,
            rdf: 1.0 / 16.0,
            adtf: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.pcr > 0.0) {
            return Err(ModelError::Invalid {
                field: "pcr",
                reason: "must be positive",
            });
        }
        if !(self.mcr >= 0.0 && self.mcr <= self.icr && self.icr <= self.pcr) {
            return Err(ModelError::Invalid {
                field: "icr",
                reason: "must satisfy mcr <= icr <= pcr",
            });
        }
        if self.nrm < 2 {
            return Err(ModelError::Invalid {
                field: "nrm",
                reason: "must be at least 2",
            });
        }
        for (field, v) in [("rif", self.rif), ("rdf", self.rdf)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ModelError::Invalid {
                    field,
                    reason: "must lie in (0, 1]",
                });
            }
        }
        if !(self.adtf > 0.0) {
            return Err(ModelError::Invalid {
                field: "adtf",
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

/// Output buffer for one QoS level at a switch port.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BufferConfig {
    /// Priority ordinal, 0 is served first.
    pub qos_level: u8,
    pub capacity: u32,
    pub min_bw: Rate,
    pub max_bw: Rate,
}

impl BufferConfig {
    pub fn validate(&self, link_rate: Rate) -> Result<(), ModelError> {
        if self.capacity == 0 {
            return Err(ModelError::Invalid {
                field: "capacity",
                reason: "must be at least 1 cell",
            });
        }
        if !(self.min_bw >= 0.0 && self.min_bw <= self.max_bw) {
            return Err(ModelError::Invalid {
                field: "min_bw",
                reason: "must satisfy 0 <= min_bw <= max_bw",
            });
        }
        // Tolerate rounding when max_bw was derived from a bit rate.
        if self.max_bw > link_rate * (1.0 + 1e-12) {
            return Err(ModelError::Invalid {
                field: "max_bw",
                reason: "must not exceed the link rate",
            });
        }
        Ok(())
    }
}
