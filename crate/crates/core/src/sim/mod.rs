//! Cycle-accurate simulator of the processor-core bank.
//!
//! All cores share one global clock. Each core's time reference is the global
//! cycle plus the signed sum of the `inc_qclk` operands it has executed. The
//! simulator is event driven: it jumps straight to the next cycle at which
//! something happens (an instruction fetch, a trigger, a measurement, an FPROC
//! response), which is observationally identical to stepping every cycle.
//!
//! Instruction timing, with `C` the issue cost of the instruction and `L` the
//! FPROC latency (both from [`TimingModel`]), for an instruction fetched at
//! global cycle `g` on a core with time-reference offset `o`:
//!
//! | instruction        | next fetch                                     |
//! |--------------------|------------------------------------------------|
//! | `pulse_write_trig` | `S − o`, the cycle where `time_ref == S`; requires `g + C ≤ S − o` |
//! | `idle`             | `max(g + C, end − o)`                          |
//! | `jump_fproc`, `alu_fproc` | `g + L + C`; the bank is read at `g`, the result lands at `g + L` |
//! | everything else    | `g + C`                                        |
//!
//! A trigger fires in the same cycle that `time_ref` reaches the start time.
//! A pulse on a configured readout channel completes its measurement at
//! trigger + envelope length (demodulation end); the backend's bit becomes
//! visible in the FPROC bank `delay_cycles` later.

mod fproc;
mod machine;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::DecodeError;
use crate::qbackend::BackendError;
use crate::timing::TimingModel;

pub use fproc::{FprocBank, FprocError};
pub use machine::{load, run, CoreState, CoreStatus, Machine, PulseRegister};
pub use trace::{
    from_timeline_csv, timeline, timeline_csv, CoreSummary, FprocRecord, MeasurementRecord,
    PhaseResetRecord, PulseEvent, Termination, TimelineRow, Trace,
};

/// A readout channel whose pulses produce measurement results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Readout {
    /// Demodulation channel, e.g. `Q1.rdlo`.
    pub channel: String,
    /// Qubit the backend measures.
    pub qubit: String,
    /// FPROC bank slot (function id) receiving the result.
    pub slot: u16,
    /// Cycles from demodulation end until the result is readable.
    pub delay_cycles: u32,
}

fn default_max_cycles() -> u64 {
    1 << 32
}

fn default_max_cores() -> usize {
    64
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub timing: TimingModel,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: u64,
    /// Strict: late triggers and reads of never-written FPROC slots are
    /// errors. Lenient: late triggers fire at the earliest possible cycle and
    /// empty slots read as 0.
    #[serde(default = "default_true")]
    pub strict: bool,
    #[serde(default = "default_max_cores")]
    pub max_cores: usize,
    #[serde(default)]
    pub readouts: Vec<Readout>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timing: TimingModel::default(),
            max_cycles: default_max_cycles(),
            strict: true,
            max_cores: default_max_cores(),
            readouts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("{images} core images but only {max} cores configured")]
    TooManyCores { images: usize, max: usize },
    #[error("core {core}: program has {words} words; program memory holds {limit}")]
    ProgramTooLarge {
        core: String,
        words: usize,
        limit: usize,
    },
    #[error("core {core}, address {addr}: {source}")]
    Decode {
        core: String,
        addr: usize,
        #[source]
        source: DecodeError,
    },
    #[error("core {core}: instruction pointer {ip} outside program of {len} words")]
    IpOutOfRange { core: String, ip: usize, len: usize },
    #[error(
        "core {core}, address {addr}: start time {start_time} missed; earliest reachable time_ref is {earliest}"
    )]
    TriggerMissed {
        core: String,
        addr: usize,
        start_time: u32,
        earliest: i64,
    },
    #[error("core {core}, address {addr}: cfg word {cfg} names no channel of this core")]
    UnknownElement { core: String, addr: usize, cfg: u8 },
    #[error("core {core}, address {addr}: {source}")]
    Fproc {
        core: String,
        addr: usize,
        #[source]
        source: FprocError,
    },
    #[error("simulation exceeded {0} cycles")]
    MaxCyclesExceeded(u64),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
}

/// A failed run: the error plus everything traced up to it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct SimFailure {
    pub error: SimError,
    pub trace: Box<Trace>,
}
