//! Assembler: JSON assembly programs to per-core binaries plus envelope and
//! frequency buffers.
//!
//! Physical pulse parameters are converted to hardware words by an
//! [`ElementConfig`]; channel names, element indices and named attributes come
//! from a [`ChannelConfig`].

mod assembler;
pub mod config;
pub mod convert;
pub mod envelope;
mod output;
pub mod program;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::isa::{self, EncodeError, ListingError};

pub use assembler::assemble;
pub use config::{ChannelConfig, ChannelInfo, DefaultElementConfig, ElementConfig, ElementParams};
pub use envelope::{generate_envelope, EnvelopeError, EnvelopeSpec};
pub use output::{read_manifest, write_images, Manifest, ManifestError, MANIFEST_FILE};
pub use program::{AsmInstr, AsmProgram, CoreKey, EnvValue, FuncId, RegType, Value};

/// Program memory per core, in 128-bit words.
pub const PROGRAM_MEMORY_WORDS: usize = 2048;

/// Largest function id the assembler accepts (the FPROC id field is wider).
pub const MAX_FPROC_ID: i64 = 255;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsmError {
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("channel `{channel}` is not driven by core `{core}`")]
    ChannelNotInCore { channel: String, core: String },
    #[error("channels `{0}` and `{1}` share an element index on one core")]
    DuplicateElement(String, String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("label `{0}` defined more than once")]
    DuplicateLabel(String),
    #[error("undeclared register `{0}`")]
    UndeclaredRegister(String),
    #[error("register `{0}` declared more than once")]
    DuplicateRegister(String),
    #[error("more than {} registers declared", isa::NUM_REGS)]
    TooManyRegisters,
    #[error("register type mismatch: {0}")]
    RegisterTypeMismatch(String),
    #[error("pulse reads two registers (`{0}` and `{1}`); only one register address is encoded")]
    RegisterConflict(String, String),
    #[error("immediate {0} is not a 32-bit integer")]
    BadIntImmediate(f64),
    #[error("program has {words} words; program memory holds {limit}")]
    ProgramTooLarge { words: usize, limit: usize },
    #[error("{buffer} buffer for `{channel}` needs {needed} entries; capacity is {capacity}")]
    BufferOverflow {
        channel: String,
        buffer: &'static str,
        needed: usize,
        capacity: usize,
    },
    #[error("envelope of {0} cycles does not fit the 12-bit length field")]
    EnvelopeTooLong(u32),
    #[error("amplitude {0} outside [0, 1]")]
    AmplitudeOutOfRange(f64),
    #[error("frequency {freq} Hz outside [0, {limit})")]
    FrequencyOutOfRange { freq: f64, limit: f64 },
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("channel `{channel}` has no attribute `{attr}`")]
    UnknownAttribute { channel: String, attr: String },
    #[error("function id {0} outside 0..={MAX_FPROC_ID}")]
    FprocIdOutOfRange(i64),
    #[error("invalid element parameters for `{channel}`: {reason}")]
    InvalidElementParams { channel: String, reason: String },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Listing(#[from] ListingError),
    #[error("core `{core}`, instruction {index} ({op}): {source}")]
    At {
        core: String,
        index: usize,
        op: &'static str,
        #[source]
        source: Box<AsmError>,
    },
}

impl AsmError {
    /// The innermost error, without core/instruction context.
    pub fn root(&self) -> &AsmError {
        match self {
            AsmError::At { source, .. } => source.root(),
            e => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterInfo {
    pub index: u8,
    pub dtype: RegType,
}

/// One envelope stored in a channel's envelope buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvEntry {
    /// Start address in clock cycles.
    pub addr: u32,
    pub cycles: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvBuffer {
    /// 16-bit I/Q samples; entry `e` occupies cycles `e.addr .. e.addr + e.cycles`.
    pub samples: Vec<[i16; 2]>,
    pub entries: Vec<EnvEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FreqBuffer {
    /// Phase increment per DAC sample.
    pub words: Vec<u32>,
    /// Source frequency of each entry, Hz.
    pub freqs: Vec<f64>,
}

/// Assembled output for one core.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoreImage {
    pub key: CoreKey,
    pub binary: Vec<u128>,
    /// Element index (cfg word) to channel name.
    pub elements: BTreeMap<u8, String>,
    pub env_buffers: BTreeMap<String, EnvBuffer>,
    pub freq_buffers: BTreeMap<String, FreqBuffer>,
    pub registers: BTreeMap<String, RegisterInfo>,
    pub labels: BTreeMap<String, u16>,
}

impl CoreImage {
    pub fn channel_for_cfg(&self, cfg: u8) -> Option<&str> {
        self.elements.get(&cfg).map(String::as_str)
    }

    /// Frequency in Hz stored at `addr` of `channel`'s frequency buffer.
    pub fn freq_hz(&self, channel: &str, addr: u16) -> Option<f64> {
        self.freq_buffers
            .get(channel)
            .and_then(|b| b.freqs.get(usize::from(addr)).copied())
    }
}

/// Encodes a text listing (as printed by [`isa::disassemble`]).
pub fn assemble_listing(text: &str) -> Result<Vec<u128>, AsmError> {
    let instrs = isa::parse_listing(text)?;
    if instrs.len() > PROGRAM_MEMORY_WORDS {
        return Err(AsmError::ProgramTooLarge {
            words: instrs.len(),
            limit: PROGRAM_MEMORY_WORDS,
        });
    }
    instrs
        .iter()
        .map(|i| isa::encode(i).map_err(AsmError::from))
        .collect()
}
