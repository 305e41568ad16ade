//! Instruction set data model and bit-exact 128-bit encoding.
//!
//! Every instruction is one 128-bit word in one of two formats. The pulse
//! format carries the pulse-register fields (envelope, phase, frequency,
//! amplitude, config) and an optional trigger time; the ALU/flow format
//! carries an ALU operation, two inputs, a destination or jump address and an
//! FPROC id. See [`opcode`] for the numeric opcode table.

mod encode;
mod listing;
pub mod opcode;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encode::{decode, decode_with, encode, DecodeMode, Decoded, ReservedBits};
pub use listing::{disassemble, format_instruction, parse_listing, ListingError};

/// Number of general-purpose registers per core.
pub const NUM_REGS: u8 = 16;

pub const ENV_WORD_BITS: u32 = 24;
pub const ENV_ADDR_BITS: u32 = 12;
pub const ENV_LEN_BITS: u32 = 12;
pub const PHASE_WORD_BITS: u32 = 17;
pub const FREQ_WORD_BITS: u32 = 9;
pub const AMP_WORD_BITS: u32 = 16;
pub const CFG_WORD_BITS: u32 = 4;

/// ALU operation. All arithmetic is on 32-bit signed values; comparisons
/// produce 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AluOp {
    Eq,
    Gt,
    Lt,
    Add,
    Sub,
    Id0,
    Id1,
}

impl AluOp {
    pub const ALL: [AluOp; 7] = [
        AluOp::Eq,
        AluOp::Gt,
        AluOp::Lt,
        AluOp::Add,
        AluOp::Sub,
        AluOp::Id0,
        AluOp::Id1,
    ];

    /// Evaluates `in0 <op> in1`.
    pub fn apply(self, in0: i32, in1: i32) -> i32 {
        match self {
            AluOp::Eq => i32::from(in0 == in1),
            AluOp::Gt => i32::from(in0 > in1),
            AluOp::Lt => i32::from(in0 < in1),
            AluOp::Add => in0.wrapping_add(in1),
            AluOp::Sub => in0.wrapping_sub(in1),
            AluOp::Id0 => in0,
            AluOp::Id1 => in1,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, AluOp::Eq | AluOp::Gt | AluOp::Lt)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            AluOp::Eq => "eq",
            AluOp::Gt => "gt",
            AluOp::Lt => "lt",
            AluOp::Add => "add",
            AluOp::Sub => "sub",
            AluOp::Id0 => "id0",
            AluOp::Id1 => "id1",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<AluOp> {
        AluOp::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    pub(crate) fn code(self) -> u8 {
        use opcode::alu;
        match self {
            AluOp::Id0 => alu::ID0,
            AluOp::Add => alu::ADD,
            AluOp::Sub => alu::SUB,
            AluOp::Eq => alu::EQ,
            AluOp::Lt => alu::LT,
            AluOp::Gt => alu::GT,
            AluOp::Id1 => alu::ID1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<AluOp> {
        AluOp::ALL.into_iter().find(|op| op.code() == code)
    }
}

/// ALU input 0: a register address or a signed 32-bit immediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(u8),
    Imm(i32),
}

/// Source of one pulse-register field in a pulse instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FieldSource<T> {
    /// Write enable low: the field keeps its previous value.
    #[default]
    Keep,
    /// Write the instruction immediate.
    Imm(T),
    /// Write from the register addressed by the instruction's `reg` field.
    Reg,
}

impl<T: Copy> FieldSource<T> {
    pub fn imm(&self) -> Option<T> {
        match self {
            FieldSource::Imm(v) => Some(*v),
            _ => None,
        }
    }
}

/// Pulse-register field writes carried by `pulse_write` / `pulse_write_trig`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PulseFields {
    /// 24-bit envelope word: start address in the upper 12 bits, length in
    /// clock cycles in the lower 12 bits.
    pub env: FieldSource<u32>,
    /// 17-bit phase word; full scale is 2π.
    pub phase: FieldSource<u32>,
    /// 9-bit frequency-buffer address.
    pub freq: FieldSource<u16>,
    /// 16-bit amplitude word; full scale is the DAC full scale.
    pub amp: FieldSource<u16>,
    /// 4-bit config word; immediate only.
    pub cfg: Option<u8>,
}

/// Packs an envelope start address and length (both 12-bit) into an env word.
pub fn env_word(addr: u32, len: u32) -> u32 {
    ((addr & 0xfff) << ENV_LEN_BITS) | (len & 0xfff)
}

/// Splits an env word into `(start address, length)`.
pub fn split_env_word(word: u32) -> (u32, u32) {
    ((word >> ENV_LEN_BITS) & 0xfff, word & 0xfff)
}

/// Decoded form of one 128-bit instruction word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    PulseWrite {
        reg: u8,
        fields: PulseFields,
    },
    PulseWriteTrig {
        reg: u8,
        fields: PulseFields,
        start_time: u32,
    },
    RegAlu {
        op: AluOp,
        in0: Operand,
        in1: u8,
        dest: u8,
    },
    Jump {
        addr: u16,
    },
    JumpCond {
        op: AluOp,
        in0: Operand,
        in1: u8,
        addr: u16,
    },
    JumpFproc {
        op: AluOp,
        in0: Operand,
        addr: u16,
        fproc_id: u16,
    },
    AluFproc {
        op: AluOp,
        in0: Operand,
        dest: u8,
        fproc_id: u16,
    },
    IncQclk {
        in0: Operand,
    },
    Idle {
        end_time: u32,
    },
    Done,
    PhaseReset,
}

/// Instruction class, used as the key of the issue-cost table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpClass {
    PulseWrite,
    PulseWriteTrig,
    RegAlu,
    Jump,
    JumpCond,
    JumpFproc,
    AluFproc,
    IncQclk,
    Idle,
    Done,
    PhaseReset,
}

impl Instruction {
    pub fn class(&self) -> OpClass {
        match self {
            Instruction::PulseWrite { .. } => OpClass::PulseWrite,
            Instruction::PulseWriteTrig { .. } => OpClass::PulseWriteTrig,
            Instruction::RegAlu { .. } => OpClass::RegAlu,
            Instruction::Jump { .. } => OpClass::Jump,
            Instruction::JumpCond { .. } => OpClass::JumpCond,
            Instruction::JumpFproc { .. } => OpClass::JumpFproc,
            Instruction::AluFproc { .. } => OpClass::AluFproc,
            Instruction::IncQclk { .. } => OpClass::IncQclk,
            Instruction::Idle { .. } => OpClass::Idle,
            Instruction::Done => OpClass::Done,
            Instruction::PhaseReset => OpClass::PhaseReset,
        }
    }

    /// Jump target, if this is a control-flow instruction.
    pub fn jump_target(&self) -> Option<u16> {
        match self {
            Instruction::Jump { addr }
            | Instruction::JumpCond { addr, .. }
            | Instruction::JumpFproc { addr, .. } => Some(*addr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("field `{field}` value {value} exceeds its {width}-bit width")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        width: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unknown opcode 0x{0:02x}")]
    UnknownOpcode(u8),
    #[error("unknown ALU operation code 0b{0:03b}")]
    UnknownAluOp(u8),
    #[error("nonzero reserved bits in `{}`: 0x{:x}", .0.field, .0.bits)]
    NonzeroReservedBits(ReservedBits),
}

/// Writes a binary as a flat sequence of 128-bit little-endian words.
pub fn words_to_bytes(words: &[u128]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("binary length {0} is not a multiple of 16 bytes")]
pub struct TruncatedBinary(pub usize);

/// Reads a flat little-endian 128-bit word sequence.
pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u128>, TruncatedBinary> {
    if !bytes.len().is_multiple_of(16) {
        return Err(TruncatedBinary(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| u128::from_le_bytes(c.try_into().expect("16-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alu_wraps_on_overflow() {
        assert_eq!(AluOp::Add.apply(i32::MAX, 1), i32::MIN);
        assert_eq!(AluOp::Sub.apply(i32::MIN, 1), i32::MAX);
    }

    #[test]
    fn comparisons_are_boolean() {
        assert_eq!(AluOp::Gt.apply(3, 2), 1);
        assert_eq!(AluOp::Gt.apply(2, 3), 0);
        assert_eq!(AluOp::Lt.apply(-1, 0), 1);
        assert_eq!(AluOp::Eq.apply(7, 7), 1);
        assert_eq!(AluOp::Id1.apply(7, 9), 9);
    }

    #[test]
    fn env_word_packs_address_high() {
        let w = env_word(0xabc, 0x123);
        assert_eq!(w, 0xabc123);
        assert_eq!(split_env_word(w), (0xabc, 0x123));
    }

    #[test]
    fn byte_roundtrip_and_truncation() {
        let words = vec![1u128, u128::MAX, 0x1234 << 100];
        assert_eq!(bytes_to_words(&words_to_bytes(&words)).unwrap(), words);
        assert_eq!(bytes_to_words(&[0u8; 17]), Err(TruncatedBinary(17)));
    }
}
