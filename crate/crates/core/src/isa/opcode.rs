//! Opcode table for the 128-bit instruction formats.
//!
//! Two word formats share the top byte:
//!
//! - ALU/flow format: bits 127:124 are the opcode, bit 123 selects register vs
//!   immediate for ALU input 0, bits 122:120 are the ALU operation.
//! - Pulse format: bits 127:120 are the opcode.
//!
//! The ALU/flow opcodes occupy nibbles `0x1..=0x6`; everything else is a full
//! 8-bit opcode whose low nibble is zero. This table is the only place the
//! numeric values live.

/// `reg_alu`: ALU result written to a register.
pub const REG_ALU: u8 = 0x1;
/// `jump_i`: unconditional jump.
pub const JUMP: u8 = 0x2;
/// `jump_cond`: jump when the ALU result is nonzero.
pub const JUMP_COND: u8 = 0x3;
/// `alu_fproc`: ALU with the FPROC word as input 1, result to a register.
pub const ALU_FPROC: u8 = 0x4;
/// `jump_fproc`: jump conditioned on the FPROC word.
pub const JUMP_FPROC: u8 = 0x5;
/// `inc_qclk`: signed increment of the time reference.
pub const INC_QCLK: u8 = 0x6;

/// `phase_reset` (full byte).
pub const PHASE_RESET: u8 = 0x70;
/// `pulse_write` (full byte, pulse format).
pub const PULSE_WRITE: u8 = 0x80;
/// `pulse_write_trig` (full byte, pulse format).
pub const PULSE_WRITE_TRIG: u8 = 0x90;
/// `idle` (full byte, pulse format; only the start-time field is used).
pub const IDLE: u8 = 0xA0;
/// `done_stb` (full byte).
pub const DONE: u8 = 0xF0;

/// 3-bit ALU operation codes (bits 122:120).
pub mod alu {
    pub const ID0: u8 = 0b000;
    pub const ADD: u8 = 0b001;
    pub const SUB: u8 = 0b010;
    pub const EQ: u8 = 0b011;
    pub const LT: u8 = 0b100;
    pub const GT: u8 = 0b101;
    pub const ID1: u8 = 0b110;
}

/// Returns true for nibbles that select the ALU/flow format.
pub const fn is_alu_format(nibble: u8) -> bool {
    matches!(nibble, REG_ALU | JUMP | JUMP_COND | ALU_FPROC | JUMP_FPROC | INC_QCLK)
}
