use super::opcode;
use super::{
    AluOp, DecodeError, EncodeError, FieldSource, Instruction, Operand, PulseFields,
    AMP_WORD_BITS, CFG_WORD_BITS, ENV_WORD_BITS, FREQ_WORD_BITS, PHASE_WORD_BITS,
};

// Pulse format (bit offset of the field's least significant bit).
const P_OPCODE: u32 = 120;
const P_REG: u32 = 116;
const P_ENV_CTRL: u32 = 114;
const P_ENV: u32 = 90;
const P_PHASE_CTRL: u32 = 88;
const P_PHASE: u32 = 71;
const P_FREQ_CTRL: u32 = 69;
const P_FREQ: u32 = 60;
const P_AMP_CTRL: u32 = 58;
const P_AMP: u32 = 42;
const P_CFG_EN: u32 = 41;
const P_CFG: u32 = 37;
const P_START: u32 = 5;
const P_ZERO_BITS: u32 = 5;

// ALU/flow format.
const A_OPCODE: u32 = 124;
const A_RI: u32 = 123;
const A_ALU_OP: u32 = 120;
const A_IN0: u32 = 88;
const A_IN1: u32 = 84;
const A_DEST: u32 = 68;
const A_FPROC: u32 = 52;
const A_ZERO_BITS: u32 = 52;

// Field control: bit 0 write enable, bit 1 register select.
const CTRL_KEEP: u32 = 0b00;
const CTRL_IMM: u32 = 0b01;
const CTRL_REG: u32 = 0b11;

fn mask(width: u32) -> u128 {
    if width == 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

fn put(word: &mut u128, lo: u32, width: u32, value: u128) {
    debug_assert!(value <= mask(width));
    *word |= (value & mask(width)) << lo;
}

fn get(word: u128, lo: u32, width: u32) -> u128 {
    (word >> lo) & mask(width)
}

fn check(field: &'static str, value: u64, width: u32) -> Result<u128, EncodeError> {
    if width < 64 && value >> width != 0 {
        return Err(EncodeError::FieldOverflow {
            field,
            value,
            width,
        });
    }
    Ok(value as u128)
}

fn put_field<T: Copy + Into<u64>>(
    word: &mut u128,
    name: &'static str,
    src: FieldSource<T>,
    ctrl_lo: u32,
    lo: u32,
    width: u32,
) -> Result<(), EncodeError> {
    match src {
        FieldSource::Keep => put(word, ctrl_lo, 2, CTRL_KEEP as u128),
        FieldSource::Reg => put(word, ctrl_lo, 2, CTRL_REG as u128),
        FieldSource::Imm(v) => {
            let v = check(name, v.into(), width)?;
            put(word, ctrl_lo, 2, CTRL_IMM as u128);
            put(word, lo, width, v);
        }
    }
    Ok(())
}

fn encode_pulse(
    op: u8,
    reg: u8,
    fields: &PulseFields,
    start_time: u32,
) -> Result<u128, EncodeError> {
    let mut w = 0u128;
    put(&mut w, P_OPCODE, 8, op as u128);
    put(&mut w, P_REG, 4, check("reg", reg as u64, 4)?);
    put_field(&mut w, "env", fields.env, P_ENV_CTRL, P_ENV, ENV_WORD_BITS)?;
    put_field(
        &mut w,
        "phase",
        fields.phase,
        P_PHASE_CTRL,
        P_PHASE,
        PHASE_WORD_BITS,
    )?;
    put_field(&mut w, "freq", fields.freq, P_FREQ_CTRL, P_FREQ, FREQ_WORD_BITS)?;
    put_field(&mut w, "amp", fields.amp, P_AMP_CTRL, P_AMP, AMP_WORD_BITS)?;
    if let Some(cfg) = fields.cfg {
        put(&mut w, P_CFG_EN, 1, 1);
        put(&mut w, P_CFG, CFG_WORD_BITS, check("cfg", cfg as u64, CFG_WORD_BITS)?);
    }
    put(&mut w, P_START, 32, start_time as u128);
    Ok(w)
}

fn encode_alu(
    nibble: u8,
    op: Option<AluOp>,
    in0: Option<Operand>,
    in1: u8,
    dest: u16,
    fproc_id: u16,
) -> Result<u128, EncodeError> {
    let mut w = 0u128;
    put(&mut w, A_OPCODE, 4, nibble as u128);
    if let Some(op) = op {
        put(&mut w, A_ALU_OP, 3, op.code() as u128);
    }
    match in0 {
        Some(Operand::Reg(r)) => {
            put(&mut w, A_RI, 1, 1);
            put(&mut w, A_IN0, 32, check("in0", r as u64, 4)?);
        }
        Some(Operand::Imm(v)) => put(&mut w, A_IN0, 32, v as u32 as u128),
        None => {}
    }
    put(&mut w, A_IN1, 4, check("in1", in1 as u64, 4)?);
    put(&mut w, A_DEST, 16, dest as u128);
    put(&mut w, A_FPROC, 16, fproc_id as u128);
    Ok(w)
}

/// Encodes one instruction into its 128-bit word.
///
/// Every field is range-checked against its declared width; nothing is
/// silently truncated.
pub fn encode(instr: &Instruction) -> Result<u128, EncodeError> {
    let dest_reg = |d: u8| check("dest", d as u64, 4).map(|v| v as u16);
    match *instr {
        Instruction::PulseWrite { reg, ref fields } => {
            encode_pulse(opcode::PULSE_WRITE, reg, fields, 0)
        }
        Instruction::PulseWriteTrig {
            reg,
            ref fields,
            start_time,
        } => encode_pulse(opcode::PULSE_WRITE_TRIG, reg, fields, start_time),
        Instruction::Idle { end_time } => {
            encode_pulse(opcode::IDLE, 0, &PulseFields::default(), end_time)
        }
        Instruction::RegAlu { op, in0, in1, dest } => {
            encode_alu(opcode::REG_ALU, Some(op), Some(in0), in1, dest_reg(dest)?, 0)
        }
        Instruction::Jump { addr } => encode_alu(opcode::JUMP, None, None, 0, addr, 0),
        Instruction::JumpCond { op, in0, in1, addr } => {
            encode_alu(opcode::JUMP_COND, Some(op), Some(in0), in1, addr, 0)
        }
        Instruction::JumpFproc {
            op,
            in0,
            addr,
            fproc_id,
        } => encode_alu(opcode::JUMP_FPROC, Some(op), Some(in0), 0, addr, fproc_id),
        Instruction::AluFproc {
            op,
            in0,
            dest,
            fproc_id,
        } => encode_alu(
            opcode::ALU_FPROC,
            Some(op),
            Some(in0),
            0,
            dest_reg(dest)?,
            fproc_id,
        ),
        Instruction::IncQclk { in0 } => encode_alu(opcode::INC_QCLK, None, Some(in0), 0, 0, 0),
        Instruction::Done => Ok((opcode::DONE as u128) << P_OPCODE),
        Instruction::PhaseReset => Ok((opcode::PHASE_RESET as u128) << P_OPCODE),
    }
}

/// A reserved or unused field that held nonzero bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReservedBits {
    pub field: &'static str,
    pub bits: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Nonzero reserved bits are an error.
    #[default]
    Strict,
    /// Nonzero reserved bits are ignored and reported as warnings.
    Lenient,
}

/// Result of a decode: the instruction plus any reserved-bit warnings
/// (always empty in strict mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub instr: Instruction,
    pub warnings: Vec<ReservedBits>,
}

struct Reserved(Vec<ReservedBits>);

impl Reserved {
    fn zero(&mut self, word: u128, field: &'static str, lo: u32, width: u32) {
        let bits = get(word, lo, width);
        if bits != 0 {
            self.0.push(ReservedBits { field, bits });
        }
    }
}

fn decode_field<T>(
    word: u128,
    res: &mut Reserved,
    name: &'static str,
    ctrl_lo: u32,
    lo: u32,
    width: u32,
    conv: impl Fn(u128) -> T,
) -> FieldSource<T> {
    let ctrl = get(word, ctrl_lo, 2) as u32;
    match ctrl {
        CTRL_IMM => FieldSource::Imm(conv(get(word, lo, width))),
        CTRL_REG => {
            res.zero(word, name, lo, width);
            FieldSource::Reg
        }
        _ => {
            if ctrl != CTRL_KEEP {
                res.0.push(ReservedBits {
                    field: name,
                    bits: ctrl as u128,
                });
            }
            res.zero(word, name, lo, width);
            FieldSource::Keep
        }
    }
}

fn decode_pulse_fields(word: u128, res: &mut Reserved) -> PulseFields {
    let env = decode_field(word, res, "env", P_ENV_CTRL, P_ENV, ENV_WORD_BITS, |v| {
        v as u32
    });
    let phase = decode_field(
        word,
        res,
        "phase",
        P_PHASE_CTRL,
        P_PHASE,
        PHASE_WORD_BITS,
        |v| v as u32,
    );
    let freq = decode_field(word, res, "freq", P_FREQ_CTRL, P_FREQ, FREQ_WORD_BITS, |v| {
        v as u16
    });
    let amp = decode_field(word, res, "amp", P_AMP_CTRL, P_AMP, AMP_WORD_BITS, |v| {
        v as u16
    });
    let cfg = if get(word, P_CFG_EN, 1) == 1 {
        Some(get(word, P_CFG, CFG_WORD_BITS) as u8)
    } else {
        res.zero(word, "cfg", P_CFG, CFG_WORD_BITS);
        None
    };
    PulseFields {
        env,
        phase,
        freq,
        amp,
        cfg,
    }
}

fn decode_in0(word: u128, res: &mut Reserved) -> Operand {
    let raw = get(word, A_IN0, 32);
    if get(word, A_RI, 1) == 1 {
        res.zero(word, "in0", A_IN0 + 4, 28);
        Operand::Reg((raw & 0xf) as u8)
    } else {
        Operand::Imm(raw as u32 as i32)
    }
}

fn decode_alu_op(word: u128) -> Result<AluOp, DecodeError> {
    let code = get(word, A_ALU_OP, 3) as u8;
    AluOp::from_code(code).ok_or(DecodeError::UnknownAluOp(code))
}

/// Decodes a word in strict mode.
pub fn decode(word: u128) -> Result<Instruction, DecodeError> {
    decode_with(word, DecodeMode::Strict).map(|d| d.instr)
}

/// Decodes a word; in strict mode nonzero reserved bits are an error, in
/// lenient mode they are returned as warnings.
pub fn decode_with(word: u128, mode: DecodeMode) -> Result<Decoded, DecodeError> {
    let top = get(word, P_OPCODE, 8) as u8;
    let nibble = top >> 4;
    let mut res = Reserved(Vec::new());

    let instr = if opcode::is_alu_format(nibble) {
        res.zero(word, "low", 0, A_ZERO_BITS);
        let in1 = get(word, A_IN1, 4) as u8;
        let dest_raw = get(word, A_DEST, 16) as u16;
        let fproc_id = get(word, A_FPROC, 16) as u16;
        match nibble {
            opcode::REG_ALU => {
                res.zero(word, "fproc_id", A_FPROC, 16);
                res.zero(word, "dest", A_DEST + 4, 12);
                Instruction::RegAlu {
                    op: decode_alu_op(word)?,
                    in0: decode_in0(word, &mut res),
                    in1,
                    dest: (dest_raw & 0xf) as u8,
                }
            }
            opcode::JUMP => {
                res.zero(word, "ri", A_RI, 1);
                res.zero(word, "alu_op", A_ALU_OP, 3);
                res.zero(word, "in0", A_IN0, 32);
                res.zero(word, "in1", A_IN1, 4);
                res.zero(word, "fproc_id", A_FPROC, 16);
                Instruction::Jump { addr: dest_raw }
            }
            opcode::JUMP_COND => {
                res.zero(word, "fproc_id", A_FPROC, 16);
                Instruction::JumpCond {
                    op: decode_alu_op(word)?,
                    in0: decode_in0(word, &mut res),
                    in1,
                    addr: dest_raw,
                }
            }
            opcode::JUMP_FPROC => {
                res.zero(word, "in1", A_IN1, 4);
                Instruction::JumpFproc {
                    op: decode_alu_op(word)?,
                    in0: decode_in0(word, &mut res),
                    addr: dest_raw,
                    fproc_id,
                }
            }
            opcode::ALU_FPROC => {
                res.zero(word, "in1", A_IN1, 4);
                res.zero(word, "dest", A_DEST + 4, 12);
                Instruction::AluFproc {
                    op: decode_alu_op(word)?,
                    in0: decode_in0(word, &mut res),
                    dest: (dest_raw & 0xf) as u8,
                    fproc_id,
                }
            }
            opcode::INC_QCLK => {
                res.zero(word, "alu_op", A_ALU_OP, 3);
                res.zero(word, "in1", A_IN1, 4);
                res.zero(word, "dest", A_DEST, 16);
                res.zero(word, "fproc_id", A_FPROC, 16);
                Instruction::IncQclk {
                    in0: decode_in0(word, &mut res),
                }
            }
            _ => unreachable!("is_alu_format covers exactly these nibbles"),
        }
    } else {
        match top {
            opcode::PULSE_WRITE | opcode::PULSE_WRITE_TRIG => {
                res.zero(word, "low", 0, P_ZERO_BITS);
                let reg = get(word, P_REG, 4) as u8;
                let fields = decode_pulse_fields(word, &mut res);
                if top == opcode::PULSE_WRITE {
                    res.zero(word, "start_time", P_START, 32);
                    Instruction::PulseWrite { reg, fields }
                } else {
                    Instruction::PulseWriteTrig {
                        reg,
                        fields,
                        start_time: get(word, P_START, 32) as u32,
                    }
                }
            }
            opcode::IDLE => {
                res.zero(word, "low", 0, P_ZERO_BITS);
                res.zero(word, "pulse_fields", P_CFG, P_REG + 4 - P_CFG);
                Instruction::Idle {
                    end_time: get(word, P_START, 32) as u32,
                }
            }
            opcode::DONE | opcode::PHASE_RESET => {
                res.zero(word, "body", 0, P_OPCODE);
                if top == opcode::DONE {
                    Instruction::Done
                } else {
                    Instruction::PhaseReset
                }
            }
            _ => return Err(DecodeError::UnknownOpcode(top)),
        }
    };

    match mode {
        DecodeMode::Strict => match res.0.first() {
            Some(r) => Err(DecodeError::NonzeroReservedBits(*r)),
            None => Ok(Decoded {
                instr,
                warnings: Vec::new(),
            }),
        },
        DecodeMode::Lenient => Ok(Decoded {
            instr,
            warnings: res.0,
        }),
    }
}
