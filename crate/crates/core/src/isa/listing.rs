//! Human-readable listing format.
//!
//! One line per word, optionally prefixed by `<address>:` and followed by a
//! `;` comment:
//!
//! ```text
//!    0: phase_reset
//!    1: pulse_trig r0 env=#0x000320 phase=#0x00000 freq=#0x000 amp=#0x0a7f cfg=#1 @5
//!    3: idle 1184
//!    4: jump_fproc eq #1, fproc 1 -> 6
//!    5: jump 7
//!    6: reg_alu add #3, r2 -> r5
//! ```
//!
//! Pulse field sources are `-` (keep), `reg` (from the instruction's register)
//! or `#<hex>` (immediate). ALU input 0 is `r<n>` or `#<decimal>`.
//! [`parse_listing`] accepts exactly what [`disassemble`] prints, so a listing
//! re-encodes to the same words.

use std::fmt::Write as _;

use thiserror::Error;

use super::{decode, AluOp, DecodeError, FieldSource, Instruction, Operand, PulseFields};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ListingError {
    #[error("word {index}: {source}")]
    Decode {
        index: usize,
        #[source]
        source: DecodeError,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn fmt_field<T: Copy + Into<u64>>(name: &str, src: FieldSource<T>, digits: usize) -> String {
    match src {
        FieldSource::Keep => format!("{name}=-"),
        FieldSource::Reg => format!("{name}=reg"),
        FieldSource::Imm(v) => format!("{name}=#0x{:0digits$x}", v.into()),
    }
}

fn fmt_operand(op: Operand) -> String {
    match op {
        Operand::Reg(r) => format!("r{r}"),
        Operand::Imm(v) => format!("#{v}"),
    }
}

fn fmt_pulse(reg: u8, f: &PulseFields) -> String {
    let cfg = match f.cfg {
        Some(c) => format!("cfg=#{c}"),
        None => "cfg=-".to_string(),
    };
    format!(
        "r{reg} {} {} {} {} {cfg}",
        fmt_field("env", f.env, 6),
        fmt_field("phase", f.phase, 5),
        fmt_field("freq", f.freq, 3),
        fmt_field("amp", f.amp, 4),
    )
}

/// Formats one instruction as a listing line body (no address prefix).
pub fn format_instruction(instr: &Instruction) -> String {
    match instr {
        Instruction::PulseWrite { reg, fields } => format!("pulse {}", fmt_pulse(*reg, fields)),
        Instruction::PulseWriteTrig {
            reg,
            fields,
            start_time,
        } => format!("pulse_trig {} @{start_time}", fmt_pulse(*reg, fields)),
        Instruction::RegAlu { op, in0, in1, dest } => format!(
            "reg_alu {} {}, r{in1} -> r{dest}",
            op.mnemonic(),
            fmt_operand(*in0)
        ),
        Instruction::Jump { addr } => format!("jump {addr}"),
        Instruction::JumpCond { op, in0, in1, addr } => format!(
            "jump_cond {} {}, r{in1} -> {addr}",
            op.mnemonic(),
            fmt_operand(*in0)
        ),
        Instruction::JumpFproc {
            op,
            in0,
            addr,
            fproc_id,
        } => format!(
            "jump_fproc {} {}, fproc {fproc_id} -> {addr}",
            op.mnemonic(),
            fmt_operand(*in0)
        ),
        Instruction::AluFproc {
            op,
            in0,
            dest,
            fproc_id,
        } => format!(
            "alu_fproc {} {}, fproc {fproc_id} -> r{dest}",
            op.mnemonic(),
            fmt_operand(*in0)
        ),
        Instruction::IncQclk { in0 } => format!("inc_qclk {}", fmt_operand(*in0)),
        Instruction::Idle { end_time } => format!("idle {end_time}"),
        Instruction::Done => "done".to_string(),
        Instruction::PhaseReset => "phase_reset".to_string(),
    }
}

/// Disassembles a binary into one line per word.
pub fn disassemble(words: &[u128]) -> Result<String, ListingError> {
    let mut out = String::new();
    for (index, &w) in words.iter().enumerate() {
        let instr = decode(w).map_err(|source| ListingError::Decode { index, source })?;
        writeln!(out, "{index:4}: {}", format_instruction(&instr)).expect("write to String");
    }
    Ok(out)
}

struct LineParser<'a> {
    line: usize,
    toks: std::vec::IntoIter<&'a str>,
}

impl<'a> LineParser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ListingError> {
        Err(ListingError::Parse {
            line: self.line,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Result<&'a str, ListingError> {
        match self.toks.next() {
            Some(t) => Ok(t),
            None => self.err("unexpected end of line"),
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ListingError> {
        let t = self.next()?;
        if t == tok {
            Ok(())
        } else {
            self.err(format!("expected `{tok}`, found `{t}`"))
        }
    }

    fn finish(&mut self) -> Result<(), ListingError> {
        match self.toks.next() {
            None => Ok(()),
            Some(t) => self.err(format!("trailing token `{t}`")),
        }
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T, ListingError> {
        let t = self.next()?;
        match t.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("invalid number `{t}`")),
        }
    }

    fn reg(&mut self) -> Result<u8, ListingError> {
        let t = self.next()?;
        match t.strip_prefix('r').and_then(|n| n.parse().ok()) {
            Some(r) => Ok(r),
            None => self.err(format!("expected register, found `{t}`")),
        }
    }

    fn alu_op(&mut self) -> Result<AluOp, ListingError> {
        let t = self.next()?;
        match AluOp::from_mnemonic(t) {
            Some(op) => Ok(op),
            None => self.err(format!("unknown ALU op `{t}`")),
        }
    }

    fn operand(&mut self) -> Result<Operand, ListingError> {
        let t = self.next()?;
        if let Some(v) = t.strip_prefix('#') {
            if let Ok(v) = v.parse() {
                return Ok(Operand::Imm(v));
            }
        } else if let Some(r) = t.strip_prefix('r').and_then(|n| n.parse().ok()) {
            return Ok(Operand::Reg(r));
        }
        self.err(format!("invalid operand `{t}`"))
    }

    fn field<T>(&mut self, name: &str) -> Result<FieldSource<T>, ListingError>
    where
        T: TryFrom<u64>,
    {
        let t = self.next()?;
        let Some(value) = t.strip_prefix(name).and_then(|r| r.strip_prefix('=')) else {
            return self.err(format!("expected `{name}=`, found `{t}`"));
        };
        match value {
            "-" => Ok(FieldSource::Keep),
            "reg" => Ok(FieldSource::Reg),
            v => {
                let parsed = v
                    .strip_prefix("#0x")
                    .and_then(|h| u64::from_str_radix(h, 16).ok())
                    .and_then(|n| T::try_from(n).ok());
                match parsed {
                    Some(n) => Ok(FieldSource::Imm(n)),
                    None => self.err(format!("invalid {name} value `{v}`")),
                }
            }
        }
    }

    fn pulse(&mut self) -> Result<(u8, PulseFields), ListingError> {
        let reg = self.reg()?;
        let env = self.field("env")?;
        let phase = self.field("phase")?;
        let freq = self.field("freq")?;
        let amp = self.field("amp")?;
        let t = self.next()?;
        let cfg = match t.strip_prefix("cfg=") {
            Some("-") => None,
            Some(v) => match v.strip_prefix('#').and_then(|n| n.parse().ok()) {
                Some(c) => Some(c),
                None => return self.err(format!("invalid cfg `{v}`")),
            },
            None => return self.err(format!("expected `cfg=`, found `{t}`")),
        };
        Ok((
            reg,
            PulseFields {
                env,
                phase,
                freq,
                amp,
                cfg,
            },
        ))
    }
}

fn parse_line(line: usize, body: &str) -> Result<Instruction, ListingError> {
    let toks: Vec<&str> = body
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();
    let mut p = LineParser {
        line,
        toks: toks.into_iter(),
    };
    let mnemonic = p.next()?;
    let instr = match mnemonic {
        "phase_reset" => Instruction::PhaseReset,
        "done" => Instruction::Done,
        "idle" => Instruction::Idle { end_time: p.num()? },
        "jump" => Instruction::Jump { addr: p.num()? },
        "inc_qclk" => Instruction::IncQclk { in0: p.operand()? },
        "pulse" => {
            let (reg, fields) = p.pulse()?;
            Instruction::PulseWrite { reg, fields }
        }
        "pulse_trig" => {
            let (reg, fields) = p.pulse()?;
            let t = p.next()?;
            let Some(start_time) = t.strip_prefix('@').and_then(|n| n.parse().ok()) else {
                return p.err(format!("expected `@<start_time>`, found `{t}`"));
            };
            Instruction::PulseWriteTrig {
                reg,
                fields,
                start_time,
            }
        }
        "reg_alu" => {
            let op = p.alu_op()?;
            let in0 = p.operand()?;
            let in1 = p.reg()?;
            p.expect("->")?;
            Instruction::RegAlu {
                op,
                in0,
                in1,
                dest: p.reg()?,
            }
        }
        "jump_cond" => {
            let op = p.alu_op()?;
            let in0 = p.operand()?;
            let in1 = p.reg()?;
            p.expect("->")?;
            Instruction::JumpCond {
                op,
                in0,
                in1,
                addr: p.num()?,
            }
        }
        "jump_fproc" | "alu_fproc" => {
            let op = p.alu_op()?;
            let in0 = p.operand()?;
            p.expect("fproc")?;
            let fproc_id = p.num()?;
            p.expect("->")?;
            if mnemonic == "jump_fproc" {
                Instruction::JumpFproc {
                    op,
                    in0,
                    addr: p.num()?,
                    fproc_id,
                }
            } else {
                Instruction::AluFproc {
                    op,
                    in0,
                    dest: p.reg()?,
                    fproc_id,
                }
            }
        }
        other => return p.err(format!("unknown mnemonic `{other}`")),
    };
    p.finish()?;
    Ok(instr)
}

/// Parses a listing back into instructions. Address prefixes and `;`
/// comments are ignored; blank lines are skipped.
pub fn parse_listing(text: &str) -> Result<Vec<Instruction>, ListingError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let mut body = raw.split(';').next().unwrap_or("").trim();
        if let Some((prefix, rest)) = body.split_once(':') {
            if prefix.trim().chars().all(|c| c.is_ascii_digit()) {
                body = rest.trim();
            }
        }
        if body.is_empty() {
            continue;
        }
        out.push(parse_line(i + 1, body)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::encode;

    #[test]
    fn empty_binary_gives_empty_listing() {
        assert_eq!(disassemble(&[]).unwrap(), "");
        assert!(parse_listing("").unwrap().is_empty());
    }

    #[test]
    fn decode_error_carries_index() {
        let words = [encode(&Instruction::Done).unwrap(), 0];
        let err = disassemble(&words).unwrap_err();
        assert!(matches!(err, ListingError::Decode { index: 1, .. }));
    }

    #[test]
    fn listing_is_a_fixed_point() {
        let fields = PulseFields {
            env: FieldSource::Imm(0x001320),
            phase: FieldSource::Reg,
            amp: FieldSource::Imm(2687),
            cfg: Some(1),
            ..Default::default()
        };
        let prog = [
            Instruction::PhaseReset,
            Instruction::PulseWriteTrig {
                reg: 3,
                fields,
                start_time: 5,
            },
            Instruction::RegAlu {
                op: AluOp::Sub,
                in0: Operand::Imm(-7),
                in1: 2,
                dest: 9,
            },
            Instruction::JumpCond {
                op: AluOp::Lt,
                in0: Operand::Reg(4),
                in1: 1,
                addr: 0,
            },
            Instruction::JumpFproc {
                op: AluOp::Eq,
                in0: Operand::Imm(1),
                addr: 6,
                fproc_id: 1,
            },
            Instruction::AluFproc {
                op: AluOp::Id1,
                in0: Operand::Imm(0),
                dest: 2,
                fproc_id: 200,
            },
            Instruction::IncQclk {
                in0: Operand::Reg(7),
            },
            Instruction::Idle { end_time: 1184 },
            Instruction::Jump { addr: 1 },
            Instruction::Done,
        ];
        let words: Vec<u128> = prog.iter().map(|i| encode(i).unwrap()).collect();
        let text = disassemble(&words).unwrap();
        assert_eq!(parse_listing(&text).unwrap(), prog);
        let again: Vec<u128> = parse_listing(&text)
            .unwrap()
            .iter()
            .map(|i| encode(i).unwrap())
            .collect();
        assert_eq!(disassemble(&again).unwrap(), text);
    }

    #[test]
    fn parse_errors_report_line() {
        let err = parse_listing("done\n\nfrobnicate 3\n").unwrap_err();
        assert_eq!(
            err,
            ListingError::Parse {
                line: 3,
                msg: "unknown mnemonic `frobnicate`".into()
            }
        );
        assert!(parse_listing("idle").is_err());
        assert!(parse_listing("done extra").is_err());
    }
}
