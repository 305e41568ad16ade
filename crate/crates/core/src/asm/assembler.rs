use std::collections::BTreeMap;

use super::config::{ChannelConfig, ElementConfig, ElementParams};
use super::program::{AsmInstr, AsmProgram, CoreKey, EnvValue, FuncId, RegType, Value};
use super::{
    AsmError, CoreImage, EnvBuffer, EnvEntry, FreqBuffer, RegisterInfo, MAX_FPROC_ID,
    PROGRAM_MEMORY_WORDS,
};
use crate::isa::{self, env_word, AluOp, FieldSource, Instruction, Operand, PulseFields};

/// Assembles every core of `program`. Output is a pure function of the inputs.
pub fn assemble(
    program: &AsmProgram,
    chan_cfg: &ChannelConfig,
    elem: &dyn ElementConfig,
) -> Result<BTreeMap<CoreKey, CoreImage>, AsmError> {
    program
        .cores
        .iter()
        .map(|(key, instrs)| Ok((key.clone(), assemble_core(key, instrs, chan_cfg, elem)?)))
        .collect()
}

struct EnvState {
    buf: EnvBuffer,
    index: BTreeMap<String, usize>,
}

struct FreqState {
    buf: FreqBuffer,
    index: BTreeMap<u64, usize>,
}

struct CoreAsm<'a> {
    key: &'a CoreKey,
    chan_cfg: &'a ChannelConfig,
    elem: &'a dyn ElementConfig,
    regs: BTreeMap<String, RegisterInfo>,
    labels: BTreeMap<String, u16>,
    envs: BTreeMap<String, EnvState>,
    freqs: BTreeMap<String, FreqState>,
}

fn assemble_core(
    key: &CoreKey,
    instrs: &[AsmInstr],
    chan_cfg: &ChannelConfig,
    elem: &dyn ElementConfig,
) -> Result<CoreImage, AsmError> {
    let mut elements = BTreeMap::new();
    for ch in key.channels() {
        let info = chan_cfg.get(ch)?;
        if let Some(other) = elements.insert(info.elem_ind, ch.clone()) {
            return Err(AsmError::DuplicateElement(other, ch.clone()));
        }
    }

    let mut a = CoreAsm {
        key,
        chan_cfg,
        elem,
        regs: BTreeMap::new(),
        labels: BTreeMap::new(),
        envs: BTreeMap::new(),
        freqs: BTreeMap::new(),
    };
    let at = |index: usize, op: &'static str| {
        move |e: AsmError| AsmError::At {
            core: key.to_string(),
            index,
            op,
            source: Box::new(e),
        }
    };

    // Pass 1: registers and label addresses.
    let mut addr = 0usize;
    for (i, ins) in instrs.iter().enumerate() {
        match ins {
            AsmInstr::DeclareReg { name, dtype } => {
                if a.regs.contains_key(name) {
                    return Err(at(i, ins.op_name())(AsmError::DuplicateRegister(name.clone())));
                }
                if a.regs.len() >= usize::from(isa::NUM_REGS) {
                    return Err(at(i, ins.op_name())(AsmError::TooManyRegisters));
                }
                let index = a.regs.len() as u8;
                a.regs.insert(name.clone(), RegisterInfo { index, dtype: *dtype });
            }
            AsmInstr::JumpLabel { dest_label } => {
                let addr16 = u16::try_from(addr).unwrap_or(u16::MAX);
                if a.labels.insert(dest_label.clone(), addr16).is_some() {
                    return Err(at(i, ins.op_name())(AsmError::DuplicateLabel(dest_label.clone())));
                }
            }
            _ => addr += 1,
        }
    }
    if addr > PROGRAM_MEMORY_WORDS {
        return Err(AsmError::ProgramTooLarge {
            words: addr,
            limit: PROGRAM_MEMORY_WORDS,
        });
    }

    // Pass 2: emission.
    let mut binary = Vec::with_capacity(addr);
    for (i, ins) in instrs.iter().enumerate() {
        if let Some(instr) = a.lower(ins).map_err(at(i, ins.op_name()))? {
            binary.push(isa::encode(&instr).map_err(|e| at(i, ins.op_name())(e.into()))?);
        }
    }

    Ok(CoreImage {
        key: key.clone(),
        binary,
        elements,
        env_buffers: a.envs.into_iter().map(|(k, v)| (k, v.buf)).collect(),
        freq_buffers: a.freqs.into_iter().map(|(k, v)| (k, v.buf)).collect(),
        registers: a.regs,
        labels: a.labels,
    })
}

fn int_imm(v: f64) -> Result<i32, AsmError> {
    if v.fract() == 0.0 && v >= f64::from(i32::MIN) && v <= f64::from(i32::MAX) {
        Ok(v as i32)
    } else {
        Err(AsmError::BadIntImmediate(v))
    }
}

fn mismatch(msg: String) -> AsmError {
    AsmError::RegisterTypeMismatch(msg)
}

impl CoreAsm<'_> {
    fn reg(&self, name: &str) -> Result<RegisterInfo, AsmError> {
        self.regs
            .get(name)
            .copied()
            .ok_or_else(|| AsmError::UndeclaredRegister(name.to_string()))
    }

    fn label(&self, name: &str) -> Result<u16, AsmError> {
        self.labels
            .get(name)
            .copied()
            .ok_or_else(|| AsmError::UndefinedLabel(name.to_string()))
    }

    /// Immediate in the units of a register type.
    fn typed_imm(&self, ty: RegType, v: f64) -> Result<i32, AsmError> {
        let p = self.elem.params();
        match ty {
            RegType::Int => int_imm(v),
            RegType::Phase => {
                if !v.is_finite() {
                    return Err(AsmError::BadIntImmediate(v));
                }
                Ok(self.elem.phase_word(p, v) as i32)
            }
            RegType::Amp => super::convert::amp_delta_word(v).ok_or(AsmError::AmplitudeOutOfRange(v)),
        }
    }

    /// Lowers input 0 given the type it must have.
    fn operand(&self, v: &Value, ty: RegType, what: &str) -> Result<Operand, AsmError> {
        match v {
            Value::Num(x) => Ok(Operand::Imm(self.typed_imm(ty, *x)?)),
            Value::Reg(name) => {
                let r = self.reg(name)?;
                if r.dtype != ty {
                    return Err(mismatch(format!(
                        "`{name}` is {} but {what} needs {ty}",
                        r.dtype
                    )));
                }
                Ok(Operand::Reg(r.index))
            }
        }
    }

    fn func_id(&self, f: &FuncId) -> Result<u16, AsmError> {
        let id = match f {
            FuncId::Id(n) => i64::try_from(*n).unwrap_or(i64::MAX),
            FuncId::Attr(ch, attr) => self
                .chan_cfg
                .get(ch)?
                .attr(attr)
                .ok_or_else(|| AsmError::UnknownAttribute {
                    channel: ch.clone(),
                    attr: attr.clone(),
                })?,
        };
        if !(0..=MAX_FPROC_ID).contains(&id) {
            return Err(AsmError::FprocIdOutOfRange(id));
        }
        Ok(id as u16)
    }

    fn params_for(&self, channel: &str) -> Result<ElementParams, AsmError> {
        let info = self.chan_cfg.get(channel)?;
        let p = info
            .elem_params
            .clone()
            .unwrap_or_else(|| self.elem.params().clone());
        p.validate().map_err(|reason| AsmError::InvalidElementParams {
            channel: channel.to_string(),
            reason,
        })?;
        Ok(p)
    }

    fn lower(&mut self, ins: &AsmInstr) -> Result<Option<Instruction>, AsmError> {
        let out = match ins {
            AsmInstr::DeclareReg { .. } | AsmInstr::JumpLabel { .. } => return Ok(None),
            AsmInstr::PhaseReset {} => Instruction::PhaseReset,
            AsmInstr::DoneStb {} => Instruction::Done,
            AsmInstr::Idle { end_time } => Instruction::Idle { end_time: *end_time },
            AsmInstr::JumpI { jump_label } => Instruction::Jump {
                addr: self.label(jump_label)?,
            },
            AsmInstr::IncQclk { in0 } => Instruction::IncQclk {
                in0: self.operand(in0, RegType::Int, "inc_qclk")?,
            },
            AsmInstr::RegAlu {
                in0,
                alu_op,
                in1_reg,
                out_reg,
            } => {
                let in1 = self.reg(in1_reg)?;
                let out = self.reg(out_reg)?;
                let in0_ty = self.check_alu_types(*alu_op, in0, in1.dtype, out.dtype)?;
                Instruction::RegAlu {
                    op: *alu_op,
                    in0: self.operand(in0, in0_ty, "input 0")?,
                    in1: in1.index,
                    dest: out.index,
                }
            }
            AsmInstr::JumpCond {
                in0,
                alu_op,
                in1_reg,
                jump_label,
            } => {
                let in1 = self.reg(in1_reg)?;
                Instruction::JumpCond {
                    op: *alu_op,
                    in0: self.operand(in0, in1.dtype, "input 0")?,
                    in1: in1.index,
                    addr: self.label(jump_label)?,
                }
            }
            AsmInstr::JumpFproc {
                in0,
                alu_op,
                jump_label,
                func_id,
            } => Instruction::JumpFproc {
                op: *alu_op,
                in0: self.any_operand(in0)?,
                addr: self.label(jump_label)?,
                fproc_id: self.func_id(func_id)?,
            },
            AsmInstr::AluFproc {
                in0,
                alu_op,
                func_id,
                out_reg,
            } => {
                let out = self.reg(out_reg)?;
                let in0 = if *alu_op == AluOp::Id0 {
                    self.operand(in0, out.dtype, "input 0")?
                } else {
                    if out.dtype != RegType::Int && !alu_op.is_comparison() && *alu_op != AluOp::Id1 {
                        return Err(mismatch(format!(
                            "FPROC results are int; `{out_reg}` is {}",
                            out.dtype
                        )));
                    }
                    self.any_operand(in0)?
                };
                Instruction::AluFproc {
                    op: *alu_op,
                    in0,
                    dest: out.index,
                    fproc_id: self.func_id(func_id)?,
                }
            }
            AsmInstr::Pulse {
                freq,
                phase,
                amp,
                env,
                start_time,
                dest,
            } => {
                let (reg, fields) = self.pulse(dest, freq, phase, amp, env)?;
                match start_time {
                    Some(t) => Instruction::PulseWriteTrig {
                        reg,
                        fields,
                        start_time: *t,
                    },
                    None => Instruction::PulseWrite { reg, fields },
                }
            }
        };
        Ok(Some(out))
    }

    /// Input 0 of an FPROC op: int immediate or a register of any type.
    fn any_operand(&self, v: &Value) -> Result<Operand, AsmError> {
        match v {
            Value::Num(x) => Ok(Operand::Imm(int_imm(*x)?)),
            Value::Reg(name) => Ok(Operand::Reg(self.reg(name)?.index)),
        }
    }

    /// Checks operand types of a `reg_alu` and returns the type input 0 must have.
    fn check_alu_types(
        &self,
        op: AluOp,
        in0: &Value,
        in1: RegType,
        out: RegType,
    ) -> Result<RegType, AsmError> {
        let in0_reg = match in0 {
            Value::Reg(n) => Some(self.reg(n)?.dtype),
            Value::Num(_) => None,
        };
        match op {
            AluOp::Eq | AluOp::Gt | AluOp::Lt => {
                if out != RegType::Int {
                    return Err(mismatch(format!("comparison result written to {out} register")));
                }
                Ok(in1)
            }
            AluOp::Add | AluOp::Sub => {
                if in1 != out || in0_reg.is_some_and(|t| t != in1) {
                    return Err(mismatch(format!(
                        "{} mixes {} and {}",
                        op.mnemonic(),
                        in0_reg.unwrap_or(in1),
                        if in1 != out { out } else { in1 }
                    )));
                }
                Ok(in1)
            }
            AluOp::Id0 => Ok(out),
            AluOp::Id1 => {
                if in1 != out {
                    return Err(mismatch(format!("id1 copies {in1} into {out}")));
                }
                Ok(in0_reg.unwrap_or(in1))
            }
        }
    }

    fn pulse(
        &mut self,
        dest: &str,
        freq: &Option<Value>,
        phase: &Option<Value>,
        amp: &Option<Value>,
        env: &Option<EnvValue>,
    ) -> Result<(u8, PulseFields), AsmError> {
        if !self.key.contains(dest) {
            return Err(AsmError::ChannelNotInCore {
                channel: dest.to_string(),
                core: self.key.to_string(),
            });
        }
        let info = self.chan_cfg.get(dest)?;
        let cfg = info.elem_ind;
        let params = self.params_for(dest)?;
        let clock = self.chan_cfg.clock_hz;

        let mut uses: Vec<(&str, RegType, &str)> = Vec::new();
        for (v, ty, field) in [
            (freq.as_ref(), RegType::Int, "freq"),
            (phase.as_ref(), RegType::Phase, "phase"),
            (amp.as_ref(), RegType::Amp, "amp"),
        ] {
            if let Some(Value::Reg(n)) = v {
                uses.push((n, ty, field));
            }
        }
        if let Some(EnvValue::Reg(n)) = env {
            uses.push((n, RegType::Int, "env"));
        }
        let mut reg: Option<(&str, RegisterInfo)> = None;
        for (name, want, field) in uses {
            let r = self.reg(name)?;
            if r.dtype != want {
                return Err(mismatch(format!(
                    "pulse {field} needs a {want} register; `{name}` is {}",
                    r.dtype
                )));
            }
            if let Some((other, o)) = reg {
                if o.index != r.index {
                    return Err(AsmError::RegisterConflict(other.to_string(), name.to_string()));
                }
            }
            reg = Some((name, r));
        }
        let reg_index = reg.map_or(0, |(_, r)| r.index);

        let mut fields = PulseFields {
            cfg: Some(cfg),
            ..PulseFields::default()
        };
        fields.phase = match phase {
            None => FieldSource::Keep,
            Some(Value::Reg(_)) => FieldSource::Reg,
            Some(Value::Num(x)) => FieldSource::Imm(self.elem.phase_word(&params, *x)),
        };
        fields.amp = match amp {
            None => FieldSource::Keep,
            Some(Value::Reg(_)) => FieldSource::Reg,
            Some(Value::Num(x)) => FieldSource::Imm(self.elem.amp_word(&params, *x)?),
        };
        fields.freq = match freq {
            None => FieldSource::Keep,
            Some(Value::Reg(_)) => FieldSource::Reg,
            Some(Value::Num(f)) => {
                let word = self.elem.freq_entry(&params, clock, *f)?;
                FieldSource::Imm(self.freq_addr(dest, &params, *f, word)?)
            }
        };
        fields.env = match env {
            None => FieldSource::Keep,
            Some(EnvValue::Reg(_)) => FieldSource::Reg,
            Some(EnvValue::Spec(spec)) => {
                let canon = serde_json::to_string(spec).expect("envelope spec serializes");
                let state = self.envs.entry(dest.to_string()).or_insert_with(|| EnvState {
                    buf: EnvBuffer::default(),
                    index: BTreeMap::new(),
                });
                let idx = match state.index.get(&canon) {
                    Some(&i) => i,
                    None => {
                        let data = self.elem.envelope(&params, clock, spec)?;
                        if data.cycles >= 1 << isa::ENV_LEN_BITS {
                            return Err(AsmError::EnvelopeTooLong(data.cycles));
                        }
                        let addr = state.buf.entries.last().map_or(0, |e| e.addr + e.cycles);
                        if addr + data.cycles > params.env_depth {
                            return Err(AsmError::BufferOverflow {
                                channel: dest.to_string(),
                                buffer: "envelope",
                                needed: (addr + data.cycles) as usize,
                                capacity: params.env_depth as usize,
                            });
                        }
                        state.buf.samples.extend_from_slice(&data.samples);
                        state.buf.entries.push(EnvEntry {
                            addr,
                            cycles: data.cycles,
                        });
                        state.index.insert(canon, state.buf.entries.len() - 1);
                        state.buf.entries.len() - 1
                    }
                };
                let e = &state.buf.entries[idx];
                FieldSource::Imm(env_word(e.addr, e.cycles))
            }
        };
        Ok((reg_index, fields))
    }

    fn freq_addr(
        &mut self,
        channel: &str,
        params: &ElementParams,
        freq: f64,
        word: u32,
    ) -> Result<u16, AsmError> {
        let state = self.freqs.entry(channel.to_string()).or_insert_with(|| FreqState {
            buf: FreqBuffer::default(),
            index: BTreeMap::new(),
        });
        if let Some(&i) = state.index.get(&freq.to_bits()) {
            return Ok(i as u16);
        }
        let i = state.buf.words.len();
        if i + 1 > params.freq_depth as usize {
            return Err(AsmError::BufferOverflow {
                channel: channel.to_string(),
                buffer: "frequency",
                needed: i + 1,
                capacity: params.freq_depth as usize,
            });
        }
        state.buf.words.push(word);
        state.buf.freqs.push(freq);
        state.index.insert(freq.to_bits(), i);
        Ok(i as u16)
    }
}
