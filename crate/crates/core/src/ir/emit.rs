//! Per-core assembly and the debug symbol table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cfg::stmt_cores;
use super::cores::CoreSet;
use super::program::{FreqRef, FuncRef, IrProgram, Statement};
use super::{Context, IrError};
use crate::asm::{AsmInstr, AsmProgram, CoreKey, EnvValue, FuncId, Value};
use crate::isa::AluOp;
use crate::qbackend::GateBinding;
use crate::sim::Machine;

/// Where one IR pulse landed in program memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub core: String,
    pub addr: u16,
    /// Index of the statement in the emitted IR program.
    pub index: usize,
    pub channel: String,
    pub start_time: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub qubits: Vec<String>,
    #[serde(default)]
    pub base_phase: f64,
    #[serde(default)]
    pub primary: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolTable {
    pub entries: Vec<SymbolEntry>,
}

impl SymbolTable {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("symbol table serializes")
    }

    /// Gate bindings keyed by (simulator core index, address).
    pub fn bindings(&self, machine: &Machine) -> BTreeMap<(usize, u16), GateBinding> {
        let keys: Vec<&CoreKey> = machine.cores().iter().map(|c| &c.key).collect();
        self.bindings_for(&keys)
    }

    /// As [`SymbolTable::bindings`], with core `i` being `keys[i]`.
    pub fn bindings_for(&self, keys: &[&CoreKey]) -> BTreeMap<(usize, u16), GateBinding> {
        let index: BTreeMap<String, usize> = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.to_string(), i))
            .collect();
        self.entries
            .iter()
            .filter_map(|e| {
                let core = *index.get(&e.core)?;
                let gate = e.gate.clone()?;
                Some((
                    (core, e.addr),
                    GateBinding {
                        gate,
                        qubits: e.qubits.clone(),
                        base_phase: e.base_phase,
                        primary: e.primary,
                    },
                ))
            })
            .collect()
    }
}

fn not_ready(what: &str) -> IrError {
    IrError::InvalidPassOrder {
        pass: "emit".into(),
        reason: format!("{what}; run the scheduling passes first"),
    }
}

/// Walks the lowered, scheduled program once per core, emitting the
/// statements that core executes between a `phase_reset` and a `done_stb`.
pub fn emit(prog: &IrProgram, ctx: &Context) -> Result<(AsmProgram, SymbolTable), IrError> {
    let mut used = CoreSet::new();
    let mut scoped = Vec::with_capacity(prog.statements.len());
    for s in &prog.statements {
        match s {
            Statement::Gate { .. } | Statement::Read { .. } => {
                return Err(not_ready("gates are unresolved"))
            }
            Statement::BranchVar { .. } | Statement::BranchFproc { .. } | Statement::Loop { .. } => {
                return Err(not_ready("control flow is not lowered"))
            }
            Statement::VirtualZ { .. } | Statement::BindPhase { .. } => {
                return Err(not_ready("virtual-Z is unresolved"))
            }
            Statement::Pulse(_) => {}
            _ if s.scope().is_none() => return Err(not_ready("statements are unscoped")),
            _ => {}
        }
        let cores = stmt_cores(s, &ctx.cores)?;
        used.extend(cores.iter().copied());
        scoped.push(cores);
    }

    let mut asm = AsmProgram::default();
    let mut symbols = SymbolTable::default();
    for core in used {
        let key = ctx.cores.key(core).clone();
        let mut out = Vec::new();
        if ctx.opts.phase_reset {
            out.push(AsmInstr::PhaseReset {});
        }
        let mut addr = out.len() as u16;
        for (index, s) in prog.statements.iter().enumerate() {
            if !scoped[index].contains(&core) {
                continue;
            }
            let before = out.len();
            if let Statement::Pulse(p) = s {
                let start = p
                    .start_time
                    .ok_or_else(|| not_ready("a pulse has no start time"))?;
                let start32 = u32::try_from(start).map_err(|_| {
                    IrError::UnschedulableProgram(format!("start time {start} overflows"))
                })?;
                let freq = match &p.freq {
                    FreqRef::Hz(f) => *f,
                    f @ FreqRef::Name(_) => ctx.cal.resolve_freq(f)?,
                };
                let g = p.group.as_ref();
                symbols.entries.push(SymbolEntry {
                    core: key.to_string(),
                    addr,
                    index,
                    channel: p.dest.clone(),
                    start_time: start,
                    gate: g.map(|g| g.gate.clone()),
                    qubits: g.map(|g| g.qubits.clone()).unwrap_or_default(),
                    base_phase: g.map_or(0.0, |g| g.base_phase),
                    primary: g.is_some_and(|g| g.primary),
                });
                out.push(AsmInstr::Pulse {
                    freq: Some(Value::Num(freq)),
                    phase: Some(match &p.phase_var {
                        Some(v) => Value::Reg(v.clone()),
                        None => Value::Num(p.phase),
                    }),
                    amp: Some(Value::Num(p.amp)),
                    env: Some(EnvValue::Spec(p.env.clone())),
                    start_time: Some(start32),
                    dest: p.dest.clone(),
                });
            } else {
                lower_stmt(s, &mut out)?;
            }
            addr += out[before..].iter().filter(|i| i.emits_word()).count() as u16;
        }
        out.push(AsmInstr::DoneStb {});
        asm.cores.insert(key, out);
    }
    Ok((asm, symbols))
}

fn time32(v: Option<u64>, what: &str) -> Result<u32, IrError> {
    let v = v.ok_or_else(|| not_ready(&format!("{what} is not set")))?;
    u32::try_from(v).map_err(|_| IrError::UnschedulableProgram(format!("{what} {v} overflows")))
}

fn lower_stmt(s: &Statement, out: &mut Vec<AsmInstr>) -> Result<(), IrError> {
    match s {
        Statement::Declare { var, dtype, .. } => out.push(AsmInstr::DeclareReg {
            name: var.clone(),
            dtype: *dtype,
        }),
        Statement::SetVar { var, value, .. } => out.push(AsmInstr::RegAlu {
            in0: Value::Num(*value),
            alu_op: AluOp::Id0,
            in1_reg: var.clone(),
            out_reg: var.clone(),
        }),
        Statement::Alu {
            op, lhs, rhs, out: o, ..
        } => out.push(AsmInstr::RegAlu {
            in0: lhs.clone(),
            alu_op: *op,
            in1_reg: rhs.clone(),
            out_reg: o.clone(),
        }),
        Statement::Idle { end_time, .. } => out.push(AsmInstr::Idle {
            end_time: time32(Some(*end_time), "idle end")?,
        }),
        Statement::IncQclk { value, .. } => out.push(AsmInstr::IncQclk {
            in0: Value::Num(*value as f64),
        }),
        Statement::Done { .. } => out.push(AsmInstr::DoneStb {}),
        Statement::JumpLabel { label, .. } => out.push(AsmInstr::JumpLabel {
            dest_label: label.clone(),
        }),
        Statement::JumpI { label, .. } => out.push(AsmInstr::JumpI {
            jump_label: label.clone(),
        }),
        Statement::JumpCond {
            cond_lhs,
            alu_cond,
            cond_rhs,
            label,
            ..
        } => out.push(AsmInstr::JumpCond {
            in0: cond_lhs.clone(),
            alu_op: *alu_cond,
            in1_reg: cond_rhs.clone(),
            jump_label: label.clone(),
        }),
        Statement::JumpFproc {
            cond_lhs,
            alu_cond,
            func_id,
            label,
            wait,
            ..
        } => {
            let FuncRef::Id(id) = func_id else {
                return Err(IrError::InvalidPassOrder {
                    pass: "emit".into(),
                    reason: "FPROC channels are unresolved".into(),
                });
            };
            if let Some(w) = wait {
                out.push(AsmInstr::Idle {
                    end_time: time32(w.until, "FPROC wait")?,
                });
            }
            out.push(AsmInstr::JumpFproc {
                in0: cond_lhs.clone(),
                alu_op: *alu_cond,
                jump_label: label.clone(),
                func_id: FuncId::Id(u64::from(*id)),
            });
        }
        Statement::LoopHead { align, .. } => out.push(AsmInstr::Idle {
            end_time: time32(*align, "loop alignment")?,
        }),
        Statement::LoopTail { end, period, .. } => {
            out.push(AsmInstr::Idle {
                end_time: time32(*end, "loop end")?,
            });
            let p = time32(*period, "loop period")?;
            out.push(AsmInstr::IncQclk {
                in0: Value::Num(-f64::from(p)),
            });
        }
        Statement::Delay { .. } | Statement::Barrier { .. } | Statement::PhaseSlot { .. } => {}
        other => {
            return Err(IrError::InvalidPassOrder {
                pass: "emit".into(),
                reason: format!("unexpected `{}` statement", other.kind()),
            })
        }
    }
    Ok(())
}
