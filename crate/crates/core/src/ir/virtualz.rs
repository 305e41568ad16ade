//! Virtual-Z resolution.
//!
//! Each frequency carries a software phase, tracked block by block in layout
//! order. A virtual-Z adds to it and every later pulse at that frequency
//! absorbs it. Paths that meet must agree on every phase; frequencies whose
//! phase depends on the path must be bound to a phase register instead, and
//! their rotations become register adds.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use super::cfg::ControlFlowGraph;
use super::cores::CoreSet;
use super::program::{walk, FreqRef, IrProgram, Statement};
use super::scope::{bind_phase_freq, vz_cores};
use super::{Context, IrError};
use crate::asm::{RegType, Value};
use crate::isa::AluOp;

type Phases = BTreeMap<u64, f64>;

const PHASE_TOL: f64 = 1e-9;

fn same_phase(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d < PHASE_TOL || TAU - d < PHASE_TOL
}

struct Binding {
    var: String,
    scope: Vec<String>,
}

pub fn resolve_virtualz(prog: &IrProgram, ctx: &Context) -> Result<IrProgram, IrError> {
    let order = |reason: &str| IrError::InvalidPassOrder {
        pass: "resolve_virtualz".into(),
        reason: reason.into(),
    };
    let mut decls: BTreeMap<&str, (RegType, Option<&Vec<String>>)> = BTreeMap::new();
    let mut bad = None;
    walk(&prog.statements, &mut |s| match s {
        Statement::Declare { var, dtype, scope } => {
            decls.insert(var, (*dtype, scope.as_ref()));
        }
        Statement::BranchVar { .. } | Statement::BranchFproc { .. } | Statement::Loop { .. } => {
            bad = Some("control flow must be lowered first")
        }
        Statement::Gate { .. } | Statement::Read { .. } => bad = Some("gates must be resolved first"),
        _ => {}
    });
    if let Some(r) = bad {
        return Err(order(r));
    }

    let mut bound: BTreeMap<u64, Binding> = BTreeMap::new();
    for s in &prog.statements {
        if let Statement::BindPhase { var, qubit, freq } = s {
            let hz = bind_phase_freq(ctx, qubit, freq)?;
            let (dtype, scope) = decls
                .get(var.as_str())
                .copied()
                .ok_or_else(|| IrError::UndeclaredVariable(var.clone()))?;
            if dtype != RegType::Phase {
                return Err(IrError::BindPhase(format!("`{var}` is {dtype}, not phase")));
            }
            let scope = scope.ok_or_else(|| order("variables must be scoped first"))?;
            bound.insert(
                hz.to_bits(),
                Binding {
                    var: var.clone(),
                    scope: scope.clone(),
                },
            );
        }
    }

    let cfg = ControlFlowGraph::build(&prog.statements)?;
    let mut r = Resolver {
        ctx,
        bound: &bound,
        temps: BTreeMap::new(),
        decls: Vec::new(),
    };
    let mut entry: Vec<Option<Phases>> = vec![None; cfg.blocks.len()];
    let mut exit: Vec<Option<Phases>> = vec![None; cfg.blocks.len()];
    let mut out_blocks = Vec::with_capacity(cfg.blocks.len());
    for (b, block) in cfg.blocks.iter().enumerate() {
        let incoming: Vec<&Phases> = cfg
            .predecessors(b)
            .filter(|e| !cfg.is_back_edge(e))
            .filter_map(|e| exit[e.from].as_ref())
            .collect();
        let state = merge(&incoming, &block.label)?;
        entry[b] = Some(state.clone());
        let mut state = state;
        let stmts: Vec<&Statement> = block.stmts.iter().map(|&i| &prog.statements[i]).collect();
        out_blocks.push(r.block(&stmts, &mut state)?);
        exit[b] = Some(state);
    }
    for e in cfg.edges.iter().filter(|e| cfg.is_back_edge(e)) {
        if let (Some(from), Some(to)) = (&exit[e.from], &entry[e.to]) {
            merge(&[to, from], &cfg.blocks[e.to].label)?;
        }
    }

    let mut statements = r.decls;
    statements.extend(out_blocks.into_iter().flatten());
    Ok(IrProgram::new(statements))
}

/// Joins the phases of converging paths; they must agree.
fn merge(incoming: &[&Phases], block: &str) -> Result<Phases, IrError> {
    let Some((first, rest)) = incoming.split_first() else {
        return Ok(Phases::new());
    };
    let mut out = (*first).clone();
    for other in rest {
        let keys: Vec<u64> = out.keys().chain(other.keys()).copied().collect();
        for k in keys {
            let a = out.get(&k).copied().unwrap_or(0.0);
            let b = other.get(&k).copied().unwrap_or(0.0);
            if !same_phase(a, b) {
                return Err(IrError::InconsistentPhaseAtMerge {
                    freq_hz: f64::from_bits(k),
                    block: block.to_string(),
                });
            }
            out.insert(k, a);
        }
    }
    Ok(out)
}

struct Resolver<'a> {
    ctx: &'a Context<'a>,
    bound: &'a BTreeMap<u64, Binding>,
    /// (variable, base phase bits) → scratch register holding their sum.
    temps: BTreeMap<(String, u64), String>,
    decls: Vec<Statement>,
}

impl Resolver<'_> {
    fn temp(&mut self, b: &Binding, base: f64) -> String {
        let n = self.temps.len();
        let key = (b.var.clone(), base.to_bits());
        if let Some(t) = self.temps.get(&key) {
            return t.clone();
        }
        let name = format!("{}__{n}", b.var);
        self.decls.push(Statement::Declare {
            var: name.clone(),
            dtype: RegType::Phase,
            scope: Some(b.scope.clone()),
        });
        self.temps.insert(key, name.clone());
        name
    }

    fn block(&mut self, stmts: &[&Statement], phases: &mut Phases) -> Result<Vec<Statement>, IrError> {
        let mut out = Vec::with_capacity(stmts.len());
        // Start of the current run of same-gate pulses; register setup for a
        // gate goes before its first pulse so the pulses stay contiguous.
        let mut group_start = 0;
        let mut group_id = None;
        for &s in stmts {
            match s {
                Statement::BindPhase { .. } => {}
                Statement::VirtualZ { phase, qubit, freq } => {
                    let f = match (qubit, freq) {
                        (_, Some(f)) => f.clone(),
                        (Some(q), None) => FreqRef::Name(format!("{q}.freq")),
                        (None, None) => {
                            return Err(IrError::UnknownFrequency(
                                "virtual_z without qubit or freq".into(),
                            ))
                        }
                    };
                    let hz = self.ctx.cal.resolve_freq(&f)?;
                    match self.bound.get(&hz.to_bits()) {
                        Some(b) => out.push(Statement::Alu {
                            op: AluOp::Add,
                            lhs: Value::Num(*phase),
                            rhs: b.var.clone(),
                            out: b.var.clone(),
                            scope: Some(b.scope.clone()),
                        }),
                        None => {
                            *phases.entry(hz.to_bits()).or_insert(0.0) += phase;
                            let cores = vz_cores(self.ctx, qubit, freq);
                            if !cores.is_empty() {
                                out.push(Statement::PhaseSlot {
                                    scope: Some(self.ctx.cores.scope_names(&cores)),
                                });
                            }
                        }
                    }
                    group_id = None;
                }
                Statement::Pulse(p) => {
                    let mut p = p.clone();
                    let hz = self.ctx.cal.resolve_freq(&p.freq)?;
                    p.freq = FreqRef::Hz(hz);
                    let gid = p.group.as_ref().map(|g| g.id);
                    if gid.is_none() || gid != group_id {
                        group_start = out.len();
                    }
                    group_id = gid;
                    if p.phase_var.is_none() {
                        if let Some(b) = self.bound.get(&hz.to_bits()) {
                            if p.phase == 0.0 {
                                p.phase_var = Some(b.var.clone());
                            } else {
                                let t = self.temp(b, p.phase);
                                let core = self.ctx.cores.core_of(&p.dest)?;
                                out.insert(
                                    group_start,
                                    Statement::Alu {
                                        op: AluOp::Add,
                                        lhs: Value::Num(p.phase),
                                        rhs: b.var.clone(),
                                        out: t.clone(),
                                        scope: Some(self.ctx.cores.scope_names(&CoreSet::from([core]))),
                                    },
                                );
                                group_start += 1;
                                p.phase_var = Some(t);
                            }
                        } else if let Some(extra) = phases.get(&hz.to_bits()) {
                            p.phase += extra;
                        }
                    }
                    out.push(Statement::Pulse(p));
                }
                other => {
                    out.push(other.clone());
                    group_id = None;
                }
            }
        }
        Ok(out)
    }
}
