//! Scope inference.
//!
//! A statement runs on the cores whose channels it drives, plus every core
//! that executes a nested statement, plus the cores holding the variables it
//! reads. Variables without a declared scope live on every core that uses
//! them. The two definitions feed each other, so both are iterated to a
//! fixpoint.

use std::collections::{BTreeMap, BTreeSet};

use super::cores::CoreSet;
use super::program::{FreqRef, IrProgram, Statement};
use super::{Context, IrError};

pub fn scope_pass(prog: &IrProgram, ctx: &Context) -> Result<IrProgram, Vec<IrError>> {
    let mut errors = Vec::new();
    prog.walk(&mut |s| {
        if matches!(s, Statement::Gate { .. } | Statement::Read { .. }) {
            errors.push(IrError::InvalidPassOrder {
                pass: "scope".into(),
                reason: format!("`{}` statements must be resolved first", s.kind()),
            });
        }
    });
    if !errors.is_empty() {
        errors.truncate(1);
        return Err(errors);
    }

    let mut inf = Inference::new(prog, ctx, &mut errors);
    if !errors.is_empty() {
        return Err(errors);
    }
    loop {
        let before = inf.vars.clone();
        inf.pass(&prog.statements);
        if inf.vars == before {
            break;
        }
    }
    let mut out = prog.clone();
    inf.write(&mut out.statements);
    errors.extend(inf.errors);
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

pub(crate) fn bind_phase_freq(
    ctx: &Context,
    qubit: &Option<String>,
    freq: &Option<FreqRef>,
) -> Result<f64, IrError> {
    match (qubit, freq) {
        (_, Some(f)) => ctx.cal.resolve_freq(f),
        (Some(q), None) => ctx.cal.resolve_freq(&FreqRef::Name(format!("{q}.freq"))),
        (None, None) => Err(IrError::BindPhase(
            "needs a qubit or a frequency".into(),
        )),
    }
}

/// Cores of the qubit an unbound virtual-Z acts on: its `qubit`, or the
/// `<qubit>` of a `<qubit>.freq` name.
pub(crate) fn vz_cores(ctx: &Context, qubit: &Option<String>, freq: &Option<FreqRef>) -> CoreSet {
    let q = match (qubit, freq) {
        (Some(q), _) => q.as_str(),
        (None, Some(FreqRef::Name(n))) => match n.strip_suffix(".freq") {
            Some(q) => q,
            None => return CoreSet::new(),
        },
        _ => return CoreSet::new(),
    };
    ctx.cores.cores_of(q).unwrap_or_default()
}

#[derive(Clone, PartialEq)]
struct VarScope {
    cores: CoreSet,
    declared: bool,
}

struct Inference<'a> {
    ctx: &'a Context<'a>,
    vars: BTreeMap<String, VarScope>,
    /// Bound frequency (Hz bits) → variable.
    bound: BTreeMap<u64, String>,
    /// Cores used anywhere; the scope of unscoped timing statements.
    program: CoreSet,
    errors: Vec<IrError>,
}

impl<'a> Inference<'a> {
    fn new(prog: &IrProgram, ctx: &'a Context<'a>, errors: &mut Vec<IrError>) -> Self {
        let mut vars = BTreeMap::new();
        let mut bound = BTreeMap::new();
        let mut program = CoreSet::new();
        let mut declared: BTreeSet<&str> = BTreeSet::new();
        prog.walk(&mut |s| {
            if let Statement::Declare { var, scope, .. } = s {
                if !declared.insert(var.as_str()) {
                    errors.push(IrError::DuplicateVariable(var.clone()));
                }
                let cores = match scope {
                    Some(sc) => ctx.cores.resolve(sc).unwrap_or_else(|e| {
                        errors.push(e);
                        CoreSet::new()
                    }),
                    None => CoreSet::new(),
                };
                vars.insert(
                    var.clone(),
                    VarScope {
                        cores,
                        declared: scope.is_some(),
                    },
                );
                return;
            }
            for v in s.vars() {
                if !declared.contains(v) {
                    errors.push(IrError::UndeclaredVariable(v.to_string()));
                }
            }
            match s {
                Statement::BindPhase { var, qubit, freq } => {
                    match bind_phase_freq(ctx, qubit, freq) {
                        Ok(hz) => {
                            if let Some(other) = bound.insert(hz.to_bits(), var.clone()) {
                                if &other != var {
                                    errors.push(IrError::BindPhase(format!(
                                        "{hz} Hz bound to both `{other}` and `{var}`"
                                    )));
                                }
                            }
                        }
                        Err(e) => errors.push(e),
                    }
                }
                Statement::Pulse(p) => match ctx.cores.core_of(&p.dest) {
                    Ok(c) => {
                        program.insert(c);
                    }
                    Err(e) => errors.push(e),
                },
                _ => {
                    if let Some(sc) = s.scope() {
                        match ctx.cores.resolve(sc) {
                            Ok(c) => program.extend(c),
                            Err(e) => errors.push(e),
                        }
                    }
                }
            }
        });
        if program.is_empty() {
            program = ctx.cores.all();
        }
        errors.sort_by_key(|e| e.to_string());
        errors.dedup();
        Self {
            ctx,
            vars,
            bound,
            program,
            errors: Vec::new(),
        }
    }

    fn bound_var(&self, freq: &FreqRef) -> Option<String> {
        let hz = self.ctx.cal.resolve_freq(freq).ok()?;
        self.bound.get(&hz.to_bits()).cloned()
    }

    fn vz_var(&self, qubit: &Option<String>, freq: &Option<FreqRef>) -> Option<String> {
        let f = match (qubit, freq) {
            (_, Some(f)) => f.clone(),
            (Some(q), None) => FreqRef::Name(format!("{q}.freq")),
            (None, None) => return None,
        };
        self.bound_var(&f)
    }

    fn var_cores(&self, v: &str) -> CoreSet {
        self.vars.get(v).map(|s| s.cores.clone()).unwrap_or_default()
    }

    /// Grows inferred variable scopes to cover `cores`.
    fn require(&mut self, vars: &[String], cores: &CoreSet) {
        for v in vars {
            if let Some(s) = self.vars.get_mut(v) {
                if !s.declared {
                    s.cores.extend(cores.iter().copied());
                }
            }
        }
    }

    fn explicit(&self, s: &Statement) -> CoreSet {
        s.scope()
            .and_then(|sc| self.ctx.cores.resolve(sc).ok())
            .unwrap_or_default()
    }

    /// Variables a statement needs on every core that runs it.
    fn reads(&self, s: &Statement) -> Vec<String> {
        match s {
            Statement::Pulse(p) => {
                let mut v: Vec<String> = p.phase_var.iter().cloned().collect();
                v.extend(self.bound_var(&p.freq));
                v
            }
            Statement::VirtualZ { qubit, freq, .. } => self.vz_var(qubit, freq).into_iter().collect(),
            _ => s.vars().into_iter().map(String::from).collect(),
        }
    }

    /// Cores a statement runs on under the current variable scopes.
    fn touch(&self, s: &Statement) -> CoreSet {
        match s {
            Statement::Pulse(p) => self.ctx.cores.core_of(&p.dest).into_iter().collect(),
            Statement::VirtualZ { qubit, freq, .. } => match self.vz_var(qubit, freq) {
                Some(v) => self.var_cores(&v),
                None => vz_cores(self.ctx, qubit, freq),
            },
            Statement::Declare { var, .. } | Statement::BindPhase { var, .. } => self.var_cores(var),
            Statement::SetVar { var, scope, .. } => match scope {
                Some(_) => self.explicit(s),
                None => self.var_cores(var),
            },
            Statement::Alu { out, scope, .. } => match scope {
                Some(_) => self.explicit(s),
                None => self.var_cores(out),
            },
            Statement::BranchVar { .. } | Statement::BranchFproc { .. } | Statement::Loop { .. } => {
                let mut t = self.explicit(s);
                for b in s.blocks() {
                    for inner in b {
                        t.extend(self.touch(inner));
                    }
                }
                for v in s.vars() {
                    t.extend(self.var_cores(v));
                }
                t
            }
            _ => match s.scope() {
                Some(_) => self.explicit(s),
                None => self.program.clone(),
            },
        }
    }

    fn pass(&mut self, stmts: &[Statement]) {
        for s in stmts {
            let t = self.touch(s);
            let reads = self.reads(s);
            self.require(&reads, &t);
            for b in s.blocks() {
                self.pass(b);
            }
        }
    }

    fn write(&mut self, stmts: &mut [Statement]) {
        for s in stmts.iter_mut() {
            let t = self.touch(s);
            self.check(s, &t);
            for b in s.blocks_mut() {
                self.write(b);
            }
            let names = self.ctx.cores.scope_names(&t);
            let keep_channels = matches!(s, Statement::Delay { .. } | Statement::Barrier { .. });
            if let Some(slot) = s.scope_mut() {
                if !(keep_channels && slot.is_some()) {
                    *slot = Some(names);
                }
            }
        }
    }

    fn check(&mut self, s: &Statement, t: &CoreSet) {
        let names = |cores: &CoreSet| self.ctx.cores.scope_names(cores).join(" | ");
        if s.scope().is_some() && !s.blocks().is_empty() {
            let explicit = self.explicit(s);
            if !t.is_subset(&explicit) {
                let extra: CoreSet = t.difference(&explicit).copied().collect();
                self.errors.push(IrError::ScopeViolation {
                    statement: s.kind().to_string(),
                    detail: format!("its body or condition also runs on {}", names(&extra)),
                });
            }
        }
        for v in self.reads(s) {
            let have = self.var_cores(&v);
            if !t.is_subset(&have) {
                let extra: CoreSet = t.difference(&have).copied().collect();
                self.errors.push(IrError::ScopeViolation {
                    statement: s.kind().to_string(),
                    detail: format!("variable `{v}` is not declared on {}", names(&extra)),
                });
            }
        }
    }
}
