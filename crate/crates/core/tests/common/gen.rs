//! Random structured IR programs over the three fixture qubits.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{cz, gate, read, vz, QUBITS};

#[derive(Debug, Clone, Copy)]
pub struct GenOpts {
    pub control: bool,
    pub fproc: bool,
    pub vz: bool,
    /// Follow every barrier with a uniquely scaled raw pulse on each of its
    /// qubits.
    pub markers: bool,
    pub max_depth: usize,
}

pub struct ProgGen {
    rng: ChaCha8Rng,
    opts: GenOpts,
    decls: Vec<Value>,
    next_var: usize,
    /// Set when a loop is generated. Cores leaving a loop have rewound time
    /// references, so loops and any control flow around one span all cores.
    looped: bool,
    pub markers: Vec<(f64, Vec<String>)>,
}

pub const MARKER_BASE: f64 = 0.05;
pub const MARKER_STEP: f64 = 0.003;

impl ProgGen {
    pub fn new(seed: u64, opts: GenOpts) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            opts,
            decls: Vec::new(),
            next_var: 0,
            looped: false,
            markers: Vec::new(),
        }
    }

    pub fn program(&mut self) -> Vec<Value> {
        self.decls.clear();
        self.markers.clear();
        let body = self.block(&QUBITS, 0, false);
        let mut out = std::mem::take(&mut self.decls);
        out.extend(body);
        out
    }

    fn var(&mut self, init: i32) -> String {
        self.next_var += 1;
        let v = format!("v{}", self.next_var);
        self.decls
            .push(json!({"name": "declare", "var": v, "dtype": "int"}));
        self.decls
            .push(json!({"name": "set_var", "var": v, "value": init}));
        v
    }

    fn subset(&mut self, qubits: &[&'static str], min: usize) -> Vec<&'static str> {
        loop {
            let s: Vec<&str> = qubits
                .iter()
                .copied()
                .filter(|_| self.rng.random_bool(0.6))
                .collect();
            if s.len() >= min.min(qubits.len()) && !s.is_empty() {
                return s;
            }
        }
    }

    /// Branch arms acting on `s`, and the branch scope: `s`, or every qubit
    /// when an arm contains a loop.
    fn arms(
        &mut self,
        s: &[&'static str],
        depth: usize,
        p_empty: f64,
    ) -> (Vec<Value>, Vec<Value>, Vec<&'static str>) {
        let outer = std::mem::replace(&mut self.looped, false);
        let t = self.block(s, depth + 1, true);
        let f = if self.rng.random_bool(p_empty) {
            vec![]
        } else {
            self.block(s, depth + 1, true)
        };
        let scope = if self.looped { QUBITS.to_vec() } else { s.to_vec() };
        self.looped |= outer;
        (t, f, scope)
    }

    fn block(&mut self, qubits: &[&'static str], depth: usize, nested: bool) -> Vec<Value> {
        let mut out = Vec::new();
        let n = self.rng.random_range(1..5);
        for _ in 0..n {
            let nest = self.opts.control && depth < self.opts.max_depth;
            let choice = self.rng.random_range(0..10);
            match choice {
                0..=2 => {
                    let q = *qubits.choose(&mut self.rng).unwrap();
                    if self.opts.vz && !nested && self.rng.random_bool(0.5) {
                        let k = self.rng.random_range(1..32);
                        out.push(vz(q, f64::from(k) * PI / 16.0));
                    }
                    out.push(gate("X90", q));
                }
                3 => {
                    let pairs: Vec<(&str, &str)> = [("Q0", "Q1"), ("Q1", "Q2")]
                        .into_iter()
                        .filter(|(a, b)| qubits.contains(a) && qubits.contains(b))
                        .collect();
                    match pairs.choose(&mut self.rng) {
                        Some((a, b)) => out.push(cz(a, b)),
                        None => out.push(gate("X90", qubits[0])),
                    }
                }
                4 if self.opts.vz && !nested => {
                    let k = self.rng.random_range(1..32);
                    out.push(vz(qubits.choose(&mut self.rng).unwrap(), f64::from(k) * PI / 16.0));
                }
                5 => {
                    let t = f64::from(self.rng.random_range(1..100)) * 4e-9;
                    let s = self.subset(qubits, 1);
                    out.push(json!({"name": "delay", "t": t, "qubit": s}));
                }
                6 => {
                    let s = self.subset(qubits, 2);
                    out.push(json!({"name": "barrier", "qubit": s}));
                    if self.opts.markers {
                        let amp = MARKER_BASE + MARKER_STEP * self.markers.len() as f64;
                        for q in &s {
                            out.push(json!({
                                "name": "pulse", "dest": format!("{q}.qdrv"), "freq": format!("{q}.freq"),
                                "amp": amp, "env": {"env_func": "square", "paradict": {"twidth": 2e-8}}
                            }));
                        }
                        self.markers
                            .push((amp, s.iter().map(|q| format!("{q}.qdrv")).collect()));
                    }
                }
                7 if nest => {
                    let init = self.rng.random_range(0..3);
                    let v = self.var(init);
                    let s = self.subset(qubits, 1);
                    let (t, f, scope) = self.arms(&s, depth, 0.4);
                    let cond = *["eq", "gt", "lt"].choose(&mut self.rng).unwrap();
                    out.push(json!({
                        "name": "branch_var", "cond_lhs": self.rng.random_range(0..3),
                        "alu_cond": cond,
                        "cond_rhs": v, "true": t, "false": f, "scope": scope
                    }));
                }
                8 if nest => {
                    let v = self.var(0);
                    let s = self.subset(qubits, 1);
                    let mut body = self.block(&s, depth + 1, true);
                    body.push(json!({"name": "alu", "op": "add", "lhs": 1, "rhs": v, "out": v}));
                    self.looped = true;
                    out.push(json!({
                        "name": "loop", "cond_lhs": self.rng.random_range(1..4),
                        "alu_cond": "gt", "cond_rhs": v, "body": body, "scope": QUBITS
                    }));
                }
                9 if self.opts.fproc && nest => {
                    let q = *qubits.choose(&mut self.rng).unwrap();
                    let s = self.subset(qubits, 1);
                    out.push(read(q));
                    let (t, f, scope) = self.arms(&s, depth, 0.5);
                    out.push(json!({
                        "name": "branch_fproc", "cond_lhs": 1, "alu_cond": "eq",
                        "func_id": format!("{q}.meas"), "true": t, "false": f, "scope": scope
                    }));
                }
                _ => out.push(gate("X90", qubits.choose(&mut self.rng).unwrap())),
            }
        }
        out
    }
}

/// Declares and binds a phase register for every qubit.
pub fn bind_all(prog: &[Value]) -> Vec<Value> {
    let mut out = Vec::new();
    for q in QUBITS {
        let v = format!("{}_phase", q.to_lowercase());
        out.push(json!({"name": "declare", "var": v, "dtype": "phase", "scope": [q]}));
        out.push(json!({"name": "bind_phase", "var": v, "qubit": q}));
    }
    out.extend(prog.iter().cloned());
    out
}

/// Deepest nesting of branch and loop blocks.
pub fn depth(stmts: &[Value]) -> usize {
    stmts
        .iter()
        .map(|s| {
            ["true", "false", "body"]
                .iter()
                .filter_map(|k| s[*k].as_array())
                .map(|b| 1 + depth(b))
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}
