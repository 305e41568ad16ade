#![allow(dead_code)]

pub mod gen;
pub mod isa_gen;

use std::collections::BTreeMap;
use std::path::PathBuf;

use dproc_core::asm::{CoreImage, CoreKey};
use dproc_core::ir::{CompileOutput, IrProgram, Pass, Target};
use dproc_core::qbackend::{run_shots, ShotRecord, StateVectorBackend};
use dproc_core::sim::{self, Machine, Trace};
use serde_json::Value;

pub const QUBITS: [&str; 3] = ["Q0", "Q1", "Q2"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn target() -> Target {
    Target::from_dir(&fixture("")).expect("fixture target")
}

pub fn program(v: Value) -> IrProgram {
    IrProgram::from_json(&v.to_string()).expect("valid IR")
}

pub fn load_program(name: &str) -> IrProgram {
    IrProgram::from_json(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

pub fn compile(t: &Target, p: &IrProgram) -> CompileOutput {
    t.compile(p, &Pass::DEFAULT)
        .unwrap_or_else(|e| panic!("compile failed: {e}"))
}

pub fn images(t: &Target, out: &CompileOutput) -> BTreeMap<CoreKey, CoreImage> {
    t.assemble(&out.asm)
        .unwrap_or_else(|e| panic!("assemble failed: {e}"))
}

pub fn machine(t: &Target, out: &CompileOutput) -> Machine {
    sim::load(&images(t, out), &t.sim_config()).expect("load")
}

pub fn statevector(out: &CompileOutput, m: &Machine, seed: u64) -> StateVectorBackend {
    StateVectorBackend::seeded(
        QUBITS.iter().map(|q| q.to_string()).collect(),
        out.symbols.bindings(m),
        seed,
    )
    .unwrap()
}

pub fn run_once(m: &mut Machine, backend: &mut dyn dproc_core::qbackend::MeasurementBackend) -> Trace {
    sim::run(m, backend).unwrap_or_else(|e| panic!("sim failed: {e}"))
}

pub fn shots(out: &CompileOutput, m: &Machine, n: u64, seed: u64) -> Vec<ShotRecord> {
    let bindings = out.symbols.bindings(m);
    let qubits: Vec<String> = QUBITS.iter().map(|q| q.to_string()).collect();
    run_shots(m, n, seed, |_, rng| {
        StateVectorBackend::new(qubits.clone(), bindings.clone(), rng)
    })
    .unwrap_or_else(|e| panic!("shots failed: {e}"))
}

pub fn gate(name: &str, q: &str) -> Value {
    serde_json::json!({"name": name, "qubit": [q]})
}

pub fn read(q: &str) -> Value {
    serde_json::json!({"name": "read", "qubit": [q]})
}

pub fn vz(q: &str, phase: f64) -> Value {
    serde_json::json!({"name": "virtual_z", "qubit": q, "phase": phase})
}

/// Hadamard up to global phase from native gates.
pub fn h(q: &str) -> Vec<Value> {
    let half = std::f64::consts::FRAC_PI_2;
    vec![vz(q, half), gate("X90", q), vz(q, half)]
}

pub fn x(q: &str) -> Vec<Value> {
    vec![gate("X90", q), gate("X90", q)]
}

pub fn cz(a: &str, b: &str) -> Value {
    serde_json::json!({"name": "CZ", "qubit": [a, b]})
}

pub fn cnot(c: &str, t: &str) -> Vec<Value> {
    let mut v = h(t);
    v.push(cz(c, t));
    v.extend(h(t));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prep {
    Zero,
    One,
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    X,
    Y,
    Z,
}

fn prep(p: Prep, q: &str) -> Vec<Value> {
    match p {
        Prep::Zero => vec![],
        Prep::One => x(q),
        Prep::Plus => h(q),
        Prep::Minus => {
            let mut v = x(q);
            v.extend(h(q));
            v
        }
    }
}

/// Rotation taking `basis` eigenstates onto Z before a readout.
fn rotate(b: Basis, q: &str) -> Vec<Value> {
    match b {
        Basis::Z => vec![],
        Basis::X => h(q),
        Basis::Y => vec![gate("X90", q)],
    }
}

/// Teleports a prepared Q0 onto Q2 through a Q1-Q2 Bell pair, with
/// feed-forward corrections on Q2, then measures Q2 in `basis`.
pub fn teleport(state: Prep, basis: Basis) -> IrProgram {
    let mut v = vec![
        serde_json::json!({"name": "declare", "var": "q2_phase", "dtype": "phase", "scope": ["Q2"]}),
        serde_json::json!({"name": "bind_phase", "var": "q2_phase", "qubit": "Q2"}),
    ];
    v.extend(prep(state, "Q0"));
    v.extend(h("Q1"));
    v.extend(cnot("Q1", "Q2"));
    v.extend(cnot("Q0", "Q1"));
    v.extend(h("Q0"));
    v.push(read("Q0"));
    v.push(read("Q1"));
    v.push(serde_json::json!({
        "name": "branch_fproc", "cond_lhs": 1, "alu_cond": "eq", "func_id": "Q1.meas",
        "true": x("Q2"), "false": [], "scope": ["Q2"]
    }));
    v.push(serde_json::json!({
        "name": "branch_fproc", "cond_lhs": 1, "alu_cond": "eq", "func_id": "Q0.meas",
        "true": [vz("Q2", std::f64::consts::PI)], "false": [], "scope": ["Q2"]
    }));
    v.extend(rotate(basis, "Q2"));
    v.push(read("Q2"));
    program(Value::Array(v))
}
