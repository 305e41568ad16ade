use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn fixtures() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures").to_string()
}

fn run(code: &str) {
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("dproc", wrap_pymodule!(dproc::dproc)(py)).unwrap();
        globals.set_item("FIXTURES", fixtures()).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python failed: {e}");
        }
    });
}

#[test]
fn reset_asm_scripted_run() {
    run(r#"
import json
t = dproc.Target(FIXTURES)
b = t.assemble(open(FIXTURES + "/reset_asm.json").read())
assert b.cores == ["Q1.qdrv,Q1.rdrv,Q1.rdlo"], b.cores
starts = {r["channel"]: r["start_cycle"] for r in b.run(script={"Q1": [1]})["timeline"]}
assert starts == {"Q1.rdrv": 5, "Q1.rdlo": 325, "Q1.qdrv": 1195}, starts
trace = b.run(script={"Q1": [0]})
assert trace["termination"] == "completed"
assert all(e["channel"] != "Q1.qdrv" for e in trace["events"])
assert dproc.assemble_listing(b.listing(0)) == b.binary(0)
assert dproc.disassemble(b.binary(0)) == b.listing(0)
"#);
}

#[test]
fn compile_and_shots() {
    run(r#"
t = dproc.Target(FIXTURES)
b = t.compile(open(FIXTURES + "/teleport_plus_x.json").read())
rep = b.report(2000, seed=3)
assert rep["shots"] == 2000
assert len(rep["conditioned"]) == 4
for row in rep["conditioned"]:
    assert row["expectations"][0]["expectation"] == 1.0, row
recs = b.shots(5, seed=3)
assert recs == b.shots(5, seed=3)
assert {r["shot"] for r in recs} == set(range(5))
"#);
}

#[test]
fn errors_map_to_exceptions() {
    run(r#"
t = dproc.Target(FIXTURES)
try:
    t.compile([{"name": "Y90", "qubit": ["Q0"]}])
    raise AssertionError("expected CompileError")
except dproc.CompileError as e:
    assert "Y90" in str(e)
try:
    t.compile("[{")
    raise AssertionError("expected ValueError")
except ValueError:
    pass
try:
    dproc.Target("/nonexistent")
    raise AssertionError("expected OSError")
except OSError:
    pass
"#);
}
