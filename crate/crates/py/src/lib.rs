//! Python bindings: compile, assemble and simulate from Python.
//!
//! Structured results (traces, shot records, reports) cross the boundary as
//! plain dicts and lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dproc_core::asm::{self, AsmProgram, CoreImage, CoreKey};
use dproc_core::ir::{IrProgram, Pass, SymbolTable, Target};
use dproc_core::isa;
use dproc_core::qbackend::{self, BackendFactory, ScriptedOutcomes};
use dproc_core::sim::{self, timeline, SimConfig};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyString};
use serde::Serialize;

create_exception!(dproc, CompileError, PyException, "IR compilation failed.");
create_exception!(dproc, AssembleError, PyException, "Assembly failed.");
create_exception!(dproc, SimulationError, PyException, "Simulation failed.");

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// JSON text of `obj`: strings pass through, anything else is dumped.
fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_string());
    }
    obj.py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()
}

fn parse<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_str(&json_text(obj)?).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Compilation inputs loaded from a config directory.
#[pyclass(name = "Target", module = "dproc")]
struct PyTarget {
    target: Target,
}

#[pymethods]
impl PyTarget {
    #[new]
    fn new(config_dir: PathBuf) -> PyResult<Self> {
        let target = Target::from_dir(&config_dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self { target })
    }

    /// Compiles an IR program (JSON text or a list of statement dicts).
    #[pyo3(signature = (ir, passes = None))]
    fn compile(&self, ir: &Bound<'_, PyAny>, passes: Option<Vec<String>>) -> PyResult<Build> {
        let prog = IrProgram::from_json(&json_text(ir)?).map_err(value_err)?;
        let passes = match passes {
            Some(p) => Pass::parse_list(&p.join(",")).map_err(value_err)?,
            None => Pass::DEFAULT.to_vec(),
        };
        let t = &self.target;
        let out = t
            .compile(&prog, &passes)
            .map_err(|e| CompileError::new_err(e.to_string()))?;
        let images = t
            .assemble(&out.asm)
            .map_err(|e| AssembleError::new_err(e.to_string()))?;
        Ok(Build {
            images,
            asm: Some(out.asm),
            symbols: Some(out.symbols),
            sim: t.sim_config(),
        })
    }

    /// Assembles a JSON assembly program.
    fn assemble(&self, program: &Bound<'_, PyAny>) -> PyResult<Build> {
        let prog = AsmProgram::from_json(&json_text(program)?).map_err(value_err)?;
        let images = self
            .target
            .assemble(&prog)
            .map_err(|e| AssembleError::new_err(e.to_string()))?;
        Ok(Build {
            images,
            asm: Some(prog),
            symbols: None,
            sim: self.target.sim_config(),
        })
    }
}

/// Assembled per-core images, ready to simulate.
#[pyclass(module = "dproc")]
struct Build {
    images: BTreeMap<CoreKey, CoreImage>,
    asm: Option<AsmProgram>,
    symbols: Option<SymbolTable>,
    sim: SimConfig,
}

impl Build {
    fn image(&self, core: usize) -> PyResult<&CoreImage> {
        self.images
            .values()
            .nth(core)
            .ok_or_else(|| PyIndexError::new_err(format!("no core {core}")))
    }

    fn factory(&self, machine: &sim::Machine, script: Option<&Bound<'_, PyAny>>) -> PyResult<BackendFactory> {
        if let Some(s) = script {
            let mut v: serde_json::Value = parse(s)?;
            if v.get("outcomes").is_none() {
                v = serde_json::json!({ "outcomes": v });
            }
            let outcomes: ScriptedOutcomes = serde_json::from_value(v).map_err(value_err)?;
            return Ok(BackendFactory::Scripted(outcomes));
        }
        let symbols = self.symbols.as_ref().ok_or_else(|| {
            PyValueError::new_err("no symbol table: pass a script, or compile from IR")
        })?;
        Ok(BackendFactory::statevector(symbols.bindings(machine), &self.sim))
    }

    fn machine(&self, strict: bool) -> PyResult<sim::Machine> {
        let mut cfg = self.sim.clone();
        cfg.strict = strict;
        sim::load(&self.images, &cfg).map_err(|e| SimulationError::new_err(e.to_string()))
    }
}

#[pymethods]
impl Build {
    /// Core keys, in image order.
    #[getter]
    fn cores(&self) -> Vec<String> {
        self.images.keys().map(|k| k.to_string()).collect()
    }

    #[getter]
    fn asm(&self) -> Option<String> {
        self.asm.as_ref().map(AsmProgram::to_json)
    }

    #[getter]
    fn symbols(&self) -> Option<String> {
        self.symbols.as_ref().map(SymbolTable::to_json)
    }

    fn binary<'py>(&self, py: Python<'py>, core: usize) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &isa::words_to_bytes(&self.image(core)?.binary)))
    }

    fn listing(&self, core: usize) -> PyResult<String> {
        isa::disassemble(&self.image(core)?.binary).map_err(value_err)
    }

    /// Writes binaries, buffers, symbols and the manifest; returns the
    /// manifest path.
    fn write(&self, out_dir: PathBuf) -> PyResult<String> {
        let io = |e: &dyn ToString| PyIOError::new_err(e.to_string());
        let symbols = match &self.symbols {
            Some(s) => {
                std::fs::create_dir_all(&out_dir).map_err(|e| io(&e))?;
                std::fs::write(out_dir.join("symbols.json"), s.to_json()).map_err(|e| io(&e))?;
                Some("symbols.json")
            }
            None => None,
        };
        asm::write_images(&self.images, &out_dir, symbols).map_err(|e| io(&e))?;
        Ok(out_dir.join(asm::MANIFEST_FILE).display().to_string())
    }

    /// One run. `script` maps qubits to outcome bits and selects the
    /// scripted backend; otherwise the statevector backend runs with `seed`.
    /// Returns the trace as a dict with an extra `timeline` list.
    #[pyo3(signature = (script = None, seed = 0, strict = true))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        script: Option<&Bound<'py, PyAny>>,
        seed: u64,
        strict: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mut m = self.machine(strict)?;
        let factory = self.factory(&m, script)?;
        let mut backend = factory
            .build(qbackend::shot_rng(seed, 0))
            .map_err(|e| SimulationError::new_err(e.to_string()))?;
        let trace = sim::run(&mut m, &mut backend).map_err(|e| SimulationError::new_err(e.to_string()))?;
        let out = to_py(py, &trace)?;
        out.set_item("timeline", to_py(py, &timeline(&trace))?)?;
        Ok(out)
    }

    /// `n` shots in parallel; returns one record dict per shot.
    #[pyo3(signature = (n, seed = 0, script = None))]
    fn shots<'py>(
        &self,
        py: Python<'py>,
        n: u64,
        seed: u64,
        script: Option<&Bound<'py, PyAny>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let records = self.run_shots(py, n, seed, script)?;
        to_py(py, &records)
    }

    /// Expectation table of `n` shots, overall and per mid-circuit outcome.
    #[pyo3(signature = (n, seed = 0, script = None))]
    fn report<'py>(
        &self,
        py: Python<'py>,
        n: u64,
        seed: u64,
        script: Option<&Bound<'py, PyAny>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let records = self.run_shots(py, n, seed, script)?;
        to_py(py, &qbackend::report(&records, seed))
    }
}

impl Build {
    fn run_shots(
        &self,
        py: Python<'_>,
        n: u64,
        seed: u64,
        script: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Vec<qbackend::ShotRecord>> {
        let m = self.machine(true)?;
        let factory = self.factory(&m, script)?;
        py.detach(|| qbackend::run_shots(&m, n, seed, |_, rng| factory.build(rng)))
            .map_err(|e| SimulationError::new_err(e.to_string()))
    }
}

/// Loads a manifest written by `Build.write` or the command-line tool.
/// Simulation settings come from `config_dir` when given.
#[pyfunction]
#[pyo3(signature = (path, config_dir = None))]
fn load_manifest(path: PathBuf, config_dir: Option<PathBuf>) -> PyResult<Build> {
    let (manifest, images) =
        asm::read_manifest(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let symbols = match manifest.symbols {
        Some(f) => {
            let text = std::fs::read_to_string(dir.join(f)).map_err(|e| PyIOError::new_err(e.to_string()))?;
            Some(SymbolTable::from_json(&text).map_err(value_err)?)
        }
        None => None,
    };
    let sim = match config_dir {
        Some(d) => Target::from_dir(&d)
            .map_err(|e| PyIOError::new_err(e.to_string()))?
            .sim_config(),
        None => SimConfig::default(),
    };
    Ok(Build {
        images,
        asm: None,
        symbols,
        sim,
    })
}

/// Listing of a little-endian binary.
#[pyfunction]
fn disassemble(data: &[u8]) -> PyResult<String> {
    let words = isa::bytes_to_words(data).map_err(value_err)?;
    isa::disassemble(&words).map_err(value_err)
}

/// Binary of a text listing.
#[pyfunction]
fn assemble_listing<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyBytes>> {
    let words = asm::assemble_listing(text).map_err(|e| AssembleError::new_err(e.to_string()))?;
    Ok(PyBytes::new(py, &isa::words_to_bytes(&words)))
}

#[pymodule]
pub fn dproc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTarget>()?;
    m.add_class::<Build>()?;
    m.add_function(wrap_pyfunction!(load_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(disassemble, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_listing, m)?)?;
    m.add("CompileError", m.py().get_type::<CompileError>())?;
    m.add("AssembleError", m.py().get_type::<AssembleError>())?;
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    Ok(())
}
