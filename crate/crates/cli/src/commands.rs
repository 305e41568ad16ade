use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dproc_core::asm::{
    assemble_listing, read_manifest, write_images, AsmProgram, CoreImage, CoreKey,
    MANIFEST_FILE,
};
use dproc_core::ir::{lint, IrProgram, Pass, SymbolTable};
use dproc_core::isa::{bytes_to_words, disassemble, words_to_bytes};
use dproc_core::qbackend::{report, run_shots, shot_rng, BackendFactory, ShotError};
use dproc_core::sim::{self, timeline_csv, SimConfig, SimFailure, Trace};
use serde_json::{json, Value};

use crate::backend::BackendSpec;
use crate::error::{kind, CliError, SCHEMA};
use crate::project::{read_json, read_text, write, Project};

pub const SYMBOLS_FILE: &str = "symbols.json";
pub const SIM_FILE: &str = "sim.json";

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("value serializes");
    text.push('\n');
    write(path, text)
}

fn write_build(
    images: &BTreeMap<CoreKey, CoreImage>,
    out: &Path,
    symbols: Option<&SymbolTable>,
    sim: &SimConfig,
) -> Result<PathBuf, CliError> {
    if let Some(s) = symbols {
        write(&out.join(SYMBOLS_FILE), s.to_json())?;
    }
    write_images(images, out, symbols.map(|_| SYMBOLS_FILE))?;
    write_json(&out.join(SIM_FILE), sim)?;
    Ok(out.join(MANIFEST_FILE))
}

pub struct CompileArgs<'a> {
    pub ir: &'a Path,
    pub config: &'a Path,
    pub out: &'a Path,
    pub passes: Option<&'a str>,
    pub lenient: bool,
}

/// Compiles and assembles an IR program. Returns the manifest path and any
/// lint findings tolerated under `lenient`.
pub fn compile(a: &CompileArgs) -> Result<(PathBuf, Vec<Value>), CliError> {
    let project = Project::load(a.config)?;
    let t = &project.target;
    let prog = IrProgram::from_json(&read_text(a.ir)?).map_err(|e| CliError::json(a.ir, &e))?;
    let mut passes = match a.passes {
        Some(list) => {
            Pass::parse_list(list).map_err(|e| CliError::new(SCHEMA, "UnknownPass", e))?
        }
        None => project.passes.clone().unwrap_or_else(|| Pass::DEFAULT.to_vec()),
    };
    let linted = passes.contains(&Pass::Lint);
    if a.lenient {
        passes.retain(|&p| p != Pass::Lint);
    }
    let out = t.compile(&prog, &passes).map_err(|e| CliError::compile(&e))?;
    let mut warnings = Vec::new();
    if a.lenient && linted {
        let diags = lint(&out.program, &t.context())
            .map_err(|e| CliError::new(crate::error::COMPILE, &kind(&e), e))?;
        warnings = diags
            .iter()
            .map(|d| json!({"kind": kind(d), "pass": "lint", "message": d.to_string()}))
            .collect();
    }
    let images = t.assemble(&out.asm).map_err(|e| CliError::asm(a.ir, &e))?;
    write(&a.out.join("asm.json"), out.asm.to_json())?;
    let manifest = write_build(&images, a.out, Some(&out.symbols), &project.sim)?;
    Ok((manifest, warnings))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

/// JSON assembly becomes a full build; a text listing becomes one raw
/// binary named after the input.
pub fn asm(file: &Path, config: Option<&Path>, out: &Path) -> Result<PathBuf, CliError> {
    let text = read_text(file)?;
    if !is_json(file) {
        let words = assemble_listing(&text).map_err(|e| CliError::asm(file, &e))?;
        let stem = file.file_stem().unwrap_or_default().to_string_lossy();
        let path = out.join(format!("{stem}.bin"));
        write(&path, words_to_bytes(&words))?;
        return Ok(path);
    }
    let config = config.ok_or_else(|| {
        CliError::new(SCHEMA, "MissingConfig", "assembling JSON needs --config for channel and element settings")
    })?;
    let project = Project::load(config)?;
    let prog = AsmProgram::from_json(&text).map_err(|e| CliError::json(file, &e))?;
    let images = project.target.assemble(&prog).map_err(|e| CliError::asm(file, &e))?;
    write_build(&images, out, None, &project.sim)
}

pub fn disasm(bin: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(bin).map_err(|e| CliError::io(bin, e))?;
    let words = bytes_to_words(&bytes).map_err(|e| CliError::new(SCHEMA, "TruncatedBinary", e))?;
    disassemble(&words).map_err(|e| CliError::new(SCHEMA, &kind(&e), e))
}

pub struct SimArgs<'a> {
    pub manifest: &'a Path,
    pub config: Option<&'a Path>,
    pub backend: &'a BackendSpec,
    pub seed: u64,
    /// `Some(true)` strict, `Some(false)` lenient, `None` as configured.
    pub strict: Option<bool>,
}

struct Loaded {
    machine: sim::Machine,
    factory: BackendFactory,
}

fn load(a: &SimArgs) -> Result<Loaded, CliError> {
    let (manifest, images) = read_manifest(a.manifest)?;
    let dir = a.manifest.parent().unwrap_or(Path::new("."));
    let mut cfg = match a.config {
        Some(c) => Project::load(c)?.sim,
        None if dir.join(SIM_FILE).exists() => read_json(&dir.join(SIM_FILE))?,
        None => SimConfig::default(),
    };
    if let Some(s) = a.strict {
        cfg.strict = s;
    }
    let symbols = match &manifest.symbols {
        Some(f) => Some(
            SymbolTable::from_json(&read_text(&dir.join(f))?)
                .map_err(|e| CliError::json(&dir.join(f), &e))?,
        ),
        None => None,
    };
    let machine = sim::load(&images, &cfg).map_err(|e| CliError::sim(&e))?;
    let factory = a.backend.factory(symbols.as_ref(), &machine, &cfg)?;
    Ok(Loaded { machine, factory })
}

fn run_one(l: &Loaded, seed: u64, shot: u64) -> Result<Trace, (CliError, Option<Box<Trace>>)> {
    let mut backend = l
        .factory
        .build(shot_rng(seed, shot))
        .map_err(|e| (CliError::new(crate::error::SIM, &kind(&e), e), None))?;
    let mut m = l.machine.clone();
    sim::run(&mut m, &mut backend).map_err(|SimFailure { error, trace }| {
        let mut err = CliError::sim(&error);
        err.diagnostics[0]["shot"] = json!(shot);
        (err, Some(trace))
    })
}

fn write_trace(out: &Path, prefix: &str, trace: &Trace) -> Result<(), CliError> {
    write(&out.join(format!("{prefix}timeline.csv")), timeline_csv(trace))?;
    write(&out.join(format!("{prefix}trace.jsonl")), trace.to_jsonl())
}

/// Runs `shots` shots. Writes shot 0's timeline and trace, the shot records
/// and the report into `out`; a failing shot's partial trace is kept as
/// `failed_*`.
pub fn sim_shots(a: &SimArgs, shots: u64, out: &Path) -> Result<PathBuf, CliError> {
    let l = load(a)?;
    let records = run_shots(&l.machine, shots, a.seed, |_, rng| l.factory.build(rng));
    let records = match records {
        Ok(r) => r,
        Err(e) => {
            if let ShotError::Sim { failure, .. } = &e {
                write_trace(out, "failed_", &failure.trace)?;
            }
            return Err(CliError::shot(&e));
        }
    };
    if shots > 0 {
        let trace = run_one(&l, a.seed, 0).map_err(|(e, _)| e)?;
        write_trace(out, "", &trace)?;
    }
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    write(&out.join("shots.jsonl"), lines)?;
    let path = out.join("report.json");
    write_json(&path, &report(&records, a.seed))?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

/// One run (shot 0 of `seed`) rendered as a timeline. On failure the partial
/// trace is still rendered and returned alongside the error.
pub fn timeline(a: &SimArgs, format: Format) -> Result<String, (CliError, Option<String>)> {
    let l = load(a).map_err(|e| (e, None))?;
    let render = |t: &Trace| match format {
        Format::Csv => timeline_csv(t),
        Format::Jsonl => t.to_jsonl(),
    };
    run_one(&l, a.seed, 0)
        .map(|t| render(&t))
        .map_err(|(e, t)| (e, t.map(|t| render(&t))))
}
