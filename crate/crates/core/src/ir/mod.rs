//! QubiC-style intermediate representation and the pass pipeline that
//! lowers it to per-core assembly.
//!
//! A program is a single-threaded list of [`Statement`]s with nested blocks.
//! The default pipeline is
//!
//! 1. `resolve_gates`: gates and reads become calibrated pulses and virtual-Z
//!    rotations;
//! 2. `scope`: every statement learns the set of cores that execute it;
//! 3. `lower_control_flow`: branches and loops become labels and jumps;
//! 4. `resolve_virtualz`: virtual-Z phases are folded into pulse phases, or
//!    become register adds for frequencies bound with `bind_phase`;
//! 5. `resolve_fproc`: named result channels become function ids plus a
//!    readiness constraint;
//! 6. `schedule`: pulses get start times and loop/FPROC waits get values;
//! 7. `lint`: the schedule is checked against the core timing model;
//! 8. `emit`: per-core assembly and a debug symbol table.
//!
//! Time inside the scheduler is in clock cycles of each core's time
//! reference. Loops rewind their cores' references at the back edge, so a
//! loop body has the same start times on every iteration.

mod calibration;
mod cfg;
mod cores;
mod emit;
mod fproc;
mod gates;
mod lower;
mod program;
mod schedule;
mod scope;
mod virtualz;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{
    AsmError, AsmProgram, ChannelConfig, CoreImage, CoreKey, DefaultElementConfig, ElementConfig,
    EnvelopeError,
};
use crate::sim::SimConfig;
use crate::timing::TimingModel;

pub use calibration::{CalEntry, FprocChannel, FprocChannelMap, GateCalibration};
pub use cfg::{BasicBlock, ControlFlowGraph, Edge, EdgeKind};
pub use cores::{CoreMap, CoreSet};
pub use emit::{emit, SymbolEntry, SymbolTable};
pub use fproc::resolve_fproc;
pub use gates::resolve_gates;
pub use lower::lower_control_flow;
pub use program::{
    walk, walk_mut, FprocWait, FreqRef, FuncRef, IrProgram, PulseGroup, PulseStmt, Statement,
};
pub use schedule::{lint, schedule, Diagnostic};
pub use scope::scope_pass;
pub use virtualz::resolve_virtualz;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IrError {
    #[error("no calibration for gate `{gate}` on [{qubits}]")]
    UnknownGate { gate: String, qubits: String },
    #[error("unknown frequency `{0}`")]
    UnknownFrequency(String),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("scope entry `{0}` names no channel, core or qubit")]
    UnknownScope(String),
    #[error("variable `{0}` used before declaration")]
    UndeclaredVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("{statement}: {detail}")]
    ScopeViolation { statement: String, detail: String },
    #[error("bind_phase: {0}")]
    BindPhase(String),
    #[error(
        "virtual-Z phase at {freq_hz} Hz differs between paths into block `{block}`; bind the frequency to a phase variable with bind_phase"
    )]
    InconsistentPhaseAtMerge { freq_hz: f64, block: String },
    #[error("unknown FPROC channel `{0}`")]
    UnknownFprocChannel(String),
    #[error("invalid FPROC channel map: {0}")]
    InvalidFprocMap(String),
    #[error("unschedulable program: {0}")]
    UnschedulableProgram(String),
    #[error("pass `{pass}` cannot run here: {reason}")]
    InvalidPassOrder { pass: String, reason: String },
    #[error("unknown pass `{0}`")]
    UnknownPass(String),
    #[error("label `{0}` is not defined")]
    UndefinedLabel(String),
    #[error("label `{0}` defined twice")]
    DuplicateLabel(String),
    #[error("envelope on `{channel}`: {source}")]
    Envelope {
        channel: String,
        source: EnvelopeError,
    },
    #[error("{} lint diagnostic(s): {}", .0.len(), .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Lint(Vec<Diagnostic>),
    #[error("assembler: {0}")]
    Asm(#[from] AsmError),
}

/// Errors of one pass.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct CompileError {
    pub pass: Pass,
    pub errors: Vec<IrError>,
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pass `{}`: ", self.pass)?;
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    ResolveGates,
    Scope,
    LowerControlFlow,
    ResolveVirtualz,
    ResolveFproc,
    Schedule,
    Lint,
    Emit,
}

impl Pass {
    pub const DEFAULT: [Pass; 8] = [
        Pass::ResolveGates,
        Pass::Scope,
        Pass::LowerControlFlow,
        Pass::ResolveVirtualz,
        Pass::ResolveFproc,
        Pass::Schedule,
        Pass::Lint,
        Pass::Emit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pass::ResolveGates => "resolve_gates",
            Pass::Scope => "scope",
            Pass::LowerControlFlow => "lower_control_flow",
            Pass::ResolveVirtualz => "resolve_virtualz",
            Pass::ResolveFproc => "resolve_fproc",
            Pass::Schedule => "schedule",
            Pass::Lint => "lint",
            Pass::Emit => "emit",
        }
    }

    /// Parses a comma-separated pass list.
    pub fn parse_list(s: &str) -> Result<Vec<Pass>, IrError> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Pass::from_str)
            .collect()
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pass {
    type Err = IrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pass::DEFAULT
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| IrError::UnknownPass(s.to_string()))
    }
}

fn default_prologue() -> u64 {
    5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileOptions {
    /// Earliest start time of the first pulse on every core.
    #[serde(default = "default_prologue")]
    pub prologue_offset: u64,
    /// Begin every core with `phase_reset`.
    #[serde(default = "default_true")]
    pub phase_reset: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            prologue_offset: default_prologue(),
            phase_reset: true,
        }
    }
}

/// Everything the passes need besides the program.
pub struct Context<'a> {
    pub cal: &'a GateCalibration,
    pub channels: &'a ChannelConfig,
    pub elements: &'a dyn ElementConfig,
    pub fproc: &'a FprocChannelMap,
    pub timing: TimingModel,
    pub opts: CompileOptions,
    pub cores: CoreMap,
    durations: RefCell<HashMap<(String, String), u64>>,
}

impl<'a> Context<'a> {
    pub fn new(
        cal: &'a GateCalibration,
        channels: &'a ChannelConfig,
        elements: &'a dyn ElementConfig,
        fproc: &'a FprocChannelMap,
    ) -> Self {
        let timing = TimingModel {
            clock_hz: channels.clock_hz,
            ..TimingModel::default()
        };
        Self {
            cal,
            channels,
            elements,
            fproc,
            timing,
            opts: CompileOptions::default(),
            cores: CoreMap::new(channels),
            durations: RefCell::new(HashMap::new()),
        }
    }

    pub fn with_timing(mut self, timing: TimingModel) -> Self {
        self.timing = timing;
        self
    }

    pub fn with_options(mut self, opts: CompileOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn clock_hz(&self) -> f64 {
        self.channels.clock_hz
    }

    /// Envelope length in cycles, exactly as the assembler will pack it.
    pub fn duration(&self, p: &PulseStmt) -> Result<u64, IrError> {
        let key = (
            p.dest.clone(),
            serde_json::to_string(&p.env).expect("envelope serializes"),
        );
        if let Some(&d) = self.durations.borrow().get(&key) {
            return Ok(d);
        }
        let info = self.channels.get(&p.dest).map_err(|_| IrError::UnknownChannel(p.dest.clone()))?;
        let params = info.elem_params.as_ref().unwrap_or(self.elements.params());
        let d = self
            .elements
            .envelope(params, self.clock_hz(), &p.env)
            .map_err(|source| IrError::Envelope {
                channel: p.dest.clone(),
                source,
            })?
            .cycles;
        self.durations.borrow_mut().insert(key, u64::from(d));
        Ok(u64::from(d))
    }
}

/// Owned compilation inputs, loadable from a config directory.
#[derive(Debug, Clone)]
pub struct Target {
    pub cal: GateCalibration,
    pub channels: ChannelConfig,
    pub elements: DefaultElementConfig,
    pub fproc: FprocChannelMap,
    pub timing: TimingModel,
    pub opts: CompileOptions,
}

/// Config file locations for [`Target::from_files`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFiles {
    pub channels: PathBuf,
    #[serde(default)]
    pub element: Option<PathBuf>,
    #[serde(default)]
    pub calibration: Option<PathBuf>,
    #[serde(default)]
    pub fproc_map: Option<PathBuf>,
    #[serde(default)]
    pub timing: Option<PathBuf>,
    #[serde(default)]
    pub compile: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl Target {
    pub const CHANNELS: &'static str = "channels.json";
    pub const ELEMENT: &'static str = "element.json";
    pub const CALIBRATION: &'static str = "calibration.json";
    pub const FPROC: &'static str = "fproc_map.json";
    pub const TIMING: &'static str = "timing.json";
    pub const OPTIONS: &'static str = "compile.json";

    /// Reads `channels.json` (required) and the optional `element.json`,
    /// `calibration.json`, `fproc_map.json`, `timing.json` and
    /// `compile.json` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, TargetError> {
        let opt = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        Self::from_files(&TargetFiles {
            channels: dir.join(Self::CHANNELS),
            element: opt(Self::ELEMENT),
            calibration: opt(Self::CALIBRATION),
            fproc_map: opt(Self::FPROC),
            timing: opt(Self::TIMING),
            compile: opt(Self::OPTIONS),
        })
    }

    /// Loads the listed files; absent optional files take their defaults.
    pub fn from_files(files: &TargetFiles) -> Result<Self, TargetError> {
        fn read<T: serde::de::DeserializeOwned + Default>(
            path: Option<&Path>,
        ) -> Result<T, TargetError> {
            path.map_or_else(|| Ok(T::default()), parse)
        }
        fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, TargetError> {
            let text = std::fs::read_to_string(path).map_err(|source| TargetError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| TargetError::Parse {
                path: path.to_path_buf(),
                source,
            })
        }
        let channels: ChannelConfig = parse(&files.channels)?;
        let mut timing: TimingModel = read(files.timing.as_deref())?;
        timing.clock_hz = channels.clock_hz;
        Ok(Self {
            cal: read(files.calibration.as_deref())?,
            elements: read(files.element.as_deref())?,
            fproc: read(files.fproc_map.as_deref())?,
            opts: read(files.compile.as_deref())?,
            channels,
            timing,
        })
    }

    pub fn context(&self) -> Context<'_> {
        Context::new(&self.cal, &self.channels, &self.elements, &self.fproc)
            .with_timing(self.timing.clone())
            .with_options(self.opts.clone())
    }

    pub fn compile(&self, prog: &IrProgram, passes: &[Pass]) -> Result<CompileOutput, CompileError> {
        compile(prog, &self.context(), passes)
    }

    pub fn assemble(&self, asm: &AsmProgram) -> Result<BTreeMap<CoreKey, CoreImage>, AsmError> {
        crate::asm::assemble(asm, &self.channels, &self.elements)
    }

    /// Simulator settings matching this target: same timing, one readout
    /// per FPROC channel.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            timing: self.timing.clone(),
            readouts: self.fproc.readouts(self.channels.clock_hz),
            ..SimConfig::default()
        }
    }
}

/// Result of a full compilation.
#[derive(Debug, Clone)]
pub struct CompileOutput {
    pub asm: AsmProgram,
    pub symbols: SymbolTable,
    /// The program as it reached emission.
    pub program: IrProgram,
    pub cfg: ControlFlowGraph,
    /// Linter findings (empty unless `lint` ran and found nothing fatal).
    pub diagnostics: Vec<Diagnostic>,
}

fn fail(pass: Pass) -> impl Fn(IrError) -> CompileError {
    move |e| CompileError {
        pass,
        errors: vec![e],
    }
}

fn fail_all(pass: Pass) -> impl Fn(Vec<IrError>) -> CompileError {
    move |errors| CompileError { pass, errors }
}

/// Runs `passes` in order. The list must end with [`Pass::Emit`]; each pass
/// checks that its input is in the form it needs.
pub fn compile(
    prog: &IrProgram,
    ctx: &Context,
    passes: &[Pass],
) -> Result<CompileOutput, CompileError> {
    if passes.last() != Some(&Pass::Emit) {
        return Err(CompileError {
            pass: passes.last().copied().unwrap_or(Pass::Emit),
            errors: vec![IrError::InvalidPassOrder {
                pass: "emit".into(),
                reason: "the pass list must end with emit".into(),
            }],
        });
    }
    if let Some(p) = passes[..passes.len() - 1].iter().find(|&&p| p == Pass::Emit) {
        return Err(fail(*p)(IrError::InvalidPassOrder {
            pass: "emit".into(),
            reason: "emit may only run last".into(),
        }));
    }
    let mut prog = prog.clone();
    let mut diagnostics = Vec::new();
    for &pass in passes {
        match pass {
            Pass::ResolveGates => prog = resolve_gates(&prog, ctx.cal).map_err(fail_all(pass))?,
            Pass::Scope => prog = scope_pass(&prog, ctx).map_err(fail_all(pass))?,
            Pass::LowerControlFlow => {
                prog = lower_control_flow(&prog, ctx).map_err(fail(pass))?.0;
            }
            Pass::ResolveVirtualz => prog = resolve_virtualz(&prog, ctx).map_err(fail(pass))?,
            Pass::ResolveFproc => prog = resolve_fproc(&prog, ctx).map_err(fail_all(pass))?,
            Pass::Schedule => prog = schedule(&prog, ctx).map_err(fail(pass))?,
            Pass::Lint => {
                diagnostics = lint(&prog, ctx).map_err(fail(pass))?;
                if !diagnostics.is_empty() {
                    return Err(fail(pass)(IrError::Lint(diagnostics)));
                }
            }
            Pass::Emit => {
                let (asm, symbols) = emit(&prog, ctx).map_err(fail(pass))?;
                let cfg = ControlFlowGraph::build(&prog.statements).map_err(fail(pass))?;
                return Ok(CompileOutput {
                    asm,
                    symbols,
                    program: prog,
                    cfg,
                    diagnostics,
                });
            }
        }
    }
    unreachable!("pass list ends with emit")
}
