//! `dproc`: compile, assemble, disassemble and simulate pulse-processor
//! programs.
//!
//! Exit codes: 0 success, 2 malformed or invalid input, 3 compile or
//! assembly error, 4 I/O error, 5 simulation error. Failures print one JSON
//! diagnostic per line on standard error.

mod backend;
mod commands;
mod error;
mod project;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use backend::BackendSpec;
use commands::{CompileArgs, Format, SimArgs};
use error::CliError;

#[derive(Parser)]
#[command(name = "dproc", version, about = "Pulse-processor toolchain")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Strictness {
    /// Treat late triggers, empty FPROC reads and lint findings as errors
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Tolerate them (lint findings become warnings)
    #[arg(long)]
    lenient: bool,
}

impl Strictness {
    fn get(&self) -> Option<bool> {
        match (self.strict, self.lenient) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Args)]
struct RunOpts {
    /// Manifest written by `compile` or `asm`
    manifest: PathBuf,
    /// Target directory or project file; defaults to the sim.json beside the
    /// manifest
    #[arg(long)]
    config: Option<PathBuf>,
    /// `statevector` or `scripted:<file>`
    #[arg(long, default_value = "statevector")]
    backend: BackendSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    strictness: Strictness,
}

impl RunOpts {
    fn args(&self) -> SimArgs<'_> {
        SimArgs {
            manifest: &self.manifest,
            config: self.config.as_deref(),
            backend: &self.backend,
            seed: self.seed,
            strict: self.strictness.get(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile an IR program to per-core images
    Compile {
        ir: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated pass list, ending with `emit`
        #[arg(long)]
        passes: Option<String>,
        #[command(flatten)]
        strictness: Strictness,
    },
    /// Assemble a JSON assembly program, or a text listing into one binary
    Asm {
        file: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the listing of a binary
    Disasm {
        bin: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run shots; writes timeline, trace, shot records and a report
    Sim {
        #[command(flatten)]
        run: RunOpts,
        #[arg(long, default_value_t = 1)]
        shots: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one run and print its pulse timeline
    Timeline {
        #[command(flatten)]
        run: RunOpts,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) => project::write(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io("<stdout>".as_ref(), e))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Compile {
            ir,
            config,
            out,
            passes,
            strictness,
        } => {
            let (manifest, warnings) = commands::compile(&CompileArgs {
                ir: &ir,
                config: &config,
                out: &out,
                passes: passes.as_deref(),
                lenient: strictness.get() == Some(false),
            })?;
            for w in warnings {
                eprintln!("{}", serde_json::json!({"warning": w}));
            }
            println!("{}", manifest.display());
        }
        Cmd::Asm { file, config, out } => {
            println!("{}", commands::asm(&file, config.as_deref(), &out)?.display());
        }
        Cmd::Disasm { bin, out } => emit(&commands::disasm(&bin)?, out.as_ref())?,
        Cmd::Sim { run, shots, out } => {
            println!("{}", commands::sim_shots(&run.args(), shots, &out)?.display());
        }
        Cmd::Timeline { run, format, out } => match commands::timeline(&run.args(), format) {
            Ok(text) => emit(&text, out.as_ref())?,
            Err((e, partial)) => {
                if let Some(text) = partial {
                    emit(&text, out.as_ref())?;
                }
                return Err(e);
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for d in &e.diagnostics {
                eprintln!("{d}");
            }
            ExitCode::from(e.code as u8)
        }
    }
}
