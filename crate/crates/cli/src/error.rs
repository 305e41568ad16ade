use std::fmt::Debug;
use std::path::Path;

use dproc_core::asm::{AsmError, ManifestError};
use dproc_core::ir::{CompileError, TargetError};
use dproc_core::qbackend::ShotError;
use dproc_core::sim::SimError;
use serde_json::{json, Value};

pub const SCHEMA: i32 = 2;
pub const COMPILE: i32 = 3;
pub const IO: i32 = 4;
pub const SIM: i32 = 5;

/// A failed command: exit code plus one JSON diagnostic per problem.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub diagnostics: Vec<Value>,
}

/// Variant name of an error enum, from its `Debug` form.
pub fn kind(e: &impl Debug) -> String {
    format!("{e:?}")
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect()
}

impl CliError {
    pub fn new(code: i32, kind: &str, message: impl ToString) -> Self {
        Self {
            code,
            diagnostics: vec![json!({"kind": kind, "message": message.to_string()})],
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        let mut err = Self::new(IO, "Io", format!("{}: {e}", path.display()));
        err.diagnostics[0]["file"] = json!(path.display().to_string());
        err
    }

    pub fn json(path: &Path, e: &serde_json::Error) -> Self {
        let kind = match e.classify() {
            serde_json::error::Category::Data => "Schema",
            _ => "Json",
        };
        let mut d = json!({"kind": kind, "file": path.display().to_string(), "message": e.to_string()});
        // Errors found after parsing carry no position.
        if e.line() > 0 {
            d["line"] = json!(e.line());
            d["column"] = json!(e.column());
        }
        Self {
            code: SCHEMA,
            diagnostics: vec![d],
        }
    }

    pub fn compile(e: &CompileError) -> Self {
        Self {
            code: COMPILE,
            diagnostics: e
                .errors
                .iter()
                .map(|x| json!({"kind": kind(x), "pass": e.pass.name(), "message": x.to_string()}))
                .collect(),
        }
    }

    pub fn asm(file: &Path, e: &AsmError) -> Self {
        let mut err = Self::new(COMPILE, &kind(e.root()), e);
        err.diagnostics[0]["file"] = json!(file.display().to_string());
        if let AsmError::Listing(l) = e.root() {
            err.diagnostics[0]["detail"] = json!(kind(l));
        }
        err
    }

    pub fn sim(e: &SimError) -> Self {
        Self::new(SIM, &kind(e), e)
    }

    pub fn shot(e: &ShotError) -> Self {
        let mut err = match e {
            ShotError::Sim { failure, .. } => Self::sim(&failure.error),
            ShotError::Backend { source, .. } => Self::new(SIM, &kind(source), source),
        };
        err.diagnostics[0]["shot"] = json!(e.shot());
        err
    }
}

impl From<TargetError> for CliError {
    fn from(e: TargetError) -> Self {
        match e {
            TargetError::Io { path, source } => CliError::io(&path, source),
            TargetError::Parse { path, source } => CliError::json(&path, &source),
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::Io { path, source } => CliError::io(&path, source),
            ManifestError::Json { path, source } => CliError::json(&path, &source),
            ManifestError::Format { .. } => CliError::new(SCHEMA, "Format", e),
        }
    }
}
