//! `--config`: a target directory, or a project file naming each config.

use std::fs;
use std::path::{Path, PathBuf};

use dproc_core::ir::{Pass, Target, TargetFiles};
use dproc_core::sim::SimConfig;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{CliError, SCHEMA};

/// Project file. Paths are relative to the file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectFile {
    channels: PathBuf,
    #[serde(default)]
    element: Option<PathBuf>,
    #[serde(default)]
    calibration: Option<PathBuf>,
    #[serde(default)]
    fproc_map: Option<PathBuf>,
    #[serde(default)]
    timing: Option<PathBuf>,
    #[serde(default)]
    compile: Option<PathBuf>,
    #[serde(default)]
    sim: Option<SimOverrides>,
    #[serde(default)]
    passes: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimOverrides {
    max_cycles: Option<u64>,
    strict: Option<bool>,
    max_cores: Option<usize>,
}

pub struct Project {
    pub target: Target,
    pub sim: SimConfig,
    pub passes: Option<Vec<Pass>>,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::json(path, &e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

impl Project {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if path.is_dir() {
            let target = Target::from_dir(path)?;
            let sim = target.sim_config();
            return Ok(Self {
                target,
                sim,
                passes: None,
            });
        }
        let file: ProjectFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: Option<PathBuf>| p.map(|p| base.join(p));
        let target = Target::from_files(&TargetFiles {
            channels: base.join(file.channels),
            element: rel(file.element),
            calibration: rel(file.calibration),
            fproc_map: rel(file.fproc_map),
            timing: rel(file.timing),
            compile: rel(file.compile),
        })?;
        let mut sim = target.sim_config();
        let o = file.sim.unwrap_or_default();
        sim.max_cycles = o.max_cycles.unwrap_or(sim.max_cycles);
        sim.strict = o.strict.unwrap_or(sim.strict);
        sim.max_cores = o.max_cores.unwrap_or(sim.max_cores);
        let passes = file
            .passes
            .map(|names| {
                Pass::parse_list(&names.join(","))
                    .map_err(|e| CliError::new(SCHEMA, "UnknownPass", e))
            })
            .transpose()?;
        Ok(Self {
            target,
            sim,
            passes,
        })
    }
}
