use std::path::PathBuf;
use std::str::FromStr;

use dproc_core::ir::SymbolTable;
use dproc_core::qbackend::BackendFactory;
use dproc_core::sim::{Machine, SimConfig};

use crate::error::{CliError, SCHEMA};
use crate::project::read_json;

/// `--backend` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    StateVector,
    Scripted(PathBuf),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "statevector" => Ok(BackendSpec::StateVector),
            Some(("scripted", path)) if !path.is_empty() => Ok(BackendSpec::Scripted(path.into())),
            _ => Err(format!("expected `statevector` or `scripted:<file>`, got `{s}`")),
        }
    }
}

impl BackendSpec {
    pub fn factory(
        &self,
        symbols: Option<&SymbolTable>,
        machine: &Machine,
        cfg: &SimConfig,
    ) -> Result<BackendFactory, CliError> {
        match self {
            BackendSpec::Scripted(path) => Ok(BackendFactory::Scripted(read_json(path)?)),
            BackendSpec::StateVector => {
                let symbols = symbols.ok_or_else(|| {
                    CliError::new(SCHEMA, "MissingSymbols", "the statevector backend needs the compiler's symbol table; the manifest names none")
                })?;
                Ok(BackendFactory::statevector(symbols.bindings(machine), cfg))
            }
        }
    }
}
