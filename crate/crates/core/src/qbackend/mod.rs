//! Measurement backends that close the feedback loop, and multi-shot runs.
//!
//! The simulator calls [`MeasurementBackend::on_pulse`] for every triggered
//! pulse and [`MeasurementBackend::measure`] once per completed readout
//! window. [`ScriptedBackend`] replays fixed bit sequences;
//! [`StateVectorBackend`] applies the compiled gates to an ideal state and
//! samples outcomes with the Born rule.

mod factory;
mod scripted;
mod shots;
mod statevector;

use thiserror::Error;

use crate::sim::{PulseEvent, Readout};

pub use factory::{AnyBackend, BackendFactory};
pub use scripted::{Exhaustion, ScriptedBackend, ScriptedOutcomes};
pub use shots::{
    aggregate, report, run_shots, shot_rng, BitRecord, Expectation, Partition, Report, ShotError,
    ShotRecord,
};
pub use statevector::{
    apply_gate, measure_z, Gate, GateBinding, StateVector, StateVectorBackend, MAX_QUBITS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("no scripted outcomes for qubit `{0}`")]
    NoScript(String),
    #[error("scripted outcomes for qubit `{0}` exhausted")]
    ScriptExhausted(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("unknown qubit `{0}`")]
    UnknownQubit(String),
    #[error("{0} qubits exceed the statevector limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("drive pulse on `{channel}` (core {core}, address {addr}) has no gate in the symbol table")]
    UnmappedPulse {
        core: usize,
        addr: u16,
        channel: String,
    },
}

/// Source of state-discrimination bits.
pub trait MeasurementBackend {
    /// Called for each triggered pulse, in trigger order.
    fn on_pulse(&mut self, _event: &PulseEvent) -> Result<(), BackendError> {
        Ok(())
    }

    fn on_phase_reset(&mut self, _core: usize, _cycle: u64) {}

    /// Discriminated bit for a readout whose window closed at `cycle`.
    fn measure(&mut self, readout: &Readout, cycle: u64) -> Result<bool, BackendError>;

    /// Returns to the initial state; called at the start of every run.
    fn reset(&mut self) {}
}
