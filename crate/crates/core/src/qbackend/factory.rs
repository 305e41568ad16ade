use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;

use super::{
    BackendError, GateBinding, MeasurementBackend, ScriptedBackend, ScriptedOutcomes,
    StateVectorBackend,
};
use crate::sim::{PulseEvent, Readout, SimConfig};

/// Either built-in backend behind one type.
#[derive(Debug, Clone)]
pub enum AnyBackend {
    Scripted(ScriptedBackend),
    StateVector(Box<StateVectorBackend>),
}

impl AnyBackend {
    fn inner(&mut self) -> &mut dyn MeasurementBackend {
        match self {
            AnyBackend::Scripted(b) => b,
            AnyBackend::StateVector(b) => b.as_mut(),
        }
    }
}

impl MeasurementBackend for AnyBackend {
    fn on_pulse(&mut self, event: &PulseEvent) -> Result<(), BackendError> {
        self.inner().on_pulse(event)
    }

    fn on_phase_reset(&mut self, core: usize, cycle: u64) {
        self.inner().on_phase_reset(core, cycle)
    }

    fn measure(&mut self, readout: &Readout, cycle: u64) -> Result<bool, BackendError> {
        self.inner().measure(readout, cycle)
    }

    fn reset(&mut self) {
        self.inner().reset()
    }
}

/// Builds a fresh backend per shot.
#[derive(Debug, Clone)]
pub enum BackendFactory {
    Scripted(ScriptedOutcomes),
    StateVector {
        qubits: Vec<String>,
        bindings: BTreeMap<(usize, u16), GateBinding>,
    },
}

impl BackendFactory {
    /// Statevector over every measured or gated qubit, in name order.
    pub fn statevector(bindings: BTreeMap<(usize, u16), GateBinding>, cfg: &SimConfig) -> Self {
        let qubits: BTreeSet<String> = cfg
            .readouts
            .iter()
            .map(|r| r.qubit.clone())
            .chain(bindings.values().flat_map(|b| b.qubits.iter().cloned()))
            .collect();
        BackendFactory::StateVector {
            qubits: qubits.into_iter().collect(),
            bindings,
        }
    }

    pub fn build(&self, rng: ChaCha8Rng) -> Result<AnyBackend, BackendError> {
        Ok(match self {
            BackendFactory::Scripted(s) => AnyBackend::Scripted(ScriptedBackend::new(s.clone())),
            BackendFactory::StateVector { qubits, bindings } => AnyBackend::StateVector(
                Box::new(StateVectorBackend::new(qubits.clone(), bindings.clone(), rng)?),
            ),
        })
    }
}
