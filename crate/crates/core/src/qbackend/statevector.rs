use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendError, MeasurementBackend};
use crate::asm::convert::phase_from_word;
use crate::sim::{PulseEvent, Readout};

pub const MAX_QUBITS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X90,
    Cz,
    /// `diag(1, e^{iθ})`.
    VirtualZ(f64),
    U { theta: f64, phi: f64, lambda: f64 },
}

impl Gate {
    /// Parameterless gates by calibration name.
    pub fn from_name(name: &str) -> Result<Gate, BackendError> {
        match name {
            "X90" => Ok(Gate::X90),
            "CZ" => Ok(Gate::Cz),
            _ => Err(BackendError::UnknownGate(name.to_string())),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::Cz => 2,
            _ => 1,
        }
    }

    fn matrix(&self) -> [[Complex64; 2]; 2] {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *self {
            Gate::X90 => [
                [c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)],
                [c(0.0, -FRAC_1_SQRT_2), c(FRAC_1_SQRT_2, 0.0)],
            ],
            Gate::VirtualZ(t) => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::cis(t)]],
            Gate::U { theta, phi, lambda } => {
                let (s, co) = (theta / 2.0).sin_cos();
                [
                    [c(co, 0.0), -Complex64::cis(lambda) * s],
                    [Complex64::cis(phi) * s, Complex64::cis(phi + lambda) * co],
                ]
            }
            Gate::Cz => unreachable!("two-qubit gate"),
        }
    }
}

/// Amplitudes over `2^n` basis states; qubit `i` is bit `i` of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: Vec<String>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// All qubits in |0⟩.
    pub fn new(qubits: Vec<String>) -> Result<Self, BackendError> {
        if qubits.len() > MAX_QUBITS {
            return Err(BackendError::TooManyQubits(qubits.len()));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits.len()];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { qubits, amps })
    }

    pub fn qubits(&self) -> &[String] {
        &self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn index(&self, qubit: &str) -> Result<usize, BackendError> {
        self.qubits
            .iter()
            .position(|q| q == qubit)
            .ok_or_else(|| BackendError::UnknownQubit(qubit.to_string()))
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Probability that `qubit` reads 1.
    pub fn prob_one(&self, qubit: usize) -> f64 {
        let mask = 1 << qubit;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `⟨Z_q⟩` for each listed qubit, multiplied together.
    pub fn expect_z(&self, qubits: &[usize]) -> f64 {
        let mask: usize = qubits.iter().map(|q| 1 << q).sum();
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let sign = if (i & mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * a.norm_sqr()
            })
            .sum()
    }

    fn apply_1q(&mut self, q: usize, m: &[[Complex64; 2]; 2]) {
        let mask = 1 << q;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }
}

pub fn apply_gate(sv: &mut StateVector, gate: Gate, qubits: &[usize]) -> Result<(), BackendError> {
    let n = sv.qubits.len();
    if qubits.len() != gate.arity() {
        return Err(BackendError::UnknownGate(format!(
            "{gate:?} on {} qubits",
            qubits.len()
        )));
    }
    if let Some(&q) = qubits.iter().find(|&&q| q >= n) {
        return Err(BackendError::UnknownQubit(format!("index {q}")));
    }
    match gate {
        Gate::Cz => {
            if qubits[0] == qubits[1] {
                return Err(BackendError::UnknownGate("CZ on a repeated qubit".into()));
            }
            let mask = (1 << qubits[0]) | (1 << qubits[1]);
            for (i, a) in sv.amps.iter_mut().enumerate() {
                if i & mask == mask {
                    *a = -*a;
                }
            }
        }
        g => sv.apply_1q(qubits[0], &g.matrix()),
    }
    Ok(())
}

/// Born-rule Z measurement with collapse.
pub fn measure_z(sv: &mut StateVector, qubit: usize, rng: &mut impl Rng) -> bool {
    let p1 = sv.prob_one(qubit);
    let bit = rng.random::<f64>() < p1;
    let p = if bit { p1 } else { 1.0 - p1 };
    let scale = 1.0 / p.sqrt();
    let mask = 1 << qubit;
    for (i, a) in sv.amps.iter_mut().enumerate() {
        if (i & mask != 0) == bit {
            *a *= scale;
        } else {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    bit
}

/// Gate attached to one pulse instruction by the compiler's symbol table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateBinding {
    pub gate: String,
    pub qubits: Vec<String>,
    /// Calibrated phase of this pulse; the excess over it is the frame phase.
    #[serde(default)]
    pub base_phase: f64,
    /// A gate spanning several pulses is applied once, on its primary pulse.
    #[serde(default = "yes")]
    pub primary: bool,
}

fn yes() -> bool {
    true
}

/// Ideal statevector model driven by compiled gate symbols.
///
/// A drive pulse whose phase exceeds its calibrated phase by `φ` applies
/// `VZ(−φ)·G·VZ(φ)` to its qubit. Virtual-Z gates therefore act as frame
/// changes, and the residual frame commutes with Z measurement.
#[derive(Debug, Clone)]
pub struct StateVectorBackend {
    qubits: Vec<String>,
    bindings: BTreeMap<(usize, u16), GateBinding>,
    seed_rng: ChaCha8Rng,
    rng: ChaCha8Rng,
    state: StateVector,
}

impl StateVectorBackend {
    pub fn new(
        qubits: Vec<String>,
        bindings: BTreeMap<(usize, u16), GateBinding>,
        rng: ChaCha8Rng,
    ) -> Result<Self, BackendError> {
        let state = StateVector::new(qubits.clone())?;
        Ok(Self {
            qubits,
            bindings,
            seed_rng: rng.clone(),
            rng,
            state,
        })
    }

    pub fn seeded(
        qubits: Vec<String>,
        bindings: BTreeMap<(usize, u16), GateBinding>,
        seed: u64,
    ) -> Result<Self, BackendError> {
        Self::new(qubits, bindings, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }
}

fn is_drive(channel: &str) -> bool {
    channel.ends_with(".qdrv")
}

impl MeasurementBackend for StateVectorBackend {
    fn on_pulse(&mut self, event: &PulseEvent) -> Result<(), BackendError> {
        if !is_drive(&event.channel) {
            return Ok(());
        }
        let binding = self
            .bindings
            .get(&(event.core, event.addr))
            .ok_or_else(|| BackendError::UnmappedPulse {
                core: event.core,
                addr: event.addr,
                channel: event.channel.clone(),
            })?;
        if !binding.primary {
            return Ok(());
        }
        let gate = Gate::from_name(&binding.gate)?;
        let idx = binding
            .qubits
            .iter()
            .map(|q| self.state.index(q))
            .collect::<Result<Vec<_>, _>>()?;
        if gate.arity() == 1 {
            let frame = phase_from_word(event.phase_word) - binding.base_phase;
            apply_gate(&mut self.state, Gate::VirtualZ(frame), &idx)?;
            apply_gate(&mut self.state, gate, &idx)?;
            apply_gate(&mut self.state, Gate::VirtualZ(-frame), &idx)?;
        } else {
            apply_gate(&mut self.state, gate, &idx)?;
        }
        Ok(())
    }

    fn measure(&mut self, readout: &Readout, _cycle: u64) -> Result<bool, BackendError> {
        let q = self.state.index(&readout.qubit)?;
        Ok(measure_z(&mut self.state, q, &mut self.rng))
    }

    fn reset(&mut self) {
        self.rng = self.seed_rng.clone();
        self.state = StateVector::new(self.qubits.clone()).expect("qubit count checked at construction");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(n: usize) -> StateVector {
        StateVector::new((0..n).map(|i| format!("Q{i}")).collect()).unwrap()
    }

    #[test]
    fn x90_squared_flips() {
        let mut s = sv(1);
        apply_gate(&mut s, Gate::X90, &[0]).unwrap();
        apply_gate(&mut s, Gate::X90, &[0]).unwrap();
        assert!((s.prob_one(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn virtual_z_leaves_ground_alone() {
        let mut s = sv(1);
        apply_gate(&mut s, Gate::VirtualZ(1.234), &[0]).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert_eq!(s.amplitudes()[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut s = sv(2);
        assert!(apply_gate(&mut s, Gate::Cz, &[0]).is_err());
        assert!(apply_gate(&mut s, Gate::X90, &[2]).is_err());
        assert_eq!(Gate::from_name("H"), Err(BackendError::UnknownGate("H".into())));
        assert!(StateVector::new((0..6).map(|i| i.to_string()).collect()).is_err());
    }
}
