use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::program::FreqRef;
use super::IrError;
use crate::asm::EnvelopeSpec;
use crate::sim::Readout;
use crate::units::cycles_ceil;

/// One element of a gate's calibrated expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalEntry {
    Pulse {
        dest: String,
        freq: FreqRef,
        #[serde(default)]
        phase: f64,
        amp: f64,
        env: EnvelopeSpec,
        /// Offset from the gate start, seconds.
        #[serde(default)]
        t0: f64,
    },
    VirtualZ {
        freq: FreqRef,
        phase: f64,
    },
}

/// Gate name → qubit tuple (comma-joined) → expansion, plus named frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCalibration {
    #[serde(default)]
    pub freqs: BTreeMap<String, f64>,
    pub gates: BTreeMap<String, BTreeMap<String, Vec<CalEntry>>>,
}

impl GateCalibration {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn lookup(&self, gate: &str, qubits: &[String]) -> Option<&[CalEntry]> {
        self.gates
            .get(gate)?
            .get(&qubits.join(","))
            .map(Vec::as_slice)
    }

    pub fn resolve_freq(&self, f: &FreqRef) -> Result<f64, IrError> {
        match f {
            FreqRef::Hz(hz) => Ok(*hz),
            FreqRef::Name(n) => self
                .freqs
                .get(n)
                .copied()
                .ok_or_else(|| IrError::UnknownFrequency(n.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FprocChannel {
    pub func_id: u16,
    /// Seconds from the end of the demodulation window until the result is
    /// readable.
    pub measurement_delay: f64,
    /// Demodulation channel; defaults to `<qubit>.rdlo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    /// Measured qubit; defaults to the name before the first `.`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit: Option<String>,
}

/// Named FPROC result channels such as `Q1.meas`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FprocChannelMap {
    pub channels: BTreeMap<String, FprocChannel>,
}

impl FprocChannelMap {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One `<Q>.meas` entry per qubit with the given delay; ids count from 0.
    pub fn standard(qubits: &[&str], measurement_delay: f64) -> Self {
        let channels = qubits
            .iter()
            .map(|q| {
                let id = q.trim_start_matches('Q').parse().unwrap_or(0);
                (
                    format!("{q}.meas"),
                    FprocChannel {
                        func_id: id,
                        measurement_delay,
                        channel: None,
                        qubit: None,
                    },
                )
            })
            .collect();
        Self { channels }
    }

    pub fn validate(&self) -> Result<(), IrError> {
        let mut ids = BTreeSet::new();
        for (name, c) in &self.channels {
            if c.func_id > crate::asm::MAX_FPROC_ID as u16 {
                return Err(IrError::InvalidFprocMap(format!(
                    "`{name}`: func_id {} exceeds {}",
                    c.func_id,
                    crate::asm::MAX_FPROC_ID
                )));
            }
            if !ids.insert(c.func_id) {
                return Err(IrError::InvalidFprocMap(format!(
                    "func_id {} used twice",
                    c.func_id
                )));
            }
            if !(c.measurement_delay >= 0.0 && c.measurement_delay.is_finite()) {
                return Err(IrError::InvalidFprocMap(format!(
                    "`{name}`: negative measurement delay"
                )));
            }
        }
        Ok(())
    }

    pub fn qubit(&self, name: &str) -> String {
        let c = &self.channels[name];
        c.qubit
            .clone()
            .unwrap_or_else(|| name.split('.').next().unwrap_or(name).to_string())
    }

    pub fn channel(&self, name: &str) -> String {
        let c = &self.channels[name];
        c.channel
            .clone()
            .unwrap_or_else(|| format!("{}.rdlo", self.qubit(name)))
    }

    pub fn delay_cycles(&self, name: &str, clock_hz: f64) -> u64 {
        cycles_ceil(self.channels[name].measurement_delay, clock_hz)
    }

    /// Simulator readout table matching this map.
    pub fn readouts(&self, clock_hz: f64) -> Vec<Readout> {
        self.channels
            .iter()
            .map(|(name, c)| Readout {
                channel: self.channel(name),
                qubit: self.qubit(name),
                slot: c.func_id,
                delay_cycles: self.delay_cycles(name, clock_hz) as u32,
            })
            .collect()
    }
}
