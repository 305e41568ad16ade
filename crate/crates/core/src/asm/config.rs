//! Channel configuration and the per-signal-generator conversion contract.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::convert;
use super::envelope::{generate_envelope, EnvelopeError, EnvelopeSpec};
use super::AsmError;
use crate::units::DEFAULT_CLOCK_HZ;

/// Parameters of one signal-generator element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElementParams {
    /// DAC samples per fabric clock cycle (16 → 8 GSPS at 500 MHz).
    pub samples_per_clk: u32,
    /// DAC samples per envelope sample.
    pub interp_ratio: u32,
    /// Phase-accumulator width of a frequency-buffer entry.
    pub accum_bits: u32,
    /// Envelope memory depth in clock cycles (12-bit address space).
    pub env_depth: u32,
    /// Frequency memory depth in entries (9-bit address space).
    pub freq_depth: u32,
    /// Frequencies must satisfy `0 ≤ f < max_freq_fraction · DAC rate`.
    /// 0.5 is the Nyquist limit.
    pub max_freq_fraction: f64,
}

impl Default for ElementParams {
    fn default() -> Self {
        Self {
            samples_per_clk: 16,
            interp_ratio: 16,
            accum_bits: 32,
            env_depth: 1 << 12,
            freq_depth: 1 << 9,
            max_freq_fraction: 1.0,
        }
    }
}

impl ElementParams {
    pub fn dac_rate(&self, clock_hz: f64) -> f64 {
        f64::from(self.samples_per_clk) * clock_hz
    }

    pub fn env_rate(&self, clock_hz: f64) -> f64 {
        self.dac_rate(clock_hz) / f64::from(self.interp_ratio)
    }

    /// Envelope samples per clock cycle.
    pub fn env_samples_per_clk(&self) -> u32 {
        self.samples_per_clk / self.interp_ratio
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.samples_per_clk == 0 || self.interp_ratio == 0 {
            return Err("samples_per_clk and interp_ratio must be positive".into());
        }
        if !self.samples_per_clk.is_multiple_of(self.interp_ratio) {
            return Err(format!(
                "interp_ratio {} must divide samples_per_clk {}",
                self.interp_ratio, self.samples_per_clk
            ));
        }
        if !(1..=32).contains(&self.accum_bits) {
            return Err(format!("accum_bits {} outside 1..=32", self.accum_bits));
        }
        if self.env_depth == 0 || self.env_depth > 1 << 12 {
            return Err(format!("env_depth {} outside 1..=4096", self.env_depth));
        }
        if self.freq_depth == 0 || self.freq_depth > 1 << 9 {
            return Err(format!("freq_depth {} outside 1..=512", self.freq_depth));
        }
        if !(self.max_freq_fraction > 0.0 && self.max_freq_fraction <= 1.0) {
            return Err(format!(
                "max_freq_fraction {} outside (0, 1]",
                self.max_freq_fraction
            ));
        }
        Ok(())
    }
}

/// One named output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelInfo {
    pub core_ind: u32,
    /// Signal-generator element index within the core; emitted as the cfg word.
    pub elem_ind: u8,
    /// Overrides the element config for this channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elem_params: Option<ElementParams>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, i64>,
}

impl ChannelInfo {
    /// Named attribute lookup; `core_ind` and `elem_ind` are always present.
    pub fn attr(&self, name: &str) -> Option<i64> {
        match name {
            "core_ind" => Some(i64::from(self.core_ind)),
            "elem_ind" => Some(i64::from(self.elem_ind)),
            _ => self.attrs.get(name).copied(),
        }
    }
}

fn default_clock() -> f64 {
    DEFAULT_CLOCK_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "default_clock")]
    pub clock_hz: f64,
    pub channels: BTreeMap<String, ChannelInfo>,
}

impl ChannelConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn get(&self, channel: &str) -> Result<&ChannelInfo, AsmError> {
        self.channels
            .get(channel)
            .ok_or_else(|| AsmError::UnknownChannel(channel.to_string()))
    }

    /// Builds the usual three-channel-per-qubit layout: qubit `Qn` gets core
    /// `n` with `Qn.qdrv`, `Qn.rdrv`, `Qn.rdlo` at elements 0, 1, 2.
    pub fn standard(qubits: &[&str]) -> Self {
        let mut channels = BTreeMap::new();
        for (core, q) in qubits.iter().enumerate() {
            let core_ind = q
                .trim_start_matches('Q')
                .parse()
                .unwrap_or(core as u32);
            for (elem_ind, suffix) in ["qdrv", "rdrv", "rdlo"].into_iter().enumerate() {
                channels.insert(
                    format!("{q}.{suffix}"),
                    ChannelInfo {
                        core_ind,
                        elem_ind: elem_ind as u8,
                        elem_params: None,
                        attrs: BTreeMap::new(),
                    },
                );
            }
        }
        ChannelConfig {
            clock_hz: DEFAULT_CLOCK_HZ,
            channels,
        }
    }
}

/// Sampled and packed envelope ready for the envelope buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeData {
    /// 16-bit I/Q samples, zero-padded to whole clock cycles.
    pub samples: Vec<[i16; 2]>,
    /// Length in clock cycles.
    pub cycles: u32,
}

/// Conversions for one kind of signal-generator element.
pub trait ElementConfig: Send + Sync {
    /// Default element parameters; channels may override them.
    fn params(&self) -> &ElementParams;

    fn phase_word(&self, _p: &ElementParams, phase: f64) -> u32 {
        convert::convert_phase(phase)
    }

    fn amp_word(&self, _p: &ElementParams, amp: f64) -> Result<u16, AsmError> {
        convert::convert_amp(amp).ok_or(AsmError::AmplitudeOutOfRange(amp))
    }

    /// Frequency-buffer entry (phase increment per DAC sample).
    fn freq_entry(&self, p: &ElementParams, clock_hz: f64, freq: f64) -> Result<u32, AsmError> {
        let fs = p.dac_rate(clock_hz);
        if !(freq >= 0.0 && freq < p.max_freq_fraction * fs) {
            return Err(AsmError::FrequencyOutOfRange {
                freq,
                limit: p.max_freq_fraction * fs,
            });
        }
        Ok(convert::phase_increment(freq, fs, p.accum_bits) as u32)
    }

    fn envelope(
        &self,
        p: &ElementParams,
        clock_hz: f64,
        spec: &EnvelopeSpec,
    ) -> Result<EnvelopeData, EnvelopeError> {
        let samples = generate_envelope(spec, p.env_rate(clock_hz))?;
        Ok(pack_envelope(&samples, p.env_samples_per_clk()))
    }
}

/// Quantizes samples to 16-bit I/Q and pads to a whole number of cycles.
pub fn pack_envelope(samples: &[Complex64], per_clk: u32) -> EnvelopeData {
    let q = |x: f64| (x * f64::from(i16::MAX)).round().clamp(-32767.0, 32767.0) as i16;
    let mut out: Vec<[i16; 2]> = samples.iter().map(|c| [q(c.re), q(c.im)]).collect();
    let per_clk = per_clk.max(1) as usize;
    let cycles = out.len().div_ceil(per_clk);
    out.resize(cycles * per_clk, [0, 0]);
    EnvelopeData {
        samples: out,
        cycles: cycles as u32,
    }
}

/// The standard DDS-style element: phase and amplitude words per the
/// default conversions, 32-bit phase-increment frequency entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefaultElementConfig {
    pub params: ElementParams,
}

impl DefaultElementConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl ElementConfig for DefaultElementConfig {
    fn params(&self) -> &ElementParams {
        &self.params
    }
}
