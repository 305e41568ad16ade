//! Physical-unit to hardware-word conversions.

use std::f64::consts::TAU;

use crate::isa::{AMP_WORD_BITS, PHASE_WORD_BITS};

const PHASE_SCALE: f64 = (1u64 << PHASE_WORD_BITS) as f64;
const AMP_FULL_SCALE: f64 = ((1u64 << AMP_WORD_BITS) - 1) as f64;

/// Radians to a 17-bit phase word: `round(((phase mod 2π) / 2π) · 2¹⁷) mod 2¹⁷`.
pub fn convert_phase(phase: f64) -> u32 {
    let frac = phase.rem_euclid(TAU) / TAU;
    ((frac * PHASE_SCALE).round() as u64 % (1 << PHASE_WORD_BITS)) as u32
}

/// Phase word back to radians in `[0, 2π)`.
pub fn phase_from_word(word: u32) -> f64 {
    f64::from(word % (1 << PHASE_WORD_BITS)) / PHASE_SCALE * TAU
}

/// Normalized amplitude in `[0, 1]` to a 16-bit word: `round(amp · (2¹⁶ − 1))`.
pub fn convert_amp(amp: f64) -> Option<u16> {
    if !(0.0..=1.0).contains(&amp) {
        return None;
    }
    Some((amp * AMP_FULL_SCALE).round() as u16)
}

/// Signed amplitude delta in `[-1, 1]` for register arithmetic.
pub fn amp_delta_word(amp: f64) -> Option<i32> {
    if !(-1.0..=1.0).contains(&amp) {
        return None;
    }
    Some((amp * AMP_FULL_SCALE).round() as i32)
}

pub fn amp_from_word(word: u16) -> f64 {
    f64::from(word) / AMP_FULL_SCALE
}

/// Per-sample phase increment for `freq` at `sample_rate`, quantized to an
/// accumulator of `accum_bits`: `round(freq / sample_rate · 2^bits) mod 2^bits`.
pub fn phase_increment(freq: f64, sample_rate: f64, accum_bits: u32) -> u64 {
    let scale = 2f64.powi(accum_bits as i32);
    let inc = (freq / sample_rate * scale).round();
    (inc as u128 % (1u128 << accum_bits)) as u64
}

pub fn freq_from_increment(inc: u64, sample_rate: f64, accum_bits: u32) -> f64 {
    inc as f64 / 2f64.powi(accum_bits as i32) * sample_rate
}
