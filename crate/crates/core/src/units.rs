//! Time and clock conversions shared by the assembler, compiler and simulator.

/// Default fabric clock, Hz.
pub const DEFAULT_CLOCK_HZ: f64 = 500e6;

// Absorbs float noise such as 1.59e-6 * 500e6 = 794.9999999999999 before
// rounding up.
const CYCLE_EPS: f64 = 1e-6;

/// Whole clock cycles covering `seconds`, rounded up.
pub fn cycles_ceil(seconds: f64, clock_hz: f64) -> u64 {
    let x = seconds * clock_hz;
    if x <= CYCLE_EPS {
        0
    } else {
        (x - CYCLE_EPS).ceil() as u64
    }
}

/// Nearest whole number of samples for `seconds` at `rate_hz`.
pub fn samples_round(seconds: f64, rate_hz: f64) -> usize {
    (seconds * rate_hz).round().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_absorbs_float_noise() {
        assert_eq!(cycles_ceil(1.59e-6, DEFAULT_CLOCK_HZ), 795);
        assert_eq!(cycles_ceil(1.6e-6, DEFAULT_CLOCK_HZ), 800);
        assert_eq!(cycles_ceil(30e-9, DEFAULT_CLOCK_HZ), 15);
        assert_eq!(cycles_ceil(31e-9, DEFAULT_CLOCK_HZ), 16);
        assert_eq!(cycles_ceil(1.28e-7, DEFAULT_CLOCK_HZ), 64);
        assert_eq!(cycles_ceil(0.0, DEFAULT_CLOCK_HZ), 0);
        assert_eq!(cycles_ceil(500e-6, DEFAULT_CLOCK_HZ), 250_000);
    }
}
