//! Pulse envelope shapes.
//!
//! | `env_func`        | parameters (`paradict`)                                   |
//! |-------------------|-----------------------------------------------------------|
//! | `square`          | `twidth`, `amplitude` = 1, `phase` = 0                     |
//! | `cos_edge_square` | `twidth`, `ramp_fraction`, `amplitude` = 1, `phase` = 0    |
//! | `DRAG`            | `twidth`, `sigmas`, `alpha`, `delta`, `amplitude` = 1      |
//! | `arbitrary`       | explicit `samples` list of `[re, im]` pairs               |
//!
//! `cos_edge_square` ramps over `r = round(ramp_fraction · n)` samples at
//! each edge with `0.5 · (1 − cos(π (k + ½) / r))`. `DRAG` is a Gaussian
//! centred in the window with `σ = twidth / (2 · sigmas)` and quadrature
//! component `alpha · g'(t) / delta`; if that pushes any sample above unit
//! magnitude the whole envelope is rescaled to peak at 1.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::samples_round;

/// A parameterized envelope function or an explicit sample array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvelopeSpec {
    Func(EnvFunc),
    Samples(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFunc {
    pub env_func: String,
    #[serde(default)]
    pub paradict: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
}

impl EnvelopeSpec {
    pub fn func(name: &str, params: &[(&str, f64)]) -> Self {
        EnvelopeSpec::Func(EnvFunc {
            env_func: name.to_string(),
            paradict: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            samples: None,
        })
    }

    /// Pulse width in seconds, if it can be read without generating samples.
    pub fn twidth(&self, sample_rate: f64) -> Option<f64> {
        match self {
            EnvelopeSpec::Func(f) => match &f.samples {
                Some(s) if f.env_func == "arbitrary" => Some(s.len() as f64 / sample_rate),
                _ => f.paradict.get("twidth").copied(),
            },
            EnvelopeSpec::Samples(s) => Some(s.len() as f64 / sample_rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("unknown envelope function `{0}`")]
    UnknownEnvelopeFunction(String),
    #[error("envelope width must be positive (twidth = {0})")]
    NonPositiveWidth(f64),
    #[error("envelope `{func}` is missing parameter `{param}`")]
    MissingParameter { func: String, param: String },
    #[error("envelope `{func}` does not take parameter `{param}`")]
    UnknownParameter { func: String, param: String },
    #[error("envelope parameter `{param}` out of range: {value}")]
    ParameterOutOfRange { param: String, value: f64 },
    #[error("explicit envelope sample {index} has magnitude {magnitude} > 1")]
    SampleOutOfRange { index: usize, magnitude: f64 },
}

struct Params<'a> {
    func: &'a str,
    map: &'a BTreeMap<String, f64>,
}

impl Params<'_> {
    fn check_keys(&self, allowed: &[&str]) -> Result<(), EnvelopeError> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(EnvelopeError::UnknownParameter {
                func: self.func.to_string(),
                param: k.clone(),
            }),
            None => Ok(()),
        }
    }

    fn req(&self, key: &str) -> Result<f64, EnvelopeError> {
        self.map
            .get(key)
            .copied()
            .ok_or_else(|| EnvelopeError::MissingParameter {
                func: self.func.to_string(),
                param: key.to_string(),
            })
    }

    fn opt(&self, key: &str, default: f64) -> f64 {
        self.map.get(key).copied().unwrap_or(default)
    }

    fn width(&self, sample_rate: f64) -> Result<usize, EnvelopeError> {
        let twidth = self.req("twidth")?;
        let n = samples_round(twidth, sample_rate);
        if twidth.is_nan() || twidth <= 0.0 || n == 0 {
            return Err(EnvelopeError::NonPositiveWidth(twidth));
        }
        Ok(n)
    }
}

fn check_amplitude(amp: f64) -> Result<f64, EnvelopeError> {
    if (0.0..=1.0).contains(&amp) {
        Ok(amp)
    } else {
        Err(EnvelopeError::ParameterOutOfRange {
            param: "amplitude".into(),
            value: amp,
        })
    }
}

fn explicit(samples: &[[f64; 2]]) -> Result<Vec<Complex64>, EnvelopeError> {
    if samples.is_empty() {
        return Err(EnvelopeError::NonPositiveWidth(0.0));
    }
    samples
        .iter()
        .enumerate()
        .map(|(index, &[re, im])| {
            let c = Complex64::new(re, im);
            let magnitude = c.norm();
            if magnitude > 1.0 + 1e-12 {
                Err(EnvelopeError::SampleOutOfRange { index, magnitude })
            } else {
                Ok(c)
            }
        })
        .collect()
}

/// Samples an envelope at `sample_rate`. Every returned sample has
/// magnitude at most 1.
pub fn generate_envelope(
    spec: &EnvelopeSpec,
    sample_rate: f64,
) -> Result<Vec<Complex64>, EnvelopeError> {
    let f = match spec {
        EnvelopeSpec::Samples(s) => return explicit(s),
        EnvelopeSpec::Func(f) => f,
    };
    let p = Params {
        func: &f.env_func,
        map: &f.paradict,
    };
    match f.env_func.as_str() {
        "arbitrary" => {
            p.check_keys(&[])?;
            explicit(f.samples.as_deref().unwrap_or(&[]))
        }
        "square" => {
            p.check_keys(&["twidth", "amplitude", "phase"])?;
            let n = p.width(sample_rate)?;
            let amp = check_amplitude(p.opt("amplitude", 1.0))?;
            let s = Complex64::from_polar(amp, p.opt("phase", 0.0));
            Ok(vec![s; n])
        }
        "cos_edge_square" => {
            p.check_keys(&["twidth", "ramp_fraction", "amplitude", "phase"])?;
            let n = p.width(sample_rate)?;
            let frac = p.req("ramp_fraction")?;
            if !(0.0..=0.5).contains(&frac) {
                return Err(EnvelopeError::ParameterOutOfRange {
                    param: "ramp_fraction".into(),
                    value: frac,
                });
            }
            let amp = check_amplitude(p.opt("amplitude", 1.0))?;
            let carrier = Complex64::from_polar(amp, p.opt("phase", 0.0));
            let r = ((frac * n as f64).round() as usize).min(n / 2);
            let ramp = |k: usize| 0.5 * (1.0 - (PI * (k as f64 + 0.5) / r as f64).cos());
            Ok((0..n)
                .map(|k| {
                    let shape = if k < r {
                        ramp(k)
                    } else if k >= n - r {
                        ramp(n - 1 - k)
                    } else {
                        1.0
                    };
                    carrier * shape
                })
                .collect())
        }
        "DRAG" => {
            p.check_keys(&["twidth", "sigmas", "alpha", "delta", "amplitude"])?;
            let n = p.width(sample_rate)?;
            let twidth = p.req("twidth")?;
            let sigmas = p.req("sigmas")?;
            let alpha = p.req("alpha")?;
            let delta = p.req("delta")?;
            if sigmas.is_nan() || sigmas <= 0.0 {
                return Err(EnvelopeError::ParameterOutOfRange {
                    param: "sigmas".into(),
                    value: sigmas,
                });
            }
            if alpha != 0.0 && delta == 0.0 {
                return Err(EnvelopeError::ParameterOutOfRange {
                    param: "delta".into(),
                    value: delta,
                });
            }
            let amp = check_amplitude(p.opt("amplitude", 1.0))?;
            let sigma = twidth / (2.0 * sigmas);
            let centre = twidth / 2.0;
            let mut out: Vec<Complex64> = (0..n)
                .map(|k| {
                    let t = (k as f64 + 0.5) / sample_rate - centre;
                    let g = (-t * t / (2.0 * sigma * sigma)).exp();
                    let quad = if alpha == 0.0 {
                        0.0
                    } else {
                        alpha * (-t / (sigma * sigma) * g) / delta
                    };
                    Complex64::new(g, quad) * amp
                })
                .collect();
            let peak = out.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if peak > 1.0 {
                out.iter_mut().for_each(|c| *c /= peak);
            }
            Ok(out)
        }
        other => Err(EnvelopeError::UnknownEnvelopeFunction(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATE: f64 = 500e6;

    #[test]
    fn square_four_samples() {
        let spec = EnvelopeSpec::func("square", &[("twidth", 8e-9), ("amplitude", 1.0)]);
        let s = generate_envelope(&spec, RATE).unwrap();
        assert_eq!(s, vec![Complex64::new(1.0, 0.0); 4]);
    }

    #[test]
    fn drag_alpha_zero_is_real() {
        let spec = EnvelopeSpec::func(
            "DRAG",
            &[
                ("alpha", 0.0),
                ("sigmas", 3.0),
                ("delta", -260.157e3),
                ("twidth", 3e-8),
            ],
        );
        let s = generate_envelope(&spec, RATE).unwrap();
        assert_eq!(s.len(), 15);
        assert!(s.iter().all(|c| c.im == 0.0));
        assert!(s.iter().all(|c| c.norm() <= 1.0));
        // Symmetric around the centre sample.
        for k in 0..15 {
            assert!((s[k].re - s[14 - k].re).abs() < 1e-12);
        }
    }

    #[test]
    fn drag_quadrature_is_bounded() {
        let spec = EnvelopeSpec::func(
            "DRAG",
            &[
                ("alpha", 0.5),
                ("sigmas", 3.0),
                ("delta", -200e6),
                ("twidth", 3e-8),
            ],
        );
        let s = generate_envelope(&spec, RATE).unwrap();
        assert!(s.iter().any(|c| c.im != 0.0));
        assert!(s.iter().all(|c| c.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn cos_edge_square_shape() {
        // 100 samples, ramp_fraction 0.1: closed form 0.5 (1 - cos(pi (k + 0.5) / 10))
        let spec = EnvelopeSpec::func("cos_edge_square", &[("ramp_fraction", 0.1), ("twidth", 200e-9)]);
        let s = generate_envelope(&spec, RATE).unwrap();
        assert_eq!(s.len(), 100);
        for k in 0..9 {
            assert!(s[k].re < s[k + 1].re);
            assert!(s[90 + k].re > s[91 + k].re);
        }
        assert!(s[9].re < 1.0);
        assert!(s[10..90].iter().all(|c| *c == Complex64::new(1.0, 0.0)));
        let expect0 = 0.5 * (1.0 - (PI * 0.5 / 10.0).cos());
        assert!((s[0].re - expect0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let bad = EnvelopeSpec::func("gaussian", &[("twidth", 1e-8)]);
        assert!(matches!(
            generate_envelope(&bad, RATE),
            Err(EnvelopeError::UnknownEnvelopeFunction(_))
        ));
        let zero = EnvelopeSpec::func("square", &[("twidth", 0.0)]);
        assert!(matches!(
            generate_envelope(&zero, RATE),
            Err(EnvelopeError::NonPositiveWidth(_))
        ));
        let neg = EnvelopeSpec::func("square", &[("twidth", -1e-8)]);
        assert!(matches!(
            generate_envelope(&neg, RATE),
            Err(EnvelopeError::NonPositiveWidth(_))
        ));
        let typo = EnvelopeSpec::func("square", &[("twidht", 1e-8)]);
        assert!(matches!(
            generate_envelope(&typo, RATE),
            Err(EnvelopeError::UnknownParameter { .. })
        ));
        let big = EnvelopeSpec::Samples(vec![[0.9, 0.9]]);
        assert!(matches!(
            generate_envelope(&big, RATE),
            Err(EnvelopeError::SampleOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn json_forms() {
        let f: EnvelopeSpec = serde_json::from_str(
            r#"{"env_func": "cos_edge_square", "paradict": {"ramp_fraction": 0.1, "twidth": 1.6e-06}}"#,
        )
        .unwrap();
        assert_eq!(generate_envelope(&f, RATE).unwrap().len(), 800);
        let a: EnvelopeSpec = serde_json::from_str("[[1, 0], [0.5, 0.5]]").unwrap();
        assert_eq!(generate_envelope(&a, RATE).unwrap().len(), 2);
        let arb: EnvelopeSpec =
            serde_json::from_str(r#"{"env_func": "arbitrary", "samples": [[0.1, 0.2]]}"#).unwrap();
        assert_eq!(
            generate_envelope(&arb, RATE).unwrap(),
            vec![Complex64::new(0.1, 0.2)]
        );
        assert!(serde_json::from_str::<EnvelopeSpec>(r#"{"env_func": "square", "junk": 1}"#).is_err());
    }
}
