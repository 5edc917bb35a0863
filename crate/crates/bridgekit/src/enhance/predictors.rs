//! Stand-in predictors for driving the samplers.
//!
//! These play the role of the trained network in the data-prediction
//! contract: the oracle returns the clean reference, the blend mixes clean
//! and noisy, and the Wiener predictor applies the reference pair's ideal
//! per-bin gain to the noisy input.

use num_complex::Complex64;

use crate::enhance::stft::Stft;
use crate::enhance::synth::PairedSignal;
use crate::error::{BridgeError, Result};
use crate::samplers::{OraclePredictor, Predictor};

/// Embed a real waveform as a complex state vector (zero imaginary part).
pub fn embed_real(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Real part of a complex state vector.
pub fn real_part(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|v| v.re).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorSpec {
    Oracle,
    Blend { beta: f64 },
    Wiener,
}

impl PredictorSpec {
    pub fn parse(name: &str, beta: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "oracle" => Ok(PredictorSpec::Oracle),
            "blend" => Ok(PredictorSpec::Blend { beta: beta.unwrap_or(0.5) }),
            "wiener" => Ok(PredictorSpec::Wiener),
            other => Err(BridgeError::InvalidInput(format!("unknown predictor kind `{other}`"))),
        }
    }
}

/// beta·s + (1 - beta)·y, with y taken from the call.
struct BlendPredictor {
    clean: Vec<Complex64>,
    beta: f64,
}

impl Predictor for BlendPredictor {
    fn predict(&self, _x: &[Complex64], y: &[Complex64], _t: f64) -> Vec<Complex64> {
        self.clean
            .iter()
            .zip(y)
            .map(|(&s, &yv)| self.beta * s + (1.0 - self.beta) * yv)
            .collect()
    }
}

/// Per-bin gain |S|^2 / (|S|^2 + |Y - S|^2) from the reference pair,
/// applied to the call's noisy input in the STFT domain.
struct WienerPredictor {
    stft: Stft,
    gains: Vec<Vec<f64>>,
}

impl WienerPredictor {
    fn new(reference: &PairedSignal, stft: &Stft) -> Result<Self> {
        let clean_spec = stft.padded_stft(&reference.clean)?;
        let noise: Vec<f64> =
            reference.noisy.iter().zip(&reference.clean).map(|(y, s)| y - s).collect();
        let noise_spec = stft.padded_stft(&noise)?;
        let gains = clean_spec
            .frames
            .iter()
            .zip(&noise_spec.frames)
            .map(|(sf, nf)| {
                sf.iter()
                    .zip(nf)
                    .map(|(s, n)| {
                        let denom = s.norm_sqr() + n.norm_sqr();
                        if denom == 0.0 {
                            1.0
                        } else {
                            s.norm_sqr() / denom
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { stft: stft.clone(), gains })
    }
}

impl Predictor for WienerPredictor {
    fn predict(&self, _x: &[Complex64], y: &[Complex64], _t: f64) -> Vec<Complex64> {
        let filtered = self
            .stft
            .filter(&real_part(y), |l, f| {
                let frame = &self.gains[l.min(self.gains.len() - 1)];
                Complex64::new(frame[f.min(frame.len() - 1)], 0.0)
            })
            .expect("filtering a signal the gain grid was built for");
        embed_real(&filtered)
    }
}

/// Build a predictor from its kind, the reference pair, and the STFT
/// configuration (used by the Wiener kind).
pub fn make_predictor(
    spec: PredictorSpec,
    reference: &PairedSignal,
    stft: &Stft,
) -> Result<Box<dyn Predictor>> {
    match spec {
        PredictorSpec::Oracle => {
            Ok(Box::new(OraclePredictor { clean: embed_real(&reference.clean) }))
        }
        PredictorSpec::Blend { beta } => {
            if !(0.0..=1.0).contains(&beta) {
                return Err(BridgeError::InvalidInput(format!("beta = {beta} outside [0, 1]")));
            }
            Ok(Box::new(BlendPredictor { clean: embed_real(&reference.clean), beta }))
        }
        PredictorSpec::Wiener => Ok(Box::new(WienerPredictor::new(reference, stft)?)),
    }
}
