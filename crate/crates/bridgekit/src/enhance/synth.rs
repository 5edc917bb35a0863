//! Synthetic clean/noisy pair generation for the desk-scale pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use num_complex::Complex64;

use crate::error::{BridgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
}

impl NoiseKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            other => Err(BridgeError::InvalidInput(format!("unknown noise kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub n_tones: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub snr_db: f64,
    pub noise_kind: NoiseKind,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_tones: 6,
            duration_s: 1.0,
            sample_rate: 16_000,
            snr_db: 0.0,
            noise_kind: NoiseKind::White,
        }
    }
}

/// A clean/noisy waveform pair with the mixing SNR actually achieved.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSignal {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub sample_rate: u32,
    pub snr_db: f64,
}

impl PairedSignal {
    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn pink_from_white(white: &[f64]) -> Vec<f64> {
    // Shape the spectrum by 1/sqrt(f): flat power per octave.
    let n = white.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = white.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(n - k) as f64;
        *v /= f.sqrt();
    }
    ifft.process(&mut buf);
    buf.iter().map(|v| v.re / n as f64).collect()
}

/// Generate a random-phase multitone clean signal at unit RMS plus a noise
/// floor scaled so the achieved SNR equals the request exactly.
pub fn synth_pair(spec: &SynthSpec, seed: u64) -> Result<PairedSignal> {
    if !spec.snr_db.is_finite() {
        return Err(BridgeError::InvalidInput(format!("non-finite SNR {}", spec.snr_db)));
    }
    if spec.n_tones == 0 {
        return Err(BridgeError::InvalidInput("n_tones must be >= 1".into()));
    }
    let n = (spec.duration_s * spec.sample_rate as f64).round() as usize;
    if n < 256 {
        return Err(BridgeError::SignalTooShort { got: n, need: 256 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = spec.sample_rate as f64;

    let mut clean = vec![0.0f64; n];
    for _ in 0..spec.n_tones {
        let freq = 80.0 + rng.random::<f64>() * (0.45 * rate - 80.0);
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let omega = std::f64::consts::TAU * freq / rate;
        for (i, v) in clean.iter_mut().enumerate() {
            *v += (omega * i as f64 + phase).sin();
        }
    }
    let rms = (energy(&clean) / n as f64).sqrt();
    for v in &mut clean {
        *v /= rms;
    }

    let white: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut noise = match spec.noise_kind {
        NoiseKind::White => white,
        NoiseKind::Pink => pink_from_white(&white),
    };
    let scale = (energy(&clean) / energy(&noise)).sqrt() * 10f64.powf(-spec.snr_db / 20.0);
    for v in &mut noise {
        *v *= scale;
    }
    let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(s, d)| s + d).collect();
    let achieved = 10.0 * (energy(&clean) / energy(&noise)).log10();
    Ok(PairedSignal { clean, noisy, sample_rate: spec.sample_rate, snr_db: achieved })
}
