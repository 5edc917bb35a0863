//! SI-SNR metric and the combined data-prediction loss.
//!
//! The loss's SI-SNR term is the plain -log10 of the projection ratio,
//! while the metric applies the conventional 10·log10 dB scaling; both are
//! exposed. Spectral terms compress magnitudes with |X|^0.3 and
//! sign-preserving real/imaginary compression X_{r,i}/|X|^0.7.

use crate::enhance::stft::Stft;
use crate::error::{BridgeError, Result};

/// Guard added to the projection-ratio denominator and used as the floor
/// of the |X|^0.7 compression divisor.
pub const LOSS_EPS: f64 = 1e-8;

/// Loss weights (lambda_1, lambda_2, lambda_3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub sisnr: f64,
    pub mag: f64,
    pub ri: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Self { sisnr: 0.01, mag: 0.7, ri: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossBreakdown {
    pub sisnr_term: f64,
    pub mag_term: f64,
    pub ri_term: f64,
    pub total: f64,
    pub lambdas: (f64, f64, f64),
}

fn projection_ratio(x_hat: &[f64], x: &[f64]) -> Result<f64> {
    if x_hat.len() != x.len() {
        return Err(BridgeError::LengthMismatch { expected: x.len(), got: x_hat.len() });
    }
    let ref_energy: f64 = x.iter().map(|v| v * v).sum();
    if ref_energy <= 0.0 {
        return Err(BridgeError::InvalidInput("zero reference signal".into()));
    }
    let dot: f64 = x_hat.iter().zip(x).map(|(a, b)| a * b).sum();
    let scale = dot / ref_energy;
    let target_energy = scale * scale * ref_energy;
    let error_energy: f64 =
        x_hat.iter().zip(x).map(|(a, b)| (a - scale * b) * (a - scale * b)).sum();
    Ok(target_energy / (error_energy + LOSS_EPS))
}

/// Scale-invariant SNR in dB: 10·log10 of the projection ratio.
pub fn si_snr_db(x_hat: &[f64], x: &[f64]) -> Result<f64> {
    Ok(10.0 * projection_ratio(x_hat, x)?.log10())
}

/// The combined loss over waveforms: the SI-SNR term plus power-compressed
/// spectral magnitude and real/imaginary terms, weighted by the lambdas.
pub fn total_loss(stft: &Stft, x_hat: &[f64], x: &[f64], lambdas: Lambdas) -> Result<LossBreakdown> {
    let sisnr_term = -projection_ratio(x_hat, x)?.log10();

    let spec_hat = stft.stft(x_hat)?;
    let spec_ref = stft.stft(x)?;
    let n = (spec_ref.n_frames() * spec_ref.n_bins()) as f64;

    let mut mag_sse = 0.0;
    let mut real_sse = 0.0;
    let mut imag_sse = 0.0;
    for (bh, br) in spec_hat.bins().zip(spec_ref.bins()) {
        let (mh, mr) = (bh.norm(), br.norm());
        let dm = mh.powf(0.3) - mr.powf(0.3);
        mag_sse += dm * dm;
        let dh = mh.powf(0.7).max(LOSS_EPS);
        let dr = mr.powf(0.7).max(LOSS_EPS);
        let dre = bh.re / dh - br.re / dr;
        let dim = bh.im / dh - br.im / dr;
        real_sse += dre * dre;
        imag_sse += dim * dim;
    }
    let mag_term = mag_sse / n;
    let ri_term = (real_sse + imag_sse) / n;

    Ok(LossBreakdown {
        sisnr_term,
        mag_term,
        ri_term,
        total: lambdas.sisnr * sisnr_term + lambdas.mag * mag_term + lambdas.ri * ri_term,
        lambdas: (lambdas.sisnr, lambdas.mag, lambdas.ri),
    })
}
