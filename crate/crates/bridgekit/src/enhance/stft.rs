//! STFT analysis/synthesis with square-root Hann windows.
//!
//! Both analysis and synthesis use the sqrt-Hann window, so the overlap-add
//! product is a periodic Hann, which sums to exactly 1 at 50% overlap: the
//! fully-overlapped interior reconstructs without normalization.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{BridgeError, Result};

/// Analysis metadata carried by every spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub win_len: usize,
    pub hop: usize,
    pub n_fft: usize,
}

/// One-sided complex spectrogram: `frames[l][f]`, F = n_fft/2 + 1 bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_bins(&self) -> usize {
        self.config.n_fft / 2 + 1
    }

    /// Iterate over all bins of all frames.
    pub fn bins(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.frames.iter().flatten().copied()
    }
}

/// STFT transformer with a fixed configuration.
#[derive(Debug, Clone)]
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
}

impl Stft {
    pub fn new(win_len: usize, hop: usize, n_fft: usize) -> Result<Self> {
        if win_len == 0 || hop == 0 || n_fft < win_len {
            return Err(BridgeError::InvalidInput(format!(
                "invalid STFT configuration: win_len={win_len}, hop={hop}, n_fft={n_fft}"
            )));
        }
        // sqrt of the periodic Hann is the sine window.
        let window = (0..win_len)
            .map(|i| (std::f64::consts::PI * i as f64 / win_len as f64).sin())
            .collect();
        Ok(Self { config: StftConfig { win_len, hop, n_fft }, window })
    }

    /// 32 ms segments at 50% overlap with a 512-point transform: the
    /// standard 16 kHz speech configuration.
    pub fn speech_default() -> Self {
        Self::new(512, 256, 512).expect("valid fixed configuration")
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Forward transform. Requires at least one full window of samples.
    pub fn stft(&self, x: &[f64]) -> Result<Spectrogram> {
        let StftConfig { win_len, hop, n_fft } = self.config;
        if x.len() < win_len {
            return Err(BridgeError::SignalTooShort { got: x.len(), need: win_len });
        }
        let n_frames = 1 + (x.len() - win_len) / hop;
        let n_bins = n_fft / 2 + 1;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n_fft);
        let mut frames = Vec::with_capacity(n_frames);
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        for l in 0..n_frames {
            let start = l * hop;
            for v in buf.iter_mut() {
                *v = Complex64::new(0.0, 0.0);
            }
            for (i, w) in self.window.iter().enumerate() {
                buf[i] = Complex64::new(x[start + i] * w, 0.0);
            }
            fft.process(&mut buf);
            frames.push(buf[..n_bins].to_vec());
        }
        Ok(Spectrogram { frames, config: self.config })
    }

    /// Inverse transform with overlap-add synthesis. Returns
    /// (n_frames - 1)·hop + win_len samples; edges where the window
    /// overlap is incomplete are renormalized where possible.
    pub fn istft(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        if spec.config != self.config {
            return Err(BridgeError::InvalidInput(
                "spectrogram was produced with a different STFT configuration".into(),
            ));
        }
        let StftConfig { win_len, hop, n_fft } = self.config;
        let n_bins = n_fft / 2 + 1;
        let out_len = (spec.n_frames().max(1) - 1) * hop + win_len;
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n_fft);
        let mut out = vec![0.0; out_len];
        let mut wsum = vec![0.0; out_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        let scale = 1.0 / n_fft as f64;
        for (l, frame) in spec.frames.iter().enumerate() {
            if frame.len() != n_bins {
                return Err(BridgeError::LengthMismatch { expected: n_bins, got: frame.len() });
            }
            buf[..n_bins].copy_from_slice(frame);
            // Hermitian completion of the one-sided spectrum.
            for f in 1..n_fft - n_bins + 1 {
                buf[n_fft - f] = frame[f].conj();
            }
            ifft.process(&mut buf);
            let start = l * hop;
            for (i, w) in self.window.iter().enumerate() {
                out[start + i] += buf[i].re * scale * w;
                wsum[start + i] += w * w;
            }
        }
        for (v, &w) in out.iter_mut().zip(&wsum) {
            if w > 1e-6 {
                *v /= w;
            }
        }
        Ok(out)
    }

    /// Edge padding used by [`Stft::padded_stft`] and [`Stft::filter`].
    pub fn filter_pad(&self) -> usize {
        self.config.win_len - self.config.hop
    }

    /// Forward transform of the zero-padded signal used for filtering:
    /// one `win_len - hop` pad on each side puts every original sample in
    /// the fully-overlapped interior.
    pub fn padded_stft(&self, x: &[f64]) -> Result<Spectrogram> {
        let StftConfig { win_len, hop, .. } = self.config;
        let pad = self.filter_pad();
        let total = x.len() + 2 * pad;
        let frames_needed = total.div_ceil(hop) + 1;
        let padded_len = (frames_needed - 1) * hop + win_len;
        let mut padded = vec![0.0; padded_len];
        padded[pad..pad + x.len()].copy_from_slice(x);
        self.stft(&padded)
    }

    /// Apply a per-bin complex gain in the STFT domain and resynthesize to
    /// the input length.
    pub fn filter(&self, x: &[f64], gain: impl Fn(usize, usize) -> Complex64) -> Result<Vec<f64>> {
        let pad = self.filter_pad();
        let mut spec = self.padded_stft(x)?;
        for (l, frame) in spec.frames.iter_mut().enumerate() {
            for (f, bin) in frame.iter_mut().enumerate() {
                *bin *= gain(l, f);
            }
        }
        let rebuilt = self.istft(&spec)?;
        Ok(rebuilt[pad..pad + x.len()].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn window_overlap_adds_to_one() {
        let stft = Stft::speech_default();
        let w = stft.window();
        for i in 0..256 {
            let s = w[i] * w[i] + w[i + 256] * w[i + 256];
            assert!((s - 1.0).abs() <= 1e-12, "overlap sum {s} at {i}");
        }
    }

    #[test]
    fn round_trip_on_random_signal() {
        let stft = Stft::speech_default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..16000).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let spec = stft.stft(&x).unwrap();
        let back = stft.istft(&spec).unwrap();
        for i in 512..back.len() - 512 {
            let err = (back[i] - x[i]).abs() / x[i].abs().max(1.0);
            assert!(err <= 1e-10, "sample {i}: {} vs {}", back[i], x[i]);
        }
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let stft = Stft::speech_default();
        let spec = stft.stft(&vec![0.0; 4096]).unwrap();
        assert!(spec.bins().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn too_short_input_is_rejected() {
        let stft = Stft::speech_default();
        assert!(matches!(
            stft.stft(&vec![0.0; 100]),
            Err(BridgeError::SignalTooShort { .. })
        ));
    }

    #[test]
    fn tone_at_bin_center_concentrates_energy() {
        let stft = Stft::new(512, 256, 512).unwrap();
        let bin = 40usize;
        let n = 8192;
        // Frequency exactly at a bin center: bin cycles per 512 samples.
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * bin as f64 * i as f64 / 512.0).cos())
            .collect();
        let spec = stft.stft(&x).unwrap();

        // Oracle: direct DFT of the windowed frame.
        let frame_idx = 4;
        let start = frame_idx * 256;
        let mut oracle = vec![Complex64::new(0.0, 0.0); 257];
        for (f, slot) in oracle.iter_mut().enumerate() {
            for i in 0..512 {
                let angle = -2.0 * std::f64::consts::PI * f as f64 * i as f64 / 512.0;
                *slot += x[start + i]
                    * stft.window()[i]
                    * Complex64::new(angle.cos(), angle.sin());
            }
        }
        for (f, (got, want)) in spec.frames[frame_idx].iter().zip(&oracle).enumerate() {
            assert!(
                (got - want).norm() <= 1e-9 * 512.0,
                "bin {f} disagrees with the direct DFT"
            );
        }

        // Energy concentration: the sine window's mainlobe spans +-1.5 bins,
        // so the tone bin and two neighbors each side carry nearly all the
        // frame energy, with the peak exactly at the tone bin.
        let total: f64 = spec.frames[frame_idx].iter().map(|b| b.norm_sqr()).sum();
        let near: f64 =
            (bin - 2..=bin + 2).map(|f| spec.frames[frame_idx][f].norm_sqr()).sum();
        assert!(near / total > 0.995, "concentration {}", near / total);
        let peak = spec.frames[frame_idx]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(f, _)| f)
            .unwrap();
        assert_eq!(peak, bin);
    }

    #[test]
    fn filter_with_unit_gain_is_identity_at_full_length() {
        let stft = Stft::speech_default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() - 0.5).collect();
        let out = stft.filter(&x, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(out.len(), x.len());
        for i in 0..x.len() {
            assert!((out[i] - x[i]).abs() <= 1e-10, "sample {i}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

        #[test]
        fn round_trip_interior_for_varied_lengths(len in 1024usize..6000, seed in 0u64..1000) {
            let stft = Stft::speech_default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let spec = stft.stft(&x).unwrap();
            let back = stft.istft(&spec).unwrap();
            prop_assert!(back.len() >= 512);
            for i in 512..back.len().saturating_sub(512) {
                prop_assert!((back[i] - x[i]).abs() <= 1e-10 * x[i].abs().max(1.0));
            }
        }
    }
}
