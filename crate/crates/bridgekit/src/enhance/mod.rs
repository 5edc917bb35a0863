//! Desk-scale paired-signal pipeline: synthetic pairs, STFT, losses, the
//! SI-SNR metric, and stand-in predictors for the samplers.
//!
//! The samplers run on waveform-domain real vectors embedded as complex
//! states with zero imaginary part; the complex STFT space is exercised by
//! the loss path and the Wiener predictor.

mod loss;
mod predictors;
mod stft;
mod synth;
pub mod wav;

pub use loss::{si_snr_db, total_loss, Lambdas, LossBreakdown, LOSS_EPS};
pub use predictors::{embed_real, make_predictor, real_part, PredictorSpec};
pub use stft::{Spectrogram, Stft, StftConfig};
pub use synth::{synth_pair, NoiseKind, PairedSignal, SynthSpec};
