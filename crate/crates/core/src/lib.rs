//! Desk-scale singing voice synthesis.
//!
//! The pipeline runs score → phone/pitch/duration streams → encoder-decoder
//! acoustic model with a length regulator → acoustic features → vocoder
//! (Griffin-Lim or a pitch-conditioned WaveNet) → waveform, plus the
//! evaluation metrics used to compare configurations.
//!
//! Modules:
//! - [`score`]: score parsing, pinyin segmentation, pitch/duration streams
//! - [`dsp`]: framing, STFT, mel/BFCC features, F0 estimation, μ-law, WAV I/O
//! - [`neural`]: tensors, layers with hand-written backward passes, Adam,
//!   gradient checking, checkpoints
//! - [`frontend`]: the encoder/length-regulator/decoder acoustic model
//! - [`vocoder`]: Griffin-Lim and the pitch-conditioned WaveNet
//! - [`eval`]: Mel-MSE, pitch accuracy, MOS aggregation, tables and plots

pub mod dsp;
pub mod eval;
pub mod frontend;
pub mod neural;
pub mod score;
pub mod vocoder;
