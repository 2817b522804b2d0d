//! Deterministic signal processing: framing, spectra, features, codecs.
//!
//! All pipeline audio is mono 16 kHz. Frames are 800 samples (50 ms) with a
//! 160-sample (10 ms) hop, Hann-windowed, zero-padded to a 1024-point FFT,
//! giving 513 linear magnitude bins.

mod bfcc;
mod f0;
mod features;
mod mel;
mod mulaw;
mod stft;
mod wav;

pub use bfcc::{bfcc_extract, BFCC_COEFFS};
pub use f0::estimate_f0;
pub use features::{read_features, write_features, FeatureKind, FeatureSidecar};
pub use mel::{bin_frequencies, imel_project, mel_denormalize, mel_filterbank, mel_spectrogram};
pub use mulaw::{mu_law_decode, mu_law_encode, QUANTIZATION_LEVELS};
pub use stft::{frame_count, frame_signal, hann_window, istft, stft_complex, stft_magnitude};
pub use wav::{read_wav, write_wav};

use thiserror::Error;

pub const SAMPLE_RATE: u32 = 16_000;
pub const FRAME_LEN: usize = 800;
pub const HOP: usize = 160;
pub const FFT_SIZE: usize = 1024;
pub const LINEAR_BINS: usize = FFT_SIZE / 2 + 1;
pub const MEL_BANDS: usize = 80;

/// Log floor applied before normalizing band energies.
pub const LOG_FLOOR: f64 = 1e-5;
/// Fixed source dynamic range mapped onto the [-4, 4] mel feature range.
pub const LOG_CEIL: f64 = 1e3;
pub const MEL_NORM_LO: f64 = -4.0;
pub const MEL_NORM_HI: f64 = 4.0;

/// F0 search range in Hz.
pub const F0_MIN_HZ: f64 = 55.0;
pub const F0_MAX_HZ: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("signal too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("expected sample rate {expected} Hz, got {got}")]
    BadSampleRate { expected: u32, got: u32 },
    #[error("wav: {0}")]
    WavFormat(String),
    #[error("feature dump: {0}")]
    FeatureDump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono audio at a known sample rate, amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

macro_rules! feature_matrix {
    ($(#[$doc:meta])* $name:ident, $cols:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            data: Vec<f64>,
            frames: usize,
        }

        impl $name {
            pub const COLS: usize = $cols;

            pub fn from_flat(data: Vec<f64>, frames: usize) -> Self {
                assert_eq!(data.len(), frames * Self::COLS, "flat data length");
                Self { data, frames }
            }

            pub fn zeros(frames: usize) -> Self {
                Self { data: vec![0.0; frames * Self::COLS], frames }
            }

            pub fn frames(&self) -> usize {
                self.frames
            }

            pub fn row(&self, t: usize) -> &[f64] {
                &self.data[t * Self::COLS..(t + 1) * Self::COLS]
            }

            pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
                &mut self.data[t * Self::COLS..(t + 1) * Self::COLS]
            }

            pub fn flat(&self) -> &[f64] {
                &self.data
            }

            pub fn flat_mut(&mut self) -> &mut [f64] {
                &mut self.data
            }
        }
    };
}

feature_matrix!(
    /// Frames x 513 non-negative STFT magnitudes.
    LinearSpectrogram,
    LINEAR_BINS
);
feature_matrix!(
    /// Frames x 80 mel features, normalized into [-4, 4].
    MelSpectrogram,
    MEL_BANDS
);
feature_matrix!(
    /// Frames x 18 Bark-frequency cepstral coefficients.
    BfccFeature,
    bfcc::BFCC_COEFFS
);

/// Per-frame fundamental frequency in Hz; 0 marks unvoiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track(pub Vec<f64>);

impl F0Track {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn voiced_frames(&self) -> usize {
        self.0.iter().filter(|f| **f > 0.0).count()
    }
}
