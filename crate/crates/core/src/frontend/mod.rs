//! The acoustic model: encoder → length regulator → decoder, with a
//! configurable pitch-condition placement, duration predictor, optional
//! post-net refinement and an optional mel→linear CBHG head.

mod blocks;
mod cbhg;
mod losses;
mod model;
mod regulator;

pub use cbhg::{CbhgConfig, CbhgModel};
pub use losses::{loss_mse, loss_weighted_abs, PRIORITY_BAND};
pub use model::{pitch_to_id, FrontEnd, SynthesisOutput, TrainStats};
pub use regulator::{
    expand_ids, length_regulate, length_regulate_backward, smooth_boundaries,
    smooth_boundaries_backward, SmoothingKernel,
};

use crate::neural::{NeuralError, Tensor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pitch ids span the rest index plus semitones 24..=96.
pub const PITCH_VOCAB: usize = 97;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("{what} has length {got}, expected {want}")]
    LengthMismatch { what: &'static str, got: usize, want: usize },
    #[error("durations sum to zero, nothing to expand")]
    EmptyExpansion,
    #[error("loss shapes differ: pred {pred:?} vs target {target:?}")]
    LossShape { pred: Vec<usize>, target: Vec<usize> },
    #[error("priority band {band:?} invalid for {cols} bins")]
    BadBand { band: std::ops::Range<usize>, cols: usize },
    #[error("smoothing kernel: {0}")]
    BadKernel(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("frame pitch required when the decoder carries the pitch condition")]
    MissingFramePitch,
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(u64),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Where the pitch condition joins the data stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PitchPlacement {
    EncoderOnly,
    DecoderOnly,
    Both,
}

impl PitchPlacement {
    pub fn feeds_encoder(self) -> bool {
        matches!(self, PitchPlacement::EncoderOnly | PitchPlacement::Both)
    }

    pub fn feeds_decoder(self) -> bool {
        matches!(self, PitchPlacement::DecoderOnly | PitchPlacement::Both)
    }
}

/// Which acoustic feature the decoder projects to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputHead {
    Mel,
    Linear,
    Bfcc,
}

impl OutputHead {
    /// Output dimension; the BFCC head carries 18 coefficients plus a
    /// normalized pitch channel.
    pub fn dim(self) -> usize {
        match self {
            OutputHead::Mel => crate::dsp::MEL_BANDS,
            OutputHead::Linear => crate::dsp::LINEAR_BINS,
            OutputHead::Bfcc => crate::dsp::BFCC_COEFFS + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEndConfig {
    /// Encoder and decoder depth. The reference configuration is 6; toy
    /// runs use 2.
    pub layers: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub conv_kernel: usize,
    pub pitch_placement: PitchPlacement,
    pub output_head: OutputHead,
    pub use_postnet: bool,
    pub use_cbhg: bool,
    pub speaker_count: usize,
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        FrontEndConfig {
            layers: 2,
            model_dim: 64,
            heads: 2,
            conv_kernel: 3,
            pitch_placement: PitchPlacement::EncoderOnly,
            output_head: OutputHead::Mel,
            use_postnet: false,
            use_cbhg: false,
            speaker_count: 1,
        }
    }
}

impl FrontEndConfig {
    pub fn validate(&self) -> Result<(), FrontendError> {
        if self.model_dim % self.heads != 0 {
            return Err(FrontendError::Config(format!(
                "model_dim {} not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        if self.layers == 0 || self.speaker_count == 0 {
            return Err(FrontendError::Config("layers and speaker_count must be >= 1".into()));
        }
        if self.conv_kernel % 2 == 0 {
            return Err(FrontendError::Config("conv_kernel must be odd".into()));
        }
        if self.use_postnet && self.output_head != OutputHead::Mel {
            return Err(FrontendError::Config("post-net applies to the mel head only".into()));
        }
        Ok(())
    }

    /// Canonical hash tying checkpoints to the exact configuration.
    pub fn hash(&self) -> String {
        crate::neural::config_hash(&serde_json::to_string(self).expect("config serializes"))
    }
}

/// One training utterance.
#[derive(Debug, Clone)]
pub struct Batch {
    pub phones: Vec<usize>,
    pub pitch: Vec<usize>,
    pub durations: Vec<usize>,
    /// `[total_frames, head_dim]` target features.
    pub target: Tensor,
    pub speaker: usize,
}

impl Batch {
    pub fn validate(&self, cfg: &FrontEndConfig) -> Result<(), FrontendError> {
        if self.pitch.len() != self.phones.len() {
            return Err(FrontendError::LengthMismatch {
                what: "pitch",
                got: self.pitch.len(),
                want: self.phones.len(),
            });
        }
        if self.durations.len() != self.phones.len() {
            return Err(FrontendError::LengthMismatch {
                what: "durations",
                got: self.durations.len(),
                want: self.phones.len(),
            });
        }
        let total: usize = self.durations.iter().sum();
        if self.target.rows() != total {
            return Err(FrontendError::LengthMismatch {
                what: "target frames",
                got: self.target.rows(),
                want: total,
            });
        }
        if self.target.cols() != cfg.output_head.dim() {
            return Err(FrontendError::LengthMismatch {
                what: "target feature dim",
                got: self.target.cols(),
                want: cfg.output_head.dim(),
            });
        }
        if self.speaker >= cfg.speaker_count {
            return Err(FrontendError::Config(format!(
                "speaker id {} out of range ({})",
                self.speaker, cfg.speaker_count
            )));
        }
        Ok(())
    }
}
