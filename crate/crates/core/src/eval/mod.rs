//! Evaluation: Mel-MSE, pitch accuracy, MOS aggregation, comparison tables
//! and the spectrogram/loss-curve renderers.

mod image;
mod metrics;
mod table;

pub use image::{render_loss_curve, render_spectrogram_image, GrayImage, RgbImage};
pub use metrics::{
    format_mos, format_mse, format_percent, mos_aggregate, mse_metric, pitch_accuracy, MosSample,
};
pub use table::{compare_table, MetricsReport, MetricsRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("no voiced reference frames, pitch accuracy undefined")]
    NoVoicedFrames,
    #[error("MOS score {0} outside 1..=5")]
    BadScore(u8),
    #[error("need at least 2 MOS samples, got {0}")]
    TooFewSamples(usize),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
