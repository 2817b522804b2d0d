//! Pipeline plumbing behind the `svskit` binary: synthetic corpus
//! generation, dataset loading, training loops, run manifests and the
//! ablation experiment harness.

pub mod corpus;
pub mod dataset;
pub mod experiment;
pub mod manifest;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Score(#[from] svskit::score::ScoreError),
    #[error(transparent)]
    Dsp(#[from] svskit::dsp::DspError),
    #[error(transparent)]
    Frontend(#[from] svskit::frontend::FrontendError),
    #[error(transparent)]
    Vocoder(#[from] svskit::vocoder::VocoderError),
    #[error(transparent)]
    Eval(#[from] svskit::eval::EvalError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for validation problems, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Score(_) | CliError::Json(_) => 2,
            _ => 3,
        }
    }
}
