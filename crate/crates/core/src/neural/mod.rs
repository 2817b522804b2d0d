//! Differentiable-computation core.
//!
//! A deliberately small layer set — embedding, linear, layer norm,
//! multi-head attention, 1-D convolution, recurrence, the usual pointwise
//! activations — each with a hand-written backward pass, verified by
//! central-difference gradient checking. No general autodiff graph; models
//! wire layers together explicitly and thread the caches themselves.

mod attention;
mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod recurrent;
mod tensor;

pub use attention::{MultiHeadAttention, MultiHeadAttentionCache};
pub use checkpoint::{
    config_hash, load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_MAGIC,
};
pub use gradcheck::grad_check;
pub use layers::{
    relu, relu_backward, sigmoid, sigmoid_backward, sinusoidal_positional_encoding, softmax_nll,
    softmax_nll_backward, tanh_backward, tanh_forward, Conv1d, Conv1dCache, Embedding, LayerNorm,
    LayerNormCache, Linear, LinearCache, Padding, SoftmaxNllCache,
};
pub use optim::{noam_lr, AdamState};
pub use recurrent::{BiRnn, BiRnnCache, Highway, HighwayCache, MaxPool1, MaxPool1Cache};
pub use tensor::{matmul, matmul_at_acc, matmul_bt, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {context}: {details}")]
    Shape { context: &'static str, details: String },
    #[error("embedding id {id} out of range (vocabulary {vocab})")]
    IndexOutOfRange { id: usize, vocab: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
}

/// A named trainable tensor.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, tensor: Tensor) -> Self {
        Parameter { name: name.into(), tensor, trainable: true }
    }

    pub fn frozen(name: impl Into<String>, tensor: Tensor) -> Self {
        Parameter { name: name.into(), tensor, trainable: false }
    }

    /// Glorot-uniform initialized matrix parameter.
    pub fn glorot(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
        Parameter::new(name, Tensor::from_vec(vec![rows, cols], data))
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Parameter::new(name, Tensor::zeros(shape))
    }
}

/// Anything that exposes its parameters in a stable order.
pub trait ParamModel {
    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.tensor.zero_grad();
        }
    }

    fn param_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.tensor.len()).sum()
    }
}
