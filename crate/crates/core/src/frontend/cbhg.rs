//! CBHG mel→linear converter: convolution bank, max pooling, projections,
//! a residual connection, a highway stack and a bidirectional recurrence.

use super::losses::{loss_weighted_abs, PRIORITY_BAND};
use super::FrontendError;
use crate::dsp::{LinearSpectrogram, MelSpectrogram, LINEAR_BINS, MEL_BANDS};
use crate::neural::{
    load_checkpoint, relu, relu_backward, save_checkpoint, AdamState, BiRnn, BiRnnCache, Conv1d,
    Conv1dCache, Highway, HighwayCache, Linear, LinearCache, MaxPool1, MaxPool1Cache, NeuralError,
    Padding, ParamModel, Parameter, Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbhgConfig {
    /// Largest bank kernel; sizes run 1..=bank_kernels.
    pub bank_kernels: usize,
    pub bank_channels: usize,
    pub highway_layers: usize,
    pub rnn_hidden: usize,
}

impl Default for CbhgConfig {
    fn default() -> Self {
        CbhgConfig { bank_kernels: 8, bank_channels: 16, highway_layers: 4, rnn_hidden: 64 }
    }
}

impl CbhgConfig {
    pub fn hash(&self) -> String {
        crate::neural::config_hash(&serde_json::to_string(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone)]
pub struct CbhgModel {
    pub cfg: CbhgConfig,
    bank: Vec<Conv1d>,
    proj1: Conv1d,
    proj2: Conv1d,
    highways: Vec<Highway>,
    rnn: BiRnn,
    out: Linear,
}

struct Caches {
    bank: Vec<Conv1dCache>,
    bank_relu: Vec<Tensor>,
    pool: MaxPool1Cache,
    proj1: Conv1dCache,
    proj1_relu: Tensor,
    proj2: Conv1dCache,
    highways: Vec<HighwayCache>,
    rnn: BiRnnCache,
    out: LinearCache,
}

impl CbhgModel {
    pub fn new(cfg: CbhgConfig, seed: u64) -> Result<Self, NeuralError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bank = Vec::with_capacity(cfg.bank_kernels);
        for k in 1..=cfg.bank_kernels {
            let padding = if k % 2 == 1 { Padding::Same } else { Padding::SameEven };
            bank.push(Conv1d::new(
                &format!("cbhg.bank{k}"),
                k,
                MEL_BANDS,
                cfg.bank_channels,
                padding,
                &mut rng,
            )?);
        }
        let bank_out = cfg.bank_kernels * cfg.bank_channels;
        let proj1 = Conv1d::new("cbhg.proj1", 3, bank_out, MEL_BANDS, Padding::Same, &mut rng)?;
        let proj2 = Conv1d::new("cbhg.proj2", 3, MEL_BANDS, MEL_BANDS, Padding::Same, &mut rng)?;
        let highways = (0..cfg.highway_layers)
            .map(|i| Highway::new(&format!("cbhg.highway{i}"), MEL_BANDS, &mut rng))
            .collect();
        let rnn = BiRnn::new("cbhg.rnn", MEL_BANDS, cfg.rnn_hidden, &mut rng);
        let out = Linear::new("cbhg.out", 2 * cfg.rnn_hidden, LINEAR_BINS, &mut rng);
        Ok(CbhgModel { cfg, bank, proj1, proj2, highways, rnn, out })
    }

    fn forward_full(&self, mel: &Tensor) -> (Tensor, Caches) {
        let t_len = mel.rows();
        let bank_out_dim = self.cfg.bank_kernels * self.cfg.bank_channels;

        let mut bank_out = Tensor::zeros(vec![t_len, bank_out_dim]);
        let mut bank_caches = Vec::with_capacity(self.bank.len());
        let mut bank_relu = Vec::with_capacity(self.bank.len());
        for (i, conv) in self.bank.iter().enumerate() {
            let (c, cache) = conv.forward(mel);
            let (a, r) = relu(&c);
            let off = i * self.cfg.bank_channels;
            for t in 0..t_len {
                bank_out.row_mut(t)[off..off + self.cfg.bank_channels].copy_from_slice(a.row(t));
            }
            bank_caches.push(cache);
            bank_relu.push(r);
        }
        let (pooled, pool) = MaxPool1::forward(&bank_out);
        let (p1, proj1) = self.proj1.forward(&pooled);
        let (p1a, proj1_relu) = relu(&p1);
        let (p2, proj2) = self.proj2.forward(&p1a);
        let res = mel.add(&p2);
        let mut h = res;
        let mut hw_caches = Vec::with_capacity(self.highways.len());
        for hw in &self.highways {
            let (next, cache) = hw.forward(&h);
            h = next;
            hw_caches.push(cache);
        }
        let (states, rnn) = self.rnn.forward(&h);
        let (pred, out) = self.out.forward(&states);
        (
            pred,
            Caches {
                bank: bank_caches,
                bank_relu,
                pool,
                proj1,
                proj1_relu,
                proj2,
                highways: hw_caches,
                rnn,
                out,
            },
        )
    }

    fn backward_full(&mut self, caches: &Caches, grad_pred: &Tensor) {
        let t_len = grad_pred.rows();
        let d_states = self.out.backward(&caches.out, grad_pred);
        let mut dh = self.rnn.backward(&caches.rnn, &d_states);
        for (hw, cache) in self.highways.iter_mut().zip(&caches.highways).rev() {
            dh = hw.backward(cache, &dh);
        }
        // res = mel + proj2(...); the mel side is input data
        let d_p1a = self.proj2.backward(&caches.proj2, &dh);
        let d_p1 = relu_backward(&caches.proj1_relu, &d_p1a);
        let d_pooled = self.proj1.backward(&caches.proj1, &d_p1);
        let d_bank = MaxPool1::backward(&caches.pool, &d_pooled);
        for (i, conv) in self.bank.iter_mut().enumerate() {
            let off = i * self.cfg.bank_channels;
            let mut slice = Tensor::zeros(vec![t_len, self.cfg.bank_channels]);
            for t in 0..t_len {
                slice
                    .row_mut(t)
                    .copy_from_slice(&d_bank.row(t)[off..off + self.cfg.bank_channels]);
            }
            let d_c = relu_backward(&caches.bank_relu[i], &slice);
            conv.backward(&caches.bank[i], &d_c);
        }
    }

    /// Raw linear-spectrogram prediction for a `[T, 80]` mel tensor.
    pub fn forward(&self, mel: &Tensor) -> Tensor {
        self.forward_full(mel).0
    }

    /// One optimizer step on a (mel, linear) pair with a fixed rate.
    pub fn train_step(
        &mut self,
        mel: &Tensor,
        target: &Tensor,
        adam: &mut AdamState,
        lr: f64,
    ) -> Result<f64, FrontendError> {
        self.zero_grad();
        let (pred, caches) = self.forward_full(mel);
        let (loss, grad) = loss_weighted_abs(&pred, target, PRIORITY_BAND, 1.0)?;
        if !loss.is_finite() {
            return Err(FrontendError::NonFiniteLoss(adam.step + 1));
        }
        self.backward_full(&caches, &grad);
        adam.update(self.params_mut(), lr)?;
        Ok(loss)
    }

    /// Convert a mel spectrogram to a linear-spectrogram estimate.
    pub fn cbhg_mel_to_linear(&self, mel: &MelSpectrogram) -> LinearSpectrogram {
        let t = Tensor::matrix(mel.frames(), MEL_BANDS, mel.flat().to_vec());
        let pred = self.forward(&t);
        // magnitudes are non-negative
        LinearSpectrogram::from_flat(
            pred.data().iter().map(|v| v.max(0.0)).collect(),
            mel.frames(),
        )
    }

    pub fn save(&mut self, path: &Path) -> Result<(), FrontendError> {
        let hash = self.cfg.hash();
        let params = self.params_mut();
        let refs: Vec<&Parameter> = params.iter().map(|p| &**p).collect();
        save_checkpoint(path, &refs, &hash).map_err(NeuralError::from)?;
        Ok(())
    }

    pub fn load(path: &Path, cfg: CbhgConfig, seed: u64) -> Result<Self, FrontendError> {
        let mut model = CbhgModel::new(cfg, seed).map_err(FrontendError::Neural)?;
        let hash = model.cfg.hash();
        load_checkpoint(path, model.params_mut(), &hash).map_err(NeuralError::from)?;
        Ok(model)
    }
}

impl ParamModel for CbhgModel {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p: Vec<&mut Parameter> = Vec::new();
        for c in &mut self.bank {
            p.extend(c.params_mut());
        }
        p.extend(self.proj1.params_mut());
        p.extend(self.proj2.params_mut());
        for h in &mut self.highways {
            p.extend(h.params_mut());
        }
        p.extend(self.rnn.params_mut());
        p.extend(self.out.params_mut());
        p
    }
}
