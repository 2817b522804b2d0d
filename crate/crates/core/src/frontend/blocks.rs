//! Encoder/decoder block, duration predictor and post-net.

use crate::neural::{
    relu, relu_backward, tanh_backward, tanh_forward, Conv1d, Conv1dCache, LayerNorm,
    LayerNormCache, Linear, LinearCache, MultiHeadAttention, MultiHeadAttentionCache, NeuralError,
    Padding, ParamModel, Parameter, Tensor,
};

/// Self-attention followed by a smoothing convolution, each wrapped in a
/// residual connection and layer norm.
#[derive(Debug, Clone)]
pub struct Block {
    mha: MultiHeadAttention,
    ln1: LayerNorm,
    conv: Conv1d,
    ln2: LayerNorm,
}

pub struct BlockCache {
    mha: MultiHeadAttentionCache,
    ln1: LayerNormCache,
    conv: Conv1dCache,
    relu_out: Tensor,
    ln2: LayerNormCache,
}

impl Block {
    pub fn new(
        name: &str,
        dim: usize,
        heads: usize,
        kernel: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, NeuralError> {
        Ok(Block {
            mha: MultiHeadAttention::new(&format!("{name}.mha"), dim, heads, rng)?,
            ln1: LayerNorm::new(&format!("{name}.ln1"), dim),
            conv: Conv1d::new(&format!("{name}.conv"), kernel, dim, dim, Padding::Same, rng)?,
            ln2: LayerNorm::new(&format!("{name}.ln2"), dim),
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, BlockCache), NeuralError> {
        let (attn, c_mha) = self.mha.forward(x, x, x, None)?;
        let (n1, c_ln1) = self.ln1.forward(&x.add(&attn));
        let (conv_out, c_conv) = self.conv.forward(&n1);
        let (act, relu_out) = relu(&conv_out);
        let (n2, c_ln2) = self.ln2.forward(&n1.add(&act));
        Ok((n2, BlockCache { mha: c_mha, ln1: c_ln1, conv: c_conv, relu_out, ln2: c_ln2 }))
    }

    pub fn backward(&mut self, cache: &BlockCache, grad_out: &Tensor) -> Tensor {
        let d_r2 = self.ln2.backward(&cache.ln2, grad_out);
        let d_act = relu_backward(&cache.relu_out, &d_r2);
        let mut d_n1 = self.conv.backward(&cache.conv, &d_act);
        d_n1.add_assign(&d_r2);
        let d_r1 = self.ln1.backward(&cache.ln1, &d_n1);
        let (dq, dk, dv) = self.mha.backward(&cache.mha, &d_r1);
        let mut dx = d_r1;
        dx.add_assign(&dq);
        dx.add_assign(&dk);
        dx.add_assign(&dv);
        dx
    }
}

impl ParamModel for Block {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.mha.params_mut();
        p.extend(self.ln1.params_mut());
        p.extend(self.conv.params_mut());
        p.extend(self.ln2.params_mut());
        p
    }
}

/// Two convolution stages and a linear head predicting `ln(1 + frames)`
/// per phone.
#[derive(Debug, Clone)]
pub struct DurationPredictor {
    conv1: Conv1d,
    ln1: LayerNorm,
    conv2: Conv1d,
    ln2: LayerNorm,
    out: Linear,
}

pub struct DurationCache {
    c1: Conv1dCache,
    r1: Tensor,
    l1: LayerNormCache,
    c2: Conv1dCache,
    r2: Tensor,
    l2: LayerNormCache,
    co: LinearCache,
}

impl DurationPredictor {
    pub fn new(name: &str, dim: usize, rng: &mut impl rand::Rng) -> Result<Self, NeuralError> {
        Ok(DurationPredictor {
            conv1: Conv1d::new(&format!("{name}.conv1"), 3, dim, dim, Padding::Same, rng)?,
            ln1: LayerNorm::new(&format!("{name}.ln1"), dim),
            conv2: Conv1d::new(&format!("{name}.conv2"), 3, dim, dim, Padding::Same, rng)?,
            ln2: LayerNorm::new(&format!("{name}.ln2"), dim),
            out: Linear::new(&format!("{name}.out"), dim, 1, rng),
        })
    }

    /// Per-phone log-domain duration predictions `[P]`.
    pub fn forward(&self, encoder_out: &Tensor) -> (Vec<f64>, DurationCache) {
        let (c1, cache_c1) = self.conv1.forward(encoder_out);
        let (a1, r1) = relu(&c1);
        let (n1, l1) = self.ln1.forward(&a1);
        let (c2, cache_c2) = self.conv2.forward(&n1);
        let (a2, r2) = relu(&c2);
        let (n2, l2) = self.ln2.forward(&a2);
        let (pred, co) = self.out.forward(&n2);
        (
            pred.data().to_vec(),
            DurationCache { c1: cache_c1, r1, l1, c2: cache_c2, r2, l2, co },
        )
    }

    pub fn backward(&mut self, cache: &DurationCache, grad_pred: &[f64]) -> Tensor {
        let g = Tensor::matrix(grad_pred.len(), 1, grad_pred.to_vec());
        let d_n2 = self.out.backward(&cache.co, &g);
        let d_a2 = self.ln2.backward(&cache.l2, &d_n2);
        let d_c2 = relu_backward(&cache.r2, &d_a2);
        let d_n1 = self.conv2.backward(&cache.c2, &d_c2);
        let d_a1 = self.ln1.backward(&cache.l1, &d_n1);
        let d_c1 = relu_backward(&cache.r1, &d_a1);
        self.conv1.backward(&cache.c1, &d_c1)
    }

    /// Inference: `round(exp(p) - 1)`, at least one frame per phone.
    pub fn to_frames(pred: &[f64]) -> Vec<usize> {
        pred.iter()
            .map(|p| ((p.exp() - 1.0).round().max(1.0)) as usize)
            .collect()
    }

    /// Training target for a phone of `frames` frames.
    pub fn log_target(frames: usize) -> f64 {
        ((frames + 1) as f64).ln()
    }
}

impl ParamModel for DurationPredictor {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.conv1.params_mut();
        p.extend(self.ln1.params_mut());
        p.extend(self.conv2.params_mut());
        p.extend(self.ln2.params_mut());
        p.extend(self.out.params_mut());
        p
    }
}

/// Five same-padded convolutions producing a residual refinement; tanh on
/// all but the last, which starts at zero so refinement begins as identity.
#[derive(Debug, Clone)]
pub struct PostNet {
    convs: Vec<Conv1d>,
}

pub struct PostNetCache {
    conv_caches: Vec<Conv1dCache>,
    tanh_outs: Vec<Tensor>,
}

impl PostNet {
    pub fn new(
        name: &str,
        feature_dim: usize,
        channels: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, NeuralError> {
        let mut convs = Vec::with_capacity(5);
        for i in 0..5 {
            let (c_in, c_out) = match i {
                0 => (feature_dim, channels),
                4 => (channels, feature_dim),
                _ => (channels, channels),
            };
            convs.push(Conv1d::new(&format!("{name}.conv{i}"), 5, c_in, c_out, Padding::Same, rng)?);
        }
        // zero the final layer so the initial residual is exactly zero
        let last = convs.last_mut().unwrap();
        last.kernel.tensor = Tensor::zeros(last.kernel.tensor.shape().to_vec());
        Ok(PostNet { convs })
    }

    /// The residual to add to the decoder features.
    pub fn forward(&self, x: &Tensor) -> (Tensor, PostNetCache) {
        let mut conv_caches = Vec::with_capacity(5);
        let mut tanh_outs = Vec::with_capacity(4);
        let mut h = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            let (c, cache) = conv.forward(&h);
            conv_caches.push(cache);
            if i < 4 {
                let (t, t_out) = tanh_forward(&c);
                tanh_outs.push(t_out);
                h = t;
            } else {
                h = c;
            }
        }
        (h, PostNetCache { conv_caches, tanh_outs })
    }

    pub fn backward(&mut self, cache: &PostNetCache, grad_residual: &Tensor) -> Tensor {
        let mut g = grad_residual.clone();
        for i in (0..5).rev() {
            if i < 4 {
                g = tanh_backward(&cache.tanh_outs[i], &g);
            }
            g = self.convs[i].backward(&cache.conv_caches[i], &g);
        }
        g
    }
}

impl ParamModel for PostNet {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.convs.iter_mut().flat_map(|c| c.params_mut()).collect()
    }
}
