//! Core layers: embedding, linear, layer norm, 1-D convolution, pointwise
//! activations, positional encoding, and the categorical output head.
//!
//! Every `forward` is pure and returns a cache; `backward` consumes the
//! cache, accumulates parameter gradients, and returns the input gradient.

use super::tensor::{matmul, matmul_at_acc, matmul_bt, Tensor};
use super::{NeuralError, ParamModel, Parameter};

// ---------------------------------------------------------------- embedding

/// Row-gather table lookup.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Parameter,
}

impl Embedding {
    pub fn new(name: &str, vocab: usize, dim: usize, rng: &mut impl rand::Rng) -> Self {
        Embedding { table: Parameter::glorot(name, vocab, dim, rng) }
    }

    pub fn vocab(&self) -> usize {
        self.table.tensor.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.tensor.cols()
    }

    pub fn forward(&self, ids: &[usize]) -> Result<(Tensor, Vec<usize>), NeuralError> {
        let vocab = self.vocab();
        let dim = self.dim();
        let mut out = Tensor::zeros(vec![ids.len(), dim]);
        for (t, &id) in ids.iter().enumerate() {
            if id >= vocab {
                return Err(NeuralError::IndexOutOfRange { id, vocab });
            }
            out.row_mut(t).copy_from_slice(self.table.tensor.row(id));
        }
        Ok((out, ids.to_vec()))
    }

    /// Scatter-add the output gradient back into the table rows.
    pub fn backward(&mut self, ids: &[usize], grad_out: &Tensor) {
        let dim = self.dim();
        let grad = self.table.tensor.grad_mut();
        for (t, &id) in ids.iter().enumerate() {
            let g = grad_out.row(t);
            let row = &mut grad[id * dim..(id + 1) * dim];
            for (r, v) in row.iter_mut().zip(g) {
                *r += v;
            }
        }
    }
}

impl ParamModel for Embedding {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.table]
    }
}

// ------------------------------------------------------------------- linear

/// Affine map `y = x W + b`, weight stored `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

pub struct LinearCache {
    input: Tensor,
}

impl Linear {
    pub fn new(name: &str, dim_in: usize, dim_out: usize, rng: &mut impl rand::Rng) -> Self {
        Linear {
            weight: Parameter::glorot(format!("{name}.weight"), dim_in, dim_out, rng),
            bias: Parameter::zeros(format!("{name}.bias"), vec![dim_out]),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.weight.tensor.rows()
    }

    pub fn dim_out(&self) -> usize {
        self.weight.tensor.cols()
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LinearCache) {
        let (t, d_in, d_out) = (x.rows(), self.dim_in(), self.dim_out());
        assert_eq!(x.cols(), d_in, "linear input dim");
        let mut data = matmul(x.data(), t, d_in, self.weight.tensor.data(), d_out);
        let b = self.bias.tensor.data();
        for row in data.chunks_exact_mut(d_out) {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        (Tensor::matrix(t, d_out, data), LinearCache { input: x.clone() })
    }

    pub fn backward(&mut self, cache: &LinearCache, grad_out: &Tensor) -> Tensor {
        let (t, d_in, d_out) = (cache.input.rows(), self.dim_in(), self.dim_out());
        // dW += x^T g
        matmul_at_acc(
            cache.input.data(),
            t,
            d_in,
            grad_out.data(),
            d_out,
            self.weight.tensor.grad_mut(),
        );
        // db += column sums of g
        let db = self.bias.tensor.grad_mut();
        for row in grad_out.data().chunks_exact(d_out) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        // dx = g W^T
        let dx = matmul_bt(grad_out.data(), t, d_out, self.weight.tensor.data(), d_in);
        Tensor::matrix(t, d_in, dx)
    }
}

impl ParamModel for Linear {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

// --------------------------------------------------------------- layer norm

/// Per-position normalization over the last dimension, then affine.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: Parameter,
    pub bias: Parameter,
    pub eps: f64,
}

pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(name: &str, dim: usize) -> Self {
        LayerNorm {
            gain: Parameter::new(format!("{name}.gain"), Tensor::from_vec(vec![dim], vec![1.0; dim])),
            bias: Parameter::zeros(format!("{name}.bias"), vec![dim]),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerNormCache) {
        let (t, d) = (x.rows(), x.cols());
        let mut out = Tensor::zeros(vec![t, d]);
        let mut normalized = Tensor::zeros(vec![t, d]);
        let mut inv_std = vec![0.0; t];
        let g = self.gain.tensor.data();
        let b = self.bias.tensor.data();
        for i in 0..t {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[i] = istd;
            let nrow = normalized.row_mut(i);
            for (j, v) in row.iter().enumerate() {
                nrow[j] = (v - mean) * istd;
            }
            let orow = out.row_mut(i);
            for j in 0..d {
                orow[j] = nrow[j] * g[j] + b[j];
            }
        }
        (out, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, grad_out: &Tensor) -> Tensor {
        let (t, d) = (grad_out.rows(), grad_out.cols());
        let g = self.gain.tensor.data().to_vec();
        let mut dx = Tensor::zeros(vec![t, d]);
        {
            let dgain = self.gain.tensor.grad_mut();
            for i in 0..t {
                let go = grad_out.row(i);
                let n = cache.normalized.row(i);
                for j in 0..d {
                    dgain[j] += go[j] * n[j];
                }
            }
        }
        {
            let dbias = self.bias.tensor.grad_mut();
            for i in 0..t {
                for (j, v) in grad_out.row(i).iter().enumerate() {
                    dbias[j] += v;
                }
            }
        }
        for i in 0..t {
            let go = grad_out.row(i);
            let n = cache.normalized.row(i);
            let istd = cache.inv_std[i];
            // dxhat = go * gain; dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for j in 0..d {
                let dxh = go[j] * g[j];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * n[j];
            }
            let m1 = sum_dxhat / d as f64;
            let m2 = sum_dxhat_xhat / d as f64;
            let dr = dx.row_mut(i);
            for j in 0..d {
                let dxh = go[j] * g[j];
                dr[j] = istd * (dxh - m1 - n[j] * m2);
            }
        }
        dx
    }
}

impl ParamModel for LayerNorm {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.gain, &mut self.bias]
    }
}

// ------------------------------------------------------------- 1-D convolution

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-padded, output length equals input length; kernel must be odd.
    Same,
    /// Only past context: `y[t]` sees `x[t - (K-1)*dilation ..= t]`.
    Causal,
    /// Length-preserving padding for even kernels, one extra frame of past
    /// context (convolution-bank use).
    SameEven,
}

/// Time-axis convolution over `[T, C_in]`, kernel `[K, C_in, C_out]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub kernel: Parameter,
    pub bias: Parameter,
    pub padding: Padding,
    pub dilation: usize,
    k: usize,
    c_in: usize,
    c_out: usize,
}

pub struct Conv1dCache {
    input: Tensor,
}

fn src_index(padding: Padding, k: usize, dilation: usize, t: usize, tap: usize) -> Option<usize> {
    let offset = match padding {
        Padding::Same => t as isize + (tap as isize - (k / 2) as isize) * dilation as isize,
        Padding::SameEven => t as isize + (tap as isize - (k / 2) as isize) * dilation as isize,
        Padding::Causal => t as isize - ((k - 1 - tap) * dilation) as isize,
    };
    usize::try_from(offset).ok()
}

impl Conv1d {
    pub fn new(
        name: &str,
        k: usize,
        c_in: usize,
        c_out: usize,
        padding: Padding,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, NeuralError> {
        Self::with_dilation(name, k, c_in, c_out, padding, 1, rng)
    }

    pub fn with_dilation(
        name: &str,
        k: usize,
        c_in: usize,
        c_out: usize,
        padding: Padding,
        dilation: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, NeuralError> {
        if padding == Padding::Same && k % 2 == 0 {
            return Err(NeuralError::Config(format!(
                "same-padded conv needs an odd kernel, got {k}"
            )));
        }
        if padding == Padding::SameEven && k % 2 != 0 {
            return Err(NeuralError::Config(format!(
                "even-kernel padding needs an even kernel, got {k}"
            )));
        }
        let limit = (6.0 / (k * c_in + c_out) as f64).sqrt();
        let data = (0..k * c_in * c_out).map(|_| rng.gen_range(-limit..limit)).collect();
        Ok(Conv1d {
            kernel: Parameter::new(format!("{name}.kernel"), Tensor::from_vec(vec![k, c_in, c_out], data)),
            bias: Parameter::zeros(format!("{name}.bias"), vec![c_out]),
            padding,
            dilation,
            k,
            c_in,
            c_out,
        })
    }

    /// Source time index feeding kernel tap `tap` at output time `t`.
    fn src(&self, t: usize, tap: usize) -> Option<usize> {
        src_index(self.padding, self.k, self.dilation, t, tap)
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, Conv1dCache) {
        let t_len = x.rows();
        assert_eq!(x.cols(), self.c_in, "conv input channels");
        let mut out = Tensor::zeros(vec![t_len, self.c_out]);
        for row in 0..t_len {
            out.row_mut(row).copy_from_slice(self.bias.tensor.data());
        }
        let ker = self.kernel.tensor.data();
        for tap in 0..self.k {
            let kslice = &ker[tap * self.c_in * self.c_out..(tap + 1) * self.c_in * self.c_out];
            for t in 0..t_len {
                let Some(s) = self.src(t, tap) else { continue };
                if s >= t_len {
                    continue;
                }
                let xin = x.row(s);
                let orow = out.row_mut(t);
                for (i, &xv) in xin.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let krow = &kslice[i * self.c_out..(i + 1) * self.c_out];
                    for j in 0..self.c_out {
                        orow[j] += xv * krow[j];
                    }
                }
            }
        }
        (out, Conv1dCache { input: x.clone() })
    }

    pub fn backward(&mut self, cache: &Conv1dCache, grad_out: &Tensor) -> Tensor {
        let x = &cache.input;
        let t_len = x.rows();
        let mut dx = Tensor::zeros(vec![t_len, self.c_in]);
        {
            let db = self.bias.tensor.grad_mut();
            for t in 0..t_len {
                for (j, g) in grad_out.row(t).iter().enumerate() {
                    db[j] += g;
                }
            }
        }
        let ker = self.kernel.tensor.data().to_vec();
        let (padding, k, c_in, c_out, dilation) =
            (self.padding, self.k, self.c_in, self.c_out, self.dilation);
        let src = |t: usize, tap: usize| src_index(padding, k, dilation, t, tap);
        let dker = self.kernel.tensor.grad_mut();
        for tap in 0..k {
            let kbase = tap * c_in * c_out;
            for t in 0..t_len {
                let Some(s) = src(t, tap) else { continue };
                if s >= t_len {
                    continue;
                }
                let go = grad_out.row(t);
                let xin = x.row(s);
                // dK[tap,i,:] += x[s,i] * g[t,:]; dx[s,i] += K[tap,i,:] . g[t,:]
                let dxr = dx.row_mut(s);
                for i in 0..c_in {
                    let krow = &ker[kbase + i * c_out..kbase + (i + 1) * c_out];
                    let dkrow = &mut dker[kbase + i * c_out..kbase + (i + 1) * c_out];
                    let xv = xin[i];
                    let mut acc = 0.0;
                    for j in 0..c_out {
                        dkrow[j] += xv * go[j];
                        acc += krow[j] * go[j];
                    }
                    dxr[i] += acc;
                }
            }
        }
        dx
    }
}

impl ParamModel for Conv1d {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.kernel, &mut self.bias]
    }
}

// -------------------------------------------------------------- activations

pub fn relu(x: &Tensor) -> (Tensor, Tensor) {
    let out = x.map(|v| v.max(0.0));
    (out.clone(), out)
}

pub fn relu_backward(out: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, ov) in g.data_mut().iter_mut().zip(out.data()) {
        if *ov <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

pub fn tanh_forward(x: &Tensor) -> (Tensor, Tensor) {
    let out = x.map(f64::tanh);
    (out.clone(), out)
}

pub fn tanh_backward(out: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, ov) in g.data_mut().iter_mut().zip(out.data()) {
        *gv *= 1.0 - ov * ov;
    }
    g
}

pub fn sigmoid(x: &Tensor) -> (Tensor, Tensor) {
    let out = x.map(|v| 1.0 / (1.0 + (-v).exp()));
    (out.clone(), out)
}

pub fn sigmoid_backward(out: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, ov) in g.data_mut().iter_mut().zip(out.data()) {
        *gv *= ov * (1.0 - ov);
    }
    g
}

// ------------------------------------------------------ positional encoding

/// Fixed sinusoidal positional encoding `[length, dim]`.
///
/// `PE(pos, 2i) = sin(pos / 10000^(2i/dim))`, odd columns the cosine.
pub fn sinusoidal_positional_encoding(length: usize, dim: usize) -> Result<Tensor, NeuralError> {
    if dim % 2 != 0 {
        return Err(NeuralError::Config(format!(
            "positional encoding dim must be even, got {dim}"
        )));
    }
    let mut out = Tensor::zeros(vec![length, dim]);
    for pos in 0..length {
        let row = out.row_mut(pos);
        for i in 0..dim / 2 {
            let rate = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            let angle = pos as f64 * rate;
            row[2 * i] = angle.sin();
            row[2 * i + 1] = angle.cos();
        }
    }
    Ok(out)
}

// ------------------------------------------------- categorical output (NLL)

pub struct SoftmaxNllCache {
    probs: Tensor,
    targets: Vec<usize>,
}

/// Per-position negative log-likelihood of `targets` under a softmax over
/// the last dimension of `logits`.
pub fn softmax_nll(logits: &Tensor, targets: &[usize]) -> (Vec<f64>, SoftmaxNllCache) {
    let (t, c) = (logits.rows(), logits.cols());
    assert_eq!(t, targets.len(), "one target per position");
    let mut probs = Tensor::zeros(vec![t, c]);
    let mut nll = Vec::with_capacity(t);
    for i in 0..t {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::MIN, f64::max);
        let prow = probs.row_mut(i);
        let mut z = 0.0;
        for (j, v) in row.iter().enumerate() {
            let e = (v - max).exp();
            prow[j] = e;
            z += e;
        }
        for p in prow.iter_mut() {
            *p /= z;
        }
        nll.push(-(prow[targets[i]].max(1e-300)).ln());
    }
    (nll, SoftmaxNllCache { probs, targets: targets.to_vec() })
}

/// Gradient of `sum_t w[t] * nll[t]` with respect to the logits.
pub fn softmax_nll_backward(cache: &SoftmaxNllCache, pos_weights: &[f64]) -> Tensor {
    let t = cache.probs.rows();
    assert_eq!(pos_weights.len(), t);
    let mut grad = cache.probs.clone();
    for i in 0..t {
        let w = pos_weights[i];
        let row = grad.row_mut(i);
        for v in row.iter_mut() {
            *v *= w;
        }
        row[cache.targets[i]] -= w;
    }
    grad
}
