//! Recurrence, highway layers and stride-1 max pooling (CBHG building blocks).

use super::tensor::Tensor;
use super::{ParamModel, Parameter};

/// One direction of a vanilla tanh RNN: `h_t = tanh(x_t Wx + h_{t-1} Wh + b)`.
#[derive(Debug, Clone)]
struct RnnCell {
    wx: Parameter,
    wh: Parameter,
    bias: Parameter,
}

impl RnnCell {
    fn new(name: &str, dim_in: usize, hidden: usize, rng: &mut impl rand::Rng) -> Self {
        RnnCell {
            wx: Parameter::glorot(format!("{name}.wx"), dim_in, hidden, rng),
            wh: Parameter::glorot(format!("{name}.wh"), hidden, hidden, rng),
            bias: Parameter::zeros(format!("{name}.bias"), vec![hidden]),
        }
    }

    /// Hidden states for time order given by `order`.
    fn run(&self, x: &Tensor, order: impl Iterator<Item = usize>) -> Tensor {
        let hidden = self.wh.tensor.rows();
        let mut states = Tensor::zeros(vec![x.rows(), hidden]);
        let mut prev = vec![0.0; hidden];
        for t in order {
            let xrow = x.row(t);
            let out = states.row_mut(t);
            for j in 0..hidden {
                let mut a = self.bias.tensor.data()[j];
                for (i, xv) in xrow.iter().enumerate() {
                    a += xv * self.wx.tensor.data()[i * hidden + j];
                }
                for (i, hv) in prev.iter().enumerate() {
                    a += hv * self.wh.tensor.data()[i * hidden + j];
                }
                out[j] = a.tanh();
            }
            prev.copy_from_slice(out);
        }
        states
    }

    /// Backprop through time along `order` reversed; accumulates parameter
    /// gradients and adds input gradients into `dx`.
    fn backward(
        &mut self,
        x: &Tensor,
        states: &Tensor,
        grad_states: &Tensor,
        order: &[usize],
        dx: &mut Tensor,
    ) {
        let hidden = self.wh.tensor.rows();
        let dim_in = self.wx.tensor.rows();
        let wx = self.wx.tensor.data().to_vec();
        let wh = self.wh.tensor.data().to_vec();
        let mut carry = vec![0.0; hidden];
        for (step, &t) in order.iter().enumerate().rev() {
            let h = states.row(t);
            let mut da = vec![0.0; hidden];
            for j in 0..hidden {
                let dh = grad_states.row(t)[j] + carry[j];
                da[j] = dh * (1.0 - h[j] * h[j]);
            }
            let prev_t = if step == 0 { None } else { Some(order[step - 1]) };
            {
                let dwx = self.wx.tensor.grad_mut();
                let xrow = x.row(t);
                for i in 0..dim_in {
                    let xv = xrow[i];
                    for j in 0..hidden {
                        dwx[i * hidden + j] += xv * da[j];
                    }
                }
            }
            if let Some(pt) = prev_t {
                let dwh = self.wh.tensor.grad_mut();
                let hprev = states.row(pt);
                for i in 0..hidden {
                    let hv = hprev[i];
                    for j in 0..hidden {
                        dwh[i * hidden + j] += hv * da[j];
                    }
                }
            }
            {
                let db = self.bias.tensor.grad_mut();
                for j in 0..hidden {
                    db[j] += da[j];
                }
            }
            let dxr = dx.row_mut(t);
            for i in 0..dim_in {
                let mut acc = 0.0;
                for j in 0..hidden {
                    acc += wx[i * hidden + j] * da[j];
                }
                dxr[i] += acc;
            }
            for i in 0..hidden {
                let mut acc = 0.0;
                for j in 0..hidden {
                    acc += wh[i * hidden + j] * da[j];
                }
                carry[i] = acc;
            }
        }
    }
}

/// Bidirectional tanh RNN; output is `[T, 2 * hidden]`, forward states in
/// the first half of each row.
#[derive(Debug, Clone)]
pub struct BiRnn {
    fwd: RnnCell,
    bwd: RnnCell,
    hidden: usize,
}

pub struct BiRnnCache {
    input: Tensor,
    states_fwd: Tensor,
    states_bwd: Tensor,
}

impl BiRnn {
    pub fn new(name: &str, dim_in: usize, hidden: usize, rng: &mut impl rand::Rng) -> Self {
        BiRnn {
            fwd: RnnCell::new(&format!("{name}.fwd"), dim_in, hidden, rng),
            bwd: RnnCell::new(&format!("{name}.bwd"), dim_in, hidden, rng),
            hidden,
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, BiRnnCache) {
        let t_len = x.rows();
        let states_fwd = self.fwd.run(x, 0..t_len);
        let states_bwd = self.bwd.run(x, (0..t_len).rev());
        let mut out = Tensor::zeros(vec![t_len, 2 * self.hidden]);
        for t in 0..t_len {
            out.row_mut(t)[..self.hidden].copy_from_slice(states_fwd.row(t));
            out.row_mut(t)[self.hidden..].copy_from_slice(states_bwd.row(t));
        }
        (out, BiRnnCache { input: x.clone(), states_fwd, states_bwd })
    }

    pub fn backward(&mut self, cache: &BiRnnCache, grad_out: &Tensor) -> Tensor {
        let t_len = cache.input.rows();
        let mut g_fwd = Tensor::zeros(vec![t_len, self.hidden]);
        let mut g_bwd = Tensor::zeros(vec![t_len, self.hidden]);
        for t in 0..t_len {
            g_fwd.row_mut(t).copy_from_slice(&grad_out.row(t)[..self.hidden]);
            g_bwd.row_mut(t).copy_from_slice(&grad_out.row(t)[self.hidden..]);
        }
        let mut dx = Tensor::zeros(vec![t_len, cache.input.cols()]);
        let order_fwd: Vec<usize> = (0..t_len).collect();
        let order_bwd: Vec<usize> = (0..t_len).rev().collect();
        self.fwd
            .backward(&cache.input, &cache.states_fwd, &g_fwd, &order_fwd, &mut dx);
        self.bwd
            .backward(&cache.input, &cache.states_bwd, &g_bwd, &order_bwd, &mut dx);
        dx
    }
}

impl ParamModel for BiRnn {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.fwd.wx,
            &mut self.fwd.wh,
            &mut self.fwd.bias,
            &mut self.bwd.wx,
            &mut self.bwd.wh,
            &mut self.bwd.bias,
        ]
    }
}

/// Highway layer: `y = T(x) * H(x) + (1 - T(x)) * x`.
#[derive(Debug, Clone)]
pub struct Highway {
    pub transform: super::layers::Linear,
    pub gate: super::layers::Linear,
}

pub struct HighwayCache {
    input: Tensor,
    h_out: Tensor,
    t_out: Tensor,
    c_h: super::layers::LinearCache,
    c_t: super::layers::LinearCache,
}

impl Highway {
    pub fn new(name: &str, dim: usize, rng: &mut impl rand::Rng) -> Self {
        let transform = super::layers::Linear::new(&format!("{name}.h"), dim, dim, rng);
        let mut gate = super::layers::Linear::new(&format!("{name}.t"), dim, dim, rng);
        // carry-biased gate at init
        gate.bias.tensor = Tensor::from_vec(vec![dim], vec![-1.0; dim]);
        Highway { transform, gate }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, HighwayCache) {
        let (h_lin, c_h) = self.transform.forward(x);
        let (h_out, _) = super::layers::relu(&h_lin);
        let (t_lin, c_t) = self.gate.forward(x);
        let (t_out, _) = super::layers::sigmoid(&t_lin);
        let mut out = x.clone();
        for i in 0..out.len() {
            out.data_mut()[i] = t_out.data()[i] * h_out.data()[i]
                + (1.0 - t_out.data()[i]) * x.data()[i];
        }
        (out, HighwayCache { input: x.clone(), h_out, t_out, c_h, c_t })
    }

    pub fn backward(&mut self, cache: &HighwayCache, grad_out: &Tensor) -> Tensor {
        let mut dh = grad_out.clone();
        let mut dt = grad_out.clone();
        let mut dx = grad_out.clone();
        for i in 0..grad_out.len() {
            let g = grad_out.data()[i];
            let t = cache.t_out.data()[i];
            let h = cache.h_out.data()[i];
            let x = cache.input.data()[i];
            dh.data_mut()[i] = g * t;
            dt.data_mut()[i] = g * (h - x);
            dx.data_mut()[i] = g * (1.0 - t);
        }
        let dh_lin = super::layers::relu_backward(&cache.h_out, &dh);
        dx.add_assign(&self.transform.backward(&cache.c_h, &dh_lin));
        let dt_lin = super::layers::sigmoid_backward(&cache.t_out, &dt);
        dx.add_assign(&self.gate.backward(&cache.c_t, &dt_lin));
        dx
    }
}

impl ParamModel for Highway {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.transform.params_mut();
        p.extend(self.gate.params_mut());
        p
    }
}

/// Width-2, stride-1 max pool along time, length preserved (last row pools
/// with itself).
pub struct MaxPool1;

pub struct MaxPool1Cache {
    /// Winning source row per (t, channel).
    argmax: Vec<usize>,
    shape: (usize, usize),
}

impl MaxPool1 {
    pub fn forward(x: &Tensor) -> (Tensor, MaxPool1Cache) {
        let (t_len, c) = (x.rows(), x.cols());
        let mut out = Tensor::zeros(vec![t_len, c]);
        let mut argmax = vec![0usize; t_len * c];
        for t in 0..t_len {
            let next = (t + 1).min(t_len - 1);
            for j in 0..c {
                let (a, b) = (x.row(t)[j], x.row(next)[j]);
                if b > a {
                    out.row_mut(t)[j] = b;
                    argmax[t * c + j] = next;
                } else {
                    out.row_mut(t)[j] = a;
                    argmax[t * c + j] = t;
                }
            }
        }
        (out, MaxPool1Cache { argmax, shape: (t_len, c) })
    }

    pub fn backward(cache: &MaxPool1Cache, grad_out: &Tensor) -> Tensor {
        let (t_len, c) = cache.shape;
        let mut dx = Tensor::zeros(vec![t_len, c]);
        for t in 0..t_len {
            for j in 0..c {
                let src = cache.argmax[t * c + j];
                dx.row_mut(src)[j] += grad_out.row(t)[j];
            }
        }
        dx
    }
}
