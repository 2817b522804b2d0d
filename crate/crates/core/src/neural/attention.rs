//! Multi-head scaled dot-product attention.

use super::layers::{Linear, LinearCache};
use super::tensor::{matmul, matmul_at_acc, matmul_bt, Tensor};
use super::{NeuralError, ParamModel, Parameter};

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
}

pub struct MultiHeadAttentionCache {
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// Row-stacked per-head attention weights, `heads * [Tq, Tk]`.
    attn: Vec<Tensor>,
    cq: LinearCache,
    ck: LinearCache,
    cv: LinearCache,
    co: LinearCache,
}

impl MultiHeadAttention {
    pub fn new(name: &str, dim: usize, heads: usize, rng: &mut impl rand::Rng) -> Result<Self, NeuralError> {
        if dim % heads != 0 {
            return Err(NeuralError::Config(format!(
                "model dim {dim} not divisible by {heads} heads"
            )));
        }
        Ok(MultiHeadAttention {
            wq: Linear::new(&format!("{name}.wq"), dim, dim, rng),
            wk: Linear::new(&format!("{name}.wk"), dim, dim, rng),
            wv: Linear::new(&format!("{name}.wv"), dim, dim, rng),
            wo: Linear::new(&format!("{name}.wo"), dim, dim, rng),
            heads,
        })
    }

    pub fn dim(&self) -> usize {
        self.wq.dim_in()
    }

    fn head_slice(t: &Tensor, head: usize, dh: usize) -> Tensor {
        let rows = t.rows();
        let mut out = Tensor::zeros(vec![rows, dh]);
        for i in 0..rows {
            out.row_mut(i)
                .copy_from_slice(&t.row(i)[head * dh..(head + 1) * dh]);
        }
        out
    }

    /// Attention over already-projected streams; `mask[i * Tk + j]` set
    /// means key `j` is hidden from query `i`.
    pub fn forward(
        &self,
        q_in: &Tensor,
        k_in: &Tensor,
        v_in: &Tensor,
        mask: Option<&[bool]>,
    ) -> Result<(Tensor, MultiHeadAttentionCache), NeuralError> {
        let dim = self.dim();
        if q_in.cols() != dim || k_in.cols() != dim || v_in.cols() != dim {
            return Err(NeuralError::Shape {
                context: "multi_head_attention",
                details: format!(
                    "expected feature dim {dim}, got q={} k={} v={}",
                    q_in.cols(),
                    k_in.cols(),
                    v_in.cols()
                ),
            });
        }
        if k_in.rows() != v_in.rows() {
            return Err(NeuralError::Shape {
                context: "multi_head_attention",
                details: format!("k has {} rows, v has {}", k_in.rows(), v_in.rows()),
            });
        }
        let (tq, tk) = (q_in.rows(), k_in.rows());
        if let Some(m) = mask {
            if m.len() != tq * tk {
                return Err(NeuralError::Shape {
                    context: "multi_head_attention",
                    details: format!("mask len {} != {tq}x{tk}", m.len()),
                });
            }
        }
        let (q, cq) = self.wq.forward(q_in);
        let (k, ck) = self.wk.forward(k_in);
        let (v, cv) = self.wv.forward(v_in);
        let dh = dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut concat = Tensor::zeros(vec![tq, dim]);
        let mut attn = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = Self::head_slice(&q, h, dh);
            let kh = Self::head_slice(&k, h, dh);
            let vh = Self::head_slice(&v, h, dh);
            // scores and row softmax
            let mut scores = Tensor::matrix(tq, tk, matmul_bt(qh.data(), tq, dh, kh.data(), tk));
            for i in 0..tq {
                let row = scores.row_mut(i);
                for (j, s) in row.iter_mut().enumerate() {
                    *s *= scale;
                    if mask.is_some_and(|m| m[i * tk + j]) {
                        *s = f64::NEG_INFINITY;
                    }
                }
                let max = row.iter().cloned().fold(f64::MIN, f64::max);
                let mut z = 0.0;
                for s in row.iter_mut() {
                    *s = (*s - max).exp();
                    z += *s;
                }
                for s in row.iter_mut() {
                    *s /= z;
                }
            }
            let oh = matmul(scores.data(), tq, tk, vh.data(), dh);
            for i in 0..tq {
                concat.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(&oh[i * dh..(i + 1) * dh]);
            }
            attn.push(scores);
        }
        let (out, co) = self.wo.forward(&concat);
        Ok((out, MultiHeadAttentionCache { q, k, v, attn, cq, ck, cv, co }))
    }

    /// Returns `(dq, dk, dv)`; self-attention callers sum all three.
    pub fn backward(
        &mut self,
        cache: &MultiHeadAttentionCache,
        grad_out: &Tensor,
    ) -> (Tensor, Tensor, Tensor) {
        let dim = self.dim();
        let dh = dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (tq, tk) = (cache.q.rows(), cache.k.rows());

        let d_concat = self.wo.backward(&cache.co, grad_out);
        let mut dq = Tensor::zeros(vec![tq, dim]);
        let mut dk = Tensor::zeros(vec![tk, dim]);
        let mut dv = Tensor::zeros(vec![tk, dim]);

        for h in 0..self.heads {
            let qh = Self::head_slice(&cache.q, h, dh);
            let kh = Self::head_slice(&cache.k, h, dh);
            let vh = Self::head_slice(&cache.v, h, dh);
            let a = &cache.attn[h];
            let doh = Self::head_slice(&d_concat, h, dh);

            // dA = dOh Vh^T ; dVh = A^T dOh
            let da = matmul_bt(doh.data(), tq, dh, vh.data(), tk);
            let mut dvh = vec![0.0; tk * dh];
            matmul_at_acc(a.data(), tq, tk, doh.data(), dh, &mut dvh);

            // softmax backward per row: dS = A o (dA - rowsum(dA o A))
            let mut ds = vec![0.0; tq * tk];
            for i in 0..tq {
                let arow = a.row(i);
                let darow = &da[i * tk..(i + 1) * tk];
                let dot: f64 = arow.iter().zip(darow).map(|(x, y)| x * y).sum();
                for j in 0..tk {
                    ds[i * tk + j] = arow[j] * (darow[j] - dot) * scale;
                }
            }
            // dQh = dS Kh ; dKh = dS^T Qh
            let dqh = matmul(&ds, tq, tk, kh.data(), dh);
            let mut dkh = vec![0.0; tk * dh];
            matmul_at_acc(&ds, tq, tk, qh.data(), dh, &mut dkh);

            for i in 0..tq {
                dq.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(&dqh[i * dh..(i + 1) * dh]);
            }
            for i in 0..tk {
                dk.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(&dkh[i * dh..(i + 1) * dh]);
                dv.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(&dvh[i * dh..(i + 1) * dh]);
            }
        }
        (
            self.wq.backward(&cache.cq, &dq),
            self.wk.backward(&cache.ck, &dk),
            self.wv.backward(&cache.cv, &dv),
        )
    }
}

impl ParamModel for MultiHeadAttention {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.wq.params_mut();
        p.extend(self.wk.params_mut());
        p.extend(self.wv.params_mut());
        p.extend(self.wo.params_mut());
        p
    }
}
