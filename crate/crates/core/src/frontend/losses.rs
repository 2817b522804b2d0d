//! Objective functions: MSE and the band-weighted absolute loss.

use super::FrontendError;
use crate::neural::Tensor;
use std::ops::Range;

/// Mean squared error over all entries, with its gradient wrt `pred`.
pub fn loss_mse(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor), FrontendError> {
    if pred.shape() != target.shape() {
        return Err(FrontendError::LossShape {
            pred: pred.shape().to_vec(),
            target: target.shape().to_vec(),
        });
    }
    let n = pred.len() as f64;
    let mut grad = pred.clone();
    let mut loss = 0.0;
    for i in 0..pred.len() {
        let d = pred.data()[i] - target.data()[i];
        loss += d * d;
        grad.data_mut()[i] = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// Mean absolute error plus `lambda` times the mean absolute error over a
/// priority bin range, with its gradient.
pub fn loss_weighted_abs(
    pred: &Tensor,
    target: &Tensor,
    band: Range<usize>,
    lambda: f64,
) -> Result<(f64, Tensor), FrontendError> {
    if pred.shape() != target.shape() {
        return Err(FrontendError::LossShape {
            pred: pred.shape().to_vec(),
            target: target.shape().to_vec(),
        });
    }
    let cols = pred.cols();
    if band.is_empty() || band.end > cols {
        return Err(FrontendError::BadBand { band, cols });
    }
    let rows = pred.rows();
    let n_all = (rows * cols) as f64;
    let n_band = (rows * band.len()) as f64;
    let mut grad = Tensor::zeros(vec![rows, cols]);
    let mut base = 0.0;
    let mut priority = 0.0;
    for t in 0..rows {
        let p = pred.row(t);
        let q = target.row(t);
        let g = grad.row_mut(t);
        for j in 0..cols {
            let d = p[j] - q[j];
            let s = if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
            base += d.abs();
            g[j] = s / n_all;
            if band.contains(&j) {
                priority += d.abs();
                g[j] += lambda * s / n_band;
            }
        }
    }
    Ok((base / n_all + lambda * priority / n_band, grad))
}

/// Default priority band for the weighted absolute loss: bins covering
/// roughly 0-3 kHz.
pub const PRIORITY_BAND: Range<usize> = 0..192;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(loss_mse(&a, &a).unwrap().0, 0.0);
        let b = a.map(|v| v + 0.1);
        let (l, _) = loss_mse(&b, &a).unwrap();
        assert!((l - 0.01).abs() < 1e-12);
    }

    #[test]
    fn mse_matches_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = Tensor::matrix(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let t = Tensor::matrix(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let (l, g) = loss_mse(&p, &t).unwrap();
        let mut want = 0.0;
        for i in 0..12 {
            let d = p.data()[i] - t.data()[i];
            want += d * d / 12.0;
        }
        assert!((l - want).abs() < 1e-12);
        // finite-difference probe of one coordinate
        let eps = 1e-6;
        let mut p2 = p.clone();
        p2.data_mut()[5] += eps;
        let (l2, _) = loss_mse(&p2, &t).unwrap();
        assert!(((l2 - l) / eps - g.data()[5]).abs() < 1e-5);
    }

    #[test]
    fn mse_rejects_shape_mismatch() {
        let a = Tensor::matrix(2, 3, vec![0.0; 6]);
        let b = Tensor::matrix(3, 2, vec![0.0; 6]);
        assert!(loss_mse(&a, &b).is_err());
    }

    #[test]
    fn weighted_abs_examples() {
        let a = Tensor::matrix(1, 8, (0..8).map(|v| v as f64).collect());
        assert_eq!(loss_weighted_abs(&a, &a, 0..4, 1.0).unwrap().0, 0.0);

        // lambda = 0 reduces to plain MAE
        let b = a.map(|v| v + 0.5);
        let (l, _) = loss_weighted_abs(&b, &a, 0..4, 0.0).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weighted_abs_matches_two_term_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = Tensor::matrix(2, 10, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let t = Tensor::matrix(2, 10, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let (l, _) = loss_weighted_abs(&p, &t, 0..3, 1.0).unwrap();
        let mut all = 0.0;
        let mut band = 0.0;
        for r in 0..2 {
            for j in 0..10 {
                let d = (p.row(r)[j] - t.row(r)[j]).abs();
                all += d;
                if j < 3 {
                    band += d;
                }
            }
        }
        let want = all / 20.0 + band / 6.0;
        assert!((l - want).abs() < 1e-12, "{l} vs {want}");
    }

    #[test]
    fn weighted_abs_rejects_empty_band() {
        let a = Tensor::matrix(1, 4, vec![0.0; 4]);
        assert!(loss_weighted_abs(&a, &a, 2..2, 1.0).is_err());
        assert!(loss_weighted_abs(&a, &a, 0..9, 1.0).is_err());
    }
}
