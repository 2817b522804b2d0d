//! Length regulation and phone-boundary smoothing.

use super::FrontendError;
use crate::neural::Tensor;

/// Size-3 normalized smoothing kernel applied at phone boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingKernel {
    weights: [f64; 3],
}

impl SmoothingKernel {
    /// Gaussian-initialized weights at the given sigma, normalized to sum 1.
    pub fn gaussian(sigma: f64) -> Self {
        let raw = [(-0.5 / (sigma * sigma)).exp(), 1.0, (-0.5 / (sigma * sigma)).exp()];
        let sum: f64 = raw.iter().sum();
        SmoothingKernel { weights: [raw[0] / sum, raw[1] / sum, raw[2] / sum] }
    }

    pub fn new(weights: [f64; 3]) -> Result<Self, FrontendError> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(FrontendError::BadKernel(format!("weights sum to {sum}, not 1")));
        }
        if (weights[0] - weights[2]).abs() > 1e-12 {
            return Err(FrontendError::BadKernel("kernel must be symmetric".into()));
        }
        if weights[1] < weights[0] {
            return Err(FrontendError::BadKernel("center weight must be maximal".into()));
        }
        Ok(SmoothingKernel { weights })
    }

    pub fn weights(&self) -> [f64; 3] {
        self.weights
    }
}

impl Default for SmoothingKernel {
    fn default() -> Self {
        SmoothingKernel::gaussian(1.0)
    }
}

/// Repeat encoder row `i` `durations[i]` times, in order.
pub fn length_regulate(encoder_out: &Tensor, durations: &[usize]) -> Result<Tensor, FrontendError> {
    if encoder_out.rows() != durations.len() {
        return Err(FrontendError::LengthMismatch {
            what: "durations",
            got: durations.len(),
            want: encoder_out.rows(),
        });
    }
    let total: usize = durations.iter().sum();
    if total == 0 {
        return Err(FrontendError::EmptyExpansion);
    }
    let dim = encoder_out.cols();
    let mut out = Tensor::zeros(vec![total, dim]);
    let mut t = 0;
    for (i, &frames) in durations.iter().enumerate() {
        for _ in 0..frames {
            out.row_mut(t).copy_from_slice(encoder_out.row(i));
            t += 1;
        }
    }
    Ok(out)
}

/// Gradient of [`length_regulate`]: frame gradients sum back onto their phone.
pub fn length_regulate_backward(grad_out: &Tensor, durations: &[usize]) -> Tensor {
    let dim = grad_out.cols();
    let mut grad_in = Tensor::zeros(vec![durations.len(), dim]);
    let mut t = 0;
    for (i, &frames) in durations.iter().enumerate() {
        let row = grad_in.row_mut(i);
        for _ in 0..frames {
            for (r, g) in row.iter_mut().zip(grad_out.row(t)) {
                *r += g;
            }
            t += 1;
        }
    }
    grad_in
}

/// Frame indices smoothed: the first and last frame of each phone span.
fn boundary_frames(durations: &[usize]) -> Vec<usize> {
    let mut frames = Vec::new();
    let mut start = 0;
    for &d in durations {
        if d == 0 {
            continue;
        }
        frames.push(start);
        if d > 1 {
            frames.push(start + d - 1);
        }
        start += d;
    }
    frames
}

/// Convolve phone-boundary frames with the kernel along time; interior
/// frames pass through untouched. Utterance edges use replicate padding.
pub fn smooth_boundaries(
    expanded: &Tensor,
    durations: &[usize],
    kernel: &SmoothingKernel,
) -> Tensor {
    let t_len = expanded.rows();
    let [w0, w1, w2] = kernel.weights;
    let mut out = expanded.clone();
    for t in boundary_frames(durations) {
        let prev = t.saturating_sub(1);
        let next = (t + 1).min(t_len - 1);
        let row = out.row_mut(t);
        for (j, v) in row.iter_mut().enumerate() {
            *v = w0 * expanded.row(prev)[j] + w1 * expanded.row(t)[j] + w2 * expanded.row(next)[j];
        }
    }
    out
}

/// Transpose of [`smooth_boundaries`].
pub fn smooth_boundaries_backward(
    grad_out: &Tensor,
    durations: &[usize],
    kernel: &SmoothingKernel,
) -> Tensor {
    let t_len = grad_out.rows();
    let [w0, w1, w2] = kernel.weights;
    let mut grad_in = grad_out.clone();
    for t in boundary_frames(durations) {
        let prev = t.saturating_sub(1);
        let next = (t + 1).min(t_len - 1);
        // remove the pass-through contribution, add the convolution's
        let g: Vec<f64> = grad_out.row(t).to_vec();
        for (j, &gv) in g.iter().enumerate() {
            grad_in.row_mut(t)[j] -= gv;
            grad_in.row_mut(prev)[j] += w0 * gv;
            grad_in.row_mut(t)[j] += w1 * gv;
            grad_in.row_mut(next)[j] += w2 * gv;
        }
    }
    grad_in
}

/// Repeat per-phone pitch ids by duration (categorical, no smoothing).
pub fn expand_ids(ids: &[usize], durations: &[usize]) -> Vec<usize> {
    ids.iter()
        .zip(durations)
        .flat_map(|(&id, &d)| std::iter::repeat(id).take(d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_sigma_one_weights() {
        let k = SmoothingKernel::gaussian(1.0);
        let [a, b, c] = k.weights();
        assert!((a - 0.2741).abs() < 5e-5, "{a}");
        assert!((b - 0.4519).abs() < 5e-5, "{b}");
        assert_eq!(a, c);
        assert!((a + b + c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_validation() {
        assert!(SmoothingKernel::new([0.25, 0.5, 0.25]).is_ok());
        assert!(SmoothingKernel::new([0.3, 0.5, 0.25]).is_err());
        assert!(SmoothingKernel::new([0.4, 0.2, 0.4]).is_err());
        assert!(SmoothingKernel::new([0.5, 0.6, 0.5]).is_err());
    }

    #[test]
    fn regulate_repeats_rows() {
        let enc = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let out = length_regulate(&enc, &[2, 3]).unwrap();
        assert_eq!(out.rows(), 5);
        assert_eq!(out.row(0), [1.0, 2.0]);
        assert_eq!(out.row(1), [1.0, 2.0]);
        assert_eq!(out.row(2), [3.0, 4.0]);
        assert_eq!(out.row(4), [3.0, 4.0]);
    }

    #[test]
    fn regulate_skips_zero_durations() {
        let enc = Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]);
        let out = length_regulate(&enc, &[1, 0, 1]).unwrap();
        assert_eq!(out.rows(), 2);
        assert_eq!(out.row(0), [1.0]);
        assert_eq!(out.row(1), [3.0]);
    }

    #[test]
    fn regulate_rejects_empty_expansion() {
        let enc = Tensor::matrix(2, 1, vec![1.0, 2.0]);
        assert!(matches!(
            length_regulate(&enc, &[0, 0]),
            Err(FrontendError::EmptyExpansion)
        ));
    }

    #[test]
    fn smoothing_is_identity_on_single_constant_phone() {
        let mut x = Tensor::zeros(vec![6, 3]);
        for t in 0..6 {
            x.row_mut(t).copy_from_slice(&[1.5, -2.0, 0.25]);
        }
        let k = SmoothingKernel::default();
        let y = smooth_boundaries(&x, &[6], &k);
        assert_eq!(x, y);
    }

    #[test]
    fn smoothing_two_single_frame_phones_matches_hand_rule() {
        // rows a, b with durations [1, 1]; kernel [k, 1-2k, k]
        let x = Tensor::matrix(2, 1, vec![10.0, 20.0]);
        let k = 0.2;
        let kernel = SmoothingKernel::new([k, 1.0 - 2.0 * k, k]).unwrap();
        let y = smooth_boundaries(&x, &[1, 1], &kernel);
        // frame 0: replicate left -> (1-k)*a + k*b
        assert!((y.row(0)[0] - ((1.0 - k) * 10.0 + k * 20.0)).abs() < 1e-12);
        // frame 1: replicate right -> k*a + (1-k)*b
        assert!((y.row(1)[0] - (k * 10.0 + (1.0 - k) * 20.0)).abs() < 1e-12);
    }

    #[test]
    fn interior_frames_untouched() {
        // curved signal so symmetric smoothing moves every boundary frame
        let mut x = Tensor::zeros(vec![7, 1]);
        for t in 0..7 {
            x.row_mut(t)[0] = (t * t) as f64;
        }
        let y = smooth_boundaries(&x, &[4, 3], &SmoothingKernel::default());
        // spans [0..4) and [4..7): boundaries 0, 3, 4, 6; interiors 1, 2, 5
        for t in [1usize, 2, 5] {
            assert_eq!(y.row(t)[0], x.row(t)[0], "frame {t}");
        }
        for t in [0usize, 3, 4, 6] {
            assert_ne!(y.row(t)[0], x.row(t)[0], "frame {t}");
        }
    }

    #[test]
    fn expand_ids_matches_definition() {
        assert_eq!(expand_ids(&[69, 71], &[2, 1]), [69, 69, 71]);
        assert_eq!(expand_ids(&[69, 71, 72], &[1, 0, 1]), [69, 72]);
    }

    proptest! {
        #[test]
        fn regulate_conserves_frames(
            dims in 1usize..6,
            durations in prop::collection::vec(0usize..7, 1..25),
        ) {
            prop_assume!(durations.iter().sum::<usize>() > 0);
            let p = durations.len();
            let enc = Tensor::matrix(p, dims, (0..p * dims).map(|v| v as f64).collect());
            let out = length_regulate(&enc, &durations).unwrap();
            prop_assert_eq!(out.rows(), durations.iter().sum::<usize>());

            // index-mapping oracle: frame t comes from the phone whose
            // cumulative span contains t
            let mut t = 0;
            for (i, &d) in durations.iter().enumerate() {
                for _ in 0..d {
                    prop_assert_eq!(out.row(t), enc.row(i));
                    t += 1;
                }
            }
        }

        #[test]
        fn constant_input_is_smoothing_fixed_point(
            durations in prop::collection::vec(1usize..5, 1..8),
        ) {
            let total: usize = durations.iter().sum();
            let mut x = Tensor::zeros(vec![total, 2]);
            for t in 0..total {
                x.row_mut(t).copy_from_slice(&[3.25, -1.0]);
            }
            let y = smooth_boundaries(&x, &durations, &SmoothingKernel::default());
            for t in 0..total {
                prop_assert!((y.row(t)[0] - 3.25).abs() < 1e-12);
                prop_assert!((y.row(t)[1] + 1.0).abs() < 1e-12);
            }
        }
    }
}
