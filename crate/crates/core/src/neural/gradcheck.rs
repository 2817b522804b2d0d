//! Central-difference verification of analytic gradients.

use super::ParamModel;
use rand::seq::SliceRandom;
use rand::Rng;

/// Compare analytic parameter gradients against central finite differences.
///
/// `run(model, with_grads)` must zero gradients, run the forward pass and
/// — when `with_grads` is set — the backward pass, returning the scalar
/// loss. Up to `samples_per_param` coordinates of each trainable parameter
/// are probed; the maximum relative error over all probes is returned.
pub fn grad_check<M, F>(
    model: &mut M,
    mut run: F,
    eps: f64,
    samples_per_param: usize,
    rng: &mut impl Rng,
) -> f64
where
    M: ParamModel,
    F: FnMut(&mut M, bool) -> f64,
{
    run(model, true);

    // sample coordinates and snapshot their analytic gradients
    let mut probes: Vec<(usize, usize, f64)> = Vec::new();
    {
        let params = model.params_mut();
        for (pi, p) in params.iter().enumerate() {
            if !p.trainable {
                continue;
            }
            let grad = p.tensor.grad().expect("backward must fill gradients");
            let mut coords: Vec<usize> = (0..p.tensor.len()).collect();
            coords.shuffle(rng);
            for &c in coords.iter().take(samples_per_param) {
                probes.push((pi, c, grad[c]));
            }
        }
    }

    let mut max_rel = 0.0f64;
    for (pi, coord, analytic) in probes {
        let nudge = |model: &mut M, delta: f64| {
            let mut params = model.params_mut();
            params[pi].tensor.data_mut()[coord] += delta;
        };
        nudge(model, eps);
        let plus = run(model, false);
        nudge(model, -2.0 * eps);
        let minus = run(model, false);
        nudge(model, eps);
        let fd = (plus - minus) / (2.0 * eps);
        let rel = (fd - analytic).abs() / (fd.abs() + analytic.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    max_rel
}
