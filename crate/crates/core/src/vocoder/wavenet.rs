//! WaveNet with a pitch control module in front of the gate activation.
//!
//! Dilated causal convolutions over μ-law codes; mel features and (when
//! enabled) an embedded pitch track are projected per layer and added to
//! both halves of the `tanh ⊙ σ` gate. Conditions live at frame rate and
//! are held for the 160 samples of each frame.

use super::VocoderError;
use crate::dsp::{mu_law_decode, Waveform, HOP, QUANTIZATION_LEVELS, SAMPLE_RATE};
use crate::frontend::PITCH_VOCAB;
use crate::neural::{
    load_checkpoint, save_checkpoint, softmax_nll, softmax_nll_backward, AdamState, Conv1d,
    Embedding, Linear, NeuralError, Padding, ParamModel, Parameter, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::path::Path;

/// Samples per conditioning frame.
pub const UPSAMPLE_FACTOR: usize = HOP;

/// Conditioning frame of a sample index under nearest-frame hold.
pub fn sample_to_frame(sample: usize) -> usize {
    sample / UPSAMPLE_FACTOR
}

/// Exact sample count carried by `frames` conditioning frames.
pub fn frames_to_samples(frames: usize) -> usize {
    frames * UPSAMPLE_FACTOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveNetConfig {
    /// Dilated layers; layer `i` has dilation `2^i`.
    pub layers: usize,
    pub residual_channels: usize,
    pub skip_channels: usize,
    /// Conditioning feature dimension (mel bands).
    pub feature_dim: usize,
    /// Pitch embedding width; ignored when `use_pitch` is off.
    pub pitch_embed_dim: usize,
    /// The pitch control module; off reproduces the base model.
    pub use_pitch: bool,
}

impl Default for WaveNetConfig {
    fn default() -> Self {
        WaveNetConfig {
            layers: 10,
            residual_channels: 32,
            skip_channels: 64,
            feature_dim: crate::dsp::MEL_BANDS,
            pitch_embed_dim: 32,
            use_pitch: true,
        }
    }
}

impl WaveNetConfig {
    /// `1 + sum((kernel - 1) * dilation)` with kernel 2, dilations `2^i`.
    pub fn receptive_field(&self) -> usize {
        1 + (0..self.layers).map(|i| 1usize << i).sum::<usize>()
    }

    pub fn hash(&self) -> String {
        crate::neural::config_hash(&serde_json::to_string(self).expect("config serializes"))
    }
}

/// Frame-rate integer pitch track (semitone ids) the generator conditions on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitchFrameTrack(pub Vec<usize>);

#[derive(Debug, Clone)]
struct WnLayer {
    conv_f: Conv1d,
    conv_g: Conv1d,
    feat_f: Linear,
    feat_g: Linear,
    pitch_f: Option<Linear>,
    pitch_g: Option<Linear>,
    res: Linear,
    skip: Linear,
}

#[derive(Debug, Clone)]
pub struct WaveNet {
    pub cfg: WaveNetConfig,
    input_embed: Embedding,
    pitch_embed: Option<Embedding>,
    layers: Vec<WnLayer>,
    post1: Linear,
    post2: Linear,
}

impl WaveNet {
    pub fn new(cfg: WaveNetConfig, seed: u64) -> Result<Self, VocoderError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cfg.residual_channels;
        let input_embed = Embedding::new("wn.input_embed", QUANTIZATION_LEVELS, c, &mut rng);
        let pitch_embed = cfg
            .use_pitch
            .then(|| Embedding::new("wn.pitch_embed", PITCH_VOCAB, cfg.pitch_embed_dim, &mut rng));
        let mut layers = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            let dilation = 1usize << i;
            let mk_conv = |tag: &str, rng: &mut ChaCha8Rng| {
                Conv1d::with_dilation(
                    &format!("wn.layer{i}.{tag}"),
                    2,
                    c,
                    c,
                    Padding::Causal,
                    dilation,
                    rng,
                )
            };
            let conv_f = mk_conv("conv_f", &mut rng)?;
            let conv_g = mk_conv("conv_g", &mut rng)?;
            let feat_f = Linear::new(&format!("wn.layer{i}.feat_f"), cfg.feature_dim, c, &mut rng);
            let feat_g = Linear::new(&format!("wn.layer{i}.feat_g"), cfg.feature_dim, c, &mut rng);
            let (pitch_f, pitch_g) = if cfg.use_pitch {
                (
                    Some(Linear::new(&format!("wn.layer{i}.pitch_f"), cfg.pitch_embed_dim, c, &mut rng)),
                    Some(Linear::new(&format!("wn.layer{i}.pitch_g"), cfg.pitch_embed_dim, c, &mut rng)),
                )
            } else {
                (None, None)
            };
            let res = Linear::new(&format!("wn.layer{i}.res"), c, c, &mut rng);
            let skip = Linear::new(&format!("wn.layer{i}.skip"), c, cfg.skip_channels, &mut rng);
            layers.push(WnLayer { conv_f, conv_g, feat_f, feat_g, pitch_f, pitch_g, res, skip });
        }
        let post1 = Linear::new("wn.post1", cfg.skip_channels, cfg.skip_channels, &mut rng);
        let post2 = Linear::new("wn.post2", cfg.skip_channels, QUANTIZATION_LEVELS, &mut rng);
        Ok(WaveNet { cfg, input_embed, pitch_embed, layers, post1, post2 })
    }

    fn validate_lengths(
        &self,
        codes: &[u8],
        features: &Tensor,
        pitch: Option<&PitchFrameTrack>,
    ) -> Result<(), VocoderError> {
        if features.cols() != self.cfg.feature_dim {
            return Err(VocoderError::Condition(format!(
                "feature dim {} != configured {}",
                features.cols(),
                self.cfg.feature_dim
            )));
        }
        if codes.len() != frames_to_samples(features.rows()) {
            return Err(VocoderError::Condition(format!(
                "{} samples vs {} frames x {UPSAMPLE_FACTOR}",
                codes.len(),
                features.rows()
            )));
        }
        match (self.cfg.use_pitch, pitch) {
            (true, Some(track)) if track.0.len() != features.rows() => {
                Err(VocoderError::Condition(format!(
                    "pitch track {} frames vs features {}",
                    track.0.len(),
                    features.rows()
                )))
            }
            (true, None) => Err(VocoderError::Condition(
                "pitch-conditioned model needs a pitch track".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Teacher-forced negative log-likelihood of `codes[range]`, each term
    /// conditioned on all earlier codes inside the window (history before
    /// the window is zero context). Runs the backward pass for the mean
    /// NLL when `with_grads` is set.
    pub fn nll_window(
        &mut self,
        codes: &[u8],
        features: &Tensor,
        pitch: Option<&PitchFrameTrack>,
        range: Range<usize>,
        with_grads: bool,
    ) -> Result<Vec<f64>, VocoderError> {
        self.validate_lengths(codes, features, pitch)?;
        if range.end > codes.len() || range.is_empty() {
            return Err(VocoderError::Condition(format!(
                "window {range:?} out of bounds for {} samples",
                codes.len()
            )));
        }
        let len = range.len();
        let c = self.cfg.residual_channels;

        // previous-sample inputs; a silent center code precedes sample 0
        let in_codes: Vec<usize> = range
            .clone()
            .map(|g| if g == 0 { 128 } else { codes[g - 1] as usize })
            .collect();
        let targets: Vec<usize> = range.clone().map(|g| codes[g] as usize).collect();
        let frame_of: Vec<usize> = range.clone().map(sample_to_frame).collect();

        let (mut x, in_ids) = self.input_embed.forward(&in_codes)?;

        // frame-rate condition projections, shared across the window
        let pitch_frames = pitch.map(|track| {
            let emb = self.pitch_embed.as_ref().expect("use_pitch implies embedding");
            emb.forward(&track.0).expect("pitch ids bounded by vocab")
        });

        struct LayerFwd {
            conv_f_cache: crate::neural::Conv1dCache,
            conv_g_cache: crate::neural::Conv1dCache,
            feat_f_cache: crate::neural::LinearCache,
            feat_g_cache: crate::neural::LinearCache,
            pitch_f_cache: Option<crate::neural::LinearCache>,
            pitch_g_cache: Option<crate::neural::LinearCache>,
            res_cache: crate::neural::LinearCache,
            skip_cache: crate::neural::LinearCache,
            f_out: Tensor,
            g_out: Tensor,
        }

        let mut fwd: Vec<LayerFwd> = Vec::with_capacity(self.layers.len());
        let mut skip_sum = Tensor::zeros(vec![len, self.cfg.skip_channels]);
        for layer in &self.layers {
            let (cf, conv_f_cache) = layer.conv_f.forward(&x);
            let (cg, conv_g_cache) = layer.conv_g.forward(&x);
            let (ff, feat_f_cache) = layer.feat_f.forward(features);
            let (fg, feat_g_cache) = layer.feat_g.forward(features);
            let (pf, pitch_f_cache, pg, pitch_g_cache) = match (&pitch_frames, &layer.pitch_f, &layer.pitch_g) {
                (Some((emb, _)), Some(lf), Some(lg)) => {
                    let (pf, cf2) = lf.forward(emb);
                    let (pg, cg2) = lg.forward(emb);
                    (Some(pf), Some(cf2), Some(pg), Some(cg2))
                }
                _ => (None, None, None, None),
            };

            let mut f_out = Tensor::zeros(vec![len, c]);
            let mut g_out = Tensor::zeros(vec![len, c]);
            for t in 0..len {
                let fr = frame_of[t];
                let frow = f_out.row_mut(t);
                for j in 0..c {
                    let mut a = cf.row(t)[j] + ff.row(fr)[j];
                    if let Some(p) = &pf {
                        a += p.row(fr)[j];
                    }
                    frow[j] = a.tanh();
                }
                let grow = g_out.row_mut(t);
                for j in 0..c {
                    let mut a = cg.row(t)[j] + fg.row(fr)[j];
                    if let Some(p) = &pg {
                        a += p.row(fr)[j];
                    }
                    grow[j] = 1.0 / (1.0 + (-a).exp());
                }
            }
            let mut z = Tensor::zeros(vec![len, c]);
            for i in 0..len * c {
                z.data_mut()[i] = f_out.data()[i] * g_out.data()[i];
            }
            let (sk, skip_cache) = layer.skip.forward(&z);
            skip_sum.add_assign(&sk);
            let (rs, res_cache) = layer.res.forward(&z);
            x = x.add(&rs);
            fwd.push(LayerFwd {
                conv_f_cache,
                conv_g_cache,
                feat_f_cache,
                feat_g_cache,
                pitch_f_cache,
                pitch_g_cache,
                res_cache,
                skip_cache,
                f_out,
                g_out,
            });
        }

        let (r1, r1_mask) = crate::neural::relu(&skip_sum);
        let (h1, post1_cache) = self.post1.forward(&r1);
        let (r2, r2_mask) = crate::neural::relu(&h1);
        let (logits, post2_cache) = self.post2.forward(&r2);
        let (nll, nll_cache) = softmax_nll(&logits, &targets);

        if with_grads {
            let weights = vec![1.0 / len as f64; len];
            let d_logits = softmax_nll_backward(&nll_cache, &weights);
            let d_r2 = self.post2.backward(&post2_cache, &d_logits);
            let d_h1 = crate::neural::relu_backward(&r2_mask, &d_r2);
            let d_r1 = self.post1.backward(&post1_cache, &d_h1);
            let d_skip_sum = crate::neural::relu_backward(&r1_mask, &d_r1);

            let mut d_pitch_emb: Option<Tensor> =
                pitch_frames.as_ref().map(|(emb, _)| Tensor::zeros(vec![emb.rows(), emb.cols()]));
            let mut dx = Tensor::zeros(vec![len, c]);
            for (layer, cache) in self.layers.iter_mut().zip(&fwd).rev() {
                // x_{l+1} = x_l + res(z); skips all feed the shared sum
                let mut d_z = layer.res.backward(&cache.res_cache, &dx);
                d_z.add_assign(&layer.skip.backward(&cache.skip_cache, &d_skip_sum));

                let mut da_f = Tensor::zeros(vec![len, c]);
                let mut da_g = Tensor::zeros(vec![len, c]);
                for i in 0..len * c {
                    let f = cache.f_out.data()[i];
                    let g = cache.g_out.data()[i];
                    da_f.data_mut()[i] = d_z.data()[i] * g * (1.0 - f * f);
                    da_g.data_mut()[i] = d_z.data()[i] * f * g * (1.0 - g);
                }

                // conditions accumulate per frame
                let mut d_ff = Tensor::zeros(vec![features.rows(), c]);
                let mut d_fg = Tensor::zeros(vec![features.rows(), c]);
                for t in 0..len {
                    let fr = frame_of[t];
                    for j in 0..c {
                        d_ff.row_mut(fr)[j] += da_f.row(t)[j];
                        d_fg.row_mut(fr)[j] += da_g.row(t)[j];
                    }
                }
                // features are data, their gradient is discarded
                let _ = layer.feat_f.backward(&cache.feat_f_cache, &d_ff);
                let _ = layer.feat_g.backward(&cache.feat_g_cache, &d_fg);
                if let (Some(lf), Some(lg), Some(cf2), Some(cg2), Some(acc)) = (
                    layer.pitch_f.as_mut(),
                    layer.pitch_g.as_mut(),
                    cache.pitch_f_cache.as_ref(),
                    cache.pitch_g_cache.as_ref(),
                    d_pitch_emb.as_mut(),
                ) {
                    acc.add_assign(&lf.backward(cf2, &d_ff));
                    acc.add_assign(&lg.backward(cg2, &d_fg));
                }

                let d_from_f = layer.conv_f.backward(&cache.conv_f_cache, &da_f);
                let d_from_g = layer.conv_g.backward(&cache.conv_g_cache, &da_g);
                // dx_l = dx_{l+1} (identity path) + conv paths
                dx.add_assign(&d_from_f);
                dx.add_assign(&d_from_g);
            }
            self.input_embed.backward(&in_ids, &dx);
            if let (Some(acc), Some(emb), Some(track)) =
                (d_pitch_emb, self.pitch_embed.as_mut(), pitch)
            {
                emb.backward(&track.0, &acc);
            }
        }
        Ok(nll)
    }

    /// Per-sample NLL over a whole utterance.
    pub fn nll(
        &mut self,
        codes: &[u8],
        features: &Tensor,
        pitch: Option<&PitchFrameTrack>,
    ) -> Result<Vec<f64>, VocoderError> {
        let len = codes.len();
        self.nll_window(codes, features, pitch, 0..len, false)
    }

    /// One Adam step on a training window.
    pub fn train_step(
        &mut self,
        codes: &[u8],
        features: &Tensor,
        pitch: Option<&PitchFrameTrack>,
        range: Range<usize>,
        adam: &mut AdamState,
        lr: f64,
    ) -> Result<f64, VocoderError> {
        self.zero_grad();
        let nll = self.nll_window(codes, features, pitch, range, true)?;
        let mean = nll.iter().sum::<f64>() / nll.len() as f64;
        if !mean.is_finite() {
            return Err(VocoderError::NonFiniteLoss(adam.step + 1));
        }
        adam.update(self.params_mut(), lr)?;
        Ok(mean)
    }

    /// Autoregressive sampling at temperature 1.0; output length is exactly
    /// `160 * frames`, bit-reproducible for a fixed seed.
    pub fn generate(
        &self,
        features: &Tensor,
        pitch: Option<&PitchFrameTrack>,
        seed: u64,
    ) -> Result<Waveform, VocoderError> {
        // reuse the shared validation with a phantom code buffer length
        let samples_len = frames_to_samples(features.rows());
        self.validate_lengths(&vec![0u8; samples_len], features, pitch)?;

        let c = self.cfg.residual_channels;
        let n_layers = self.layers.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let pitch_frames: Option<Tensor> = pitch.map(|track| {
            let emb = self.pitch_embed.as_ref().expect("use_pitch implies embedding");
            emb.forward(&track.0).expect("pitch ids bounded by vocab").0
        });

        // ring buffers of past layer inputs, one slot per dilation step
        let mut history: Vec<Vec<f64>> = (0..n_layers).map(|i| vec![0.0; (1usize << i) * c]).collect();
        // per-frame condition projections, refreshed when the frame changes
        let mut cond_f: Vec<Vec<f64>> = vec![vec![0.0; c]; n_layers];
        let mut cond_g: Vec<Vec<f64>> = vec![vec![0.0; c]; n_layers];
        let mut current_frame = usize::MAX;

        let mut samples = Vec::with_capacity(samples_len);
        let mut prev_code: usize = 128;
        let mut logits = vec![0.0; QUANTIZATION_LEVELS];
        let mut probs = vec![0.0; QUANTIZATION_LEVELS];

        for g in 0..samples_len {
            let frame = sample_to_frame(g);
            if frame != current_frame {
                current_frame = frame;
                let feat_row = features.row(frame);
                for (li, layer) in self.layers.iter().enumerate() {
                    project_row(&layer.feat_f, feat_row, &mut cond_f[li]);
                    project_row(&layer.feat_g, feat_row, &mut cond_g[li]);
                    if let (Some(emb), Some(lf), Some(lg)) =
                        (&pitch_frames, &layer.pitch_f, &layer.pitch_g)
                    {
                        add_projected_row(lf, emb.row(frame), &mut cond_f[li]);
                        add_projected_row(lg, emb.row(frame), &mut cond_g[li]);
                    }
                }
            }

            let mut x: Vec<f64> = self.input_embed.table.tensor.row(prev_code).to_vec();
            let mut skip_sum = vec![0.0; self.cfg.skip_channels];
            for (li, layer) in self.layers.iter().enumerate() {
                let dilation = 1usize << li;
                let slot = (g % dilation) * c;
                // x at t - dilation, zero before the sequence start
                let x_past: Vec<f64> = if g >= dilation {
                    history[li][slot..slot + c].to_vec()
                } else {
                    vec![0.0; c]
                };
                history[li][slot..slot + c].copy_from_slice(&x);

                let kf = layer.conv_f.kernel.tensor.data();
                let kg = layer.conv_g.kernel.tensor.data();
                let bf = layer.conv_f.bias.tensor.data();
                let bg = layer.conv_g.bias.tensor.data();
                let mut z = vec![0.0; c];
                for j in 0..c {
                    // kernel layout [tap][c_in][c_out]; tap 0 is the past
                    let mut af = bf[j] + cond_f[li][j];
                    let mut ag = bg[j] + cond_g[li][j];
                    for i in 0..c {
                        af += x_past[i] * kf[i * c + j] + x[i] * kf[c * c + i * c + j];
                        ag += x_past[i] * kg[i * c + j] + x[i] * kg[c * c + i * c + j];
                    }
                    z[j] = af.tanh() / (1.0 + (-ag).exp());
                }
                accumulate_projected(&layer.skip, &z, &mut skip_sum);
                let mut next_x = x.clone();
                accumulate_projected(&layer.res, &z, &mut next_x);
                x = next_x;
            }

            for v in skip_sum.iter_mut() {
                *v = v.max(0.0);
            }
            let mut h1 = vec![0.0; self.cfg.skip_channels];
            accumulate_projected(&self.post1, &skip_sum, &mut h1);
            for v in h1.iter_mut() {
                *v = v.max(0.0);
            }
            logits.fill(0.0);
            accumulate_projected(&self.post2, &h1, &mut logits);

            // categorical sample at temperature 1.0
            let max = logits.iter().cloned().fold(f64::MIN, f64::max);
            let mut zsum = 0.0;
            for (p, l) in probs.iter_mut().zip(&logits) {
                *p = (l - max).exp();
                zsum += *p;
            }
            let mut u = rng.gen_range(0.0..1.0) * zsum;
            let mut code = QUANTIZATION_LEVELS - 1;
            for (k, p) in probs.iter().enumerate() {
                if u < *p {
                    code = k;
                    break;
                }
                u -= p;
            }
            samples.push(mu_law_decode(code as u8));
            prev_code = code;
        }
        Ok(Waveform::new(samples, SAMPLE_RATE))
    }

    pub fn save(&mut self, path: &Path) -> Result<(), VocoderError> {
        let hash = self.cfg.hash();
        let params = self.params_mut();
        let refs: Vec<&Parameter> = params.iter().map(|p| &**p).collect();
        save_checkpoint(path, &refs, &hash).map_err(NeuralError::from)?;
        Ok(())
    }

    pub fn load(path: &Path, cfg: WaveNetConfig, seed: u64) -> Result<Self, VocoderError> {
        let mut model = WaveNet::new(cfg, seed)?;
        let hash = model.cfg.hash();
        load_checkpoint(path, model.params_mut(), &hash).map_err(NeuralError::from)?;
        Ok(model)
    }

}

/// `out = layer(x_row)` for a single row.
fn project_row(layer: &Linear, x: &[f64], out: &mut [f64]) {
    out.copy_from_slice(layer.bias.tensor.data());
    add_projected_row(layer, x, out);
}

/// `out += W^T x` (no bias) for a single row.
fn add_projected_row(layer: &Linear, x: &[f64], out: &mut [f64]) {
    let (d_in, d_out) = (layer.dim_in(), layer.dim_out());
    let w = layer.weight.tensor.data();
    for (i, &xv) in x.iter().enumerate().take(d_in) {
        if xv == 0.0 {
            continue;
        }
        let row = &w[i * d_out..(i + 1) * d_out];
        for j in 0..d_out {
            out[j] += xv * row[j];
        }
    }
}

/// `out += layer(x)` including bias, single row.
fn accumulate_projected(layer: &Linear, x: &[f64], out: &mut [f64]) {
    for (o, b) in out.iter_mut().zip(layer.bias.tensor.data()) {
        *o += b;
    }
    add_projected_row(layer, x, out);
}

impl ParamModel for WaveNet {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.input_embed.params_mut();
        if let Some(e) = &mut self.pitch_embed {
            p.extend(e.params_mut());
        }
        for l in &mut self.layers {
            p.extend(l.conv_f.params_mut());
            p.extend(l.conv_g.params_mut());
            p.extend(l.feat_f.params_mut());
            p.extend(l.feat_g.params_mut());
            if let Some(x) = &mut l.pitch_f {
                p.extend(x.params_mut());
            }
            if let Some(x) = &mut l.pitch_g {
                p.extend(x.params_mut());
            }
            p.extend(l.res.params_mut());
            p.extend(l.skip.params_mut());
        }
        p.extend(self.post1.params_mut());
        p.extend(self.post2.params_mut());
        p
    }
}
