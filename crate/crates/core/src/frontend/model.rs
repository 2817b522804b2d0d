//! The encoder / length-regulator / decoder model.

use super::blocks::{Block, BlockCache, DurationPredictor, PostNet};
use super::losses::{loss_mse, loss_weighted_abs, PRIORITY_BAND};
use super::regulator::{
    expand_ids, length_regulate, length_regulate_backward, smooth_boundaries,
    smooth_boundaries_backward, SmoothingKernel,
};
use super::{Batch, FrontEndConfig, FrontendError, OutputHead, PITCH_VOCAB};
use crate::neural::{
    load_checkpoint, noam_lr, save_checkpoint, sinusoidal_positional_encoding, AdamState,
    Embedding, Linear, LinearCache, ParamModel, Parameter, Tensor,
};
use crate::score;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Losses of one training step.
#[derive(Debug, Clone, Copy)]
pub struct TrainStats {
    pub total: f64,
    pub feature: f64,
    pub duration: f64,
    pub postnet: Option<f64>,
    pub lr: f64,
}

/// Inference output: features plus the frame-level pitch track the vocoder
/// conditions on, expanded with the same durations as the features.
#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub features: Tensor,
    pub frame_pitch: Vec<usize>,
    pub durations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FrontEnd {
    pub cfg: FrontEndConfig,
    pub kernel: SmoothingKernel,
    phone_emb: Embedding,
    pitch_emb: Embedding,
    speaker_emb: Embedding,
    encoder: Vec<Block>,
    decoder: Vec<Block>,
    duration: DurationPredictor,
    proj: Linear,
    postnet: Option<PostNet>,
}

struct EncodeCaches {
    phone_ids: Vec<usize>,
    pitch_ids: Option<Vec<usize>>,
    speaker: usize,
    blocks: Vec<BlockCache>,
}

struct DecodeCaches {
    pitch_ids: Option<Vec<usize>>,
    blocks: Vec<BlockCache>,
    proj: LinearCache,
}

impl FrontEnd {
    pub fn new(cfg: FrontEndConfig, seed: u64) -> Result<Self, FrontendError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = cfg.model_dim;
        let phone_emb = Embedding::new("phone_emb", score::inventory_size(), dim, &mut rng);
        let pitch_emb = Embedding::new("pitch_emb", PITCH_VOCAB, dim, &mut rng);
        let speaker_emb = Embedding::new("speaker_emb", cfg.speaker_count, dim, &mut rng);
        let mut encoder = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            encoder.push(Block::new(&format!("encoder.{i}"), dim, cfg.heads, cfg.conv_kernel, &mut rng)?);
        }
        let duration = DurationPredictor::new("duration", dim, &mut rng)?;
        let mut decoder = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            decoder.push(Block::new(&format!("decoder.{i}"), dim, cfg.heads, cfg.conv_kernel, &mut rng)?);
        }
        let proj = Linear::new("proj", dim, cfg.output_head.dim(), &mut rng);
        let postnet = if cfg.use_postnet {
            Some(PostNet::new("postnet", cfg.output_head.dim(), dim, &mut rng)?)
        } else {
            None
        };
        Ok(FrontEnd {
            cfg,
            kernel: SmoothingKernel::default(),
            phone_emb,
            pitch_emb,
            speaker_emb,
            encoder,
            decoder,
            duration,
            proj,
            postnet,
        })
    }

    // ------------------------------------------------------------- encoder

    fn encode_impl(
        &self,
        phones: &[usize],
        pitch: &[usize],
        speaker: usize,
    ) -> Result<(Tensor, EncodeCaches), FrontendError> {
        if pitch.len() != phones.len() {
            return Err(FrontendError::LengthMismatch {
                what: "pitch",
                got: pitch.len(),
                want: phones.len(),
            });
        }
        let (mut x, phone_ids) = self.phone_emb.forward(phones)?;
        let pe = sinusoidal_positional_encoding(x.rows(), self.cfg.model_dim)?;
        x.add_assign(&pe);
        let pitch_ids = if self.cfg.pitch_placement.feeds_encoder() {
            let (p, ids) = self.pitch_emb.forward(pitch)?;
            x.add_assign(&p);
            Some(ids)
        } else {
            None
        };
        let (spk, _) = self.speaker_emb.forward(&[speaker])?;
        for t in 0..x.rows() {
            for (v, s) in x.row_mut(t).iter_mut().zip(spk.row(0)) {
                *v += s;
            }
        }
        let mut blocks = Vec::with_capacity(self.encoder.len());
        for block in &self.encoder {
            let (next, cache) = block.forward(&x)?;
            x = next;
            blocks.push(cache);
        }
        Ok((x, EncodeCaches { phone_ids, pitch_ids, speaker, blocks }))
    }

    fn encode_backward(&mut self, caches: &EncodeCaches, grad: Tensor) {
        let mut g = grad;
        for (block, cache) in self.encoder.iter_mut().zip(&caches.blocks).rev() {
            g = block.backward(cache, &g);
        }
        if let Some(ids) = &caches.pitch_ids {
            self.pitch_emb.backward(ids, &g);
        }
        let mut spk_grad = Tensor::zeros(vec![1, self.cfg.model_dim]);
        for t in 0..g.rows() {
            for (s, v) in spk_grad.row_mut(0).iter_mut().zip(g.row(t)) {
                *s += v;
            }
        }
        self.speaker_emb.backward(&[caches.speaker], &spk_grad);
        self.phone_emb.backward(&caches.phone_ids, &g);
    }

    /// Phone-rate hidden states `[P, model_dim]` (inference path).
    pub fn encode(
        &self,
        phones: &[usize],
        pitch: &[usize],
        speaker: usize,
    ) -> Result<Tensor, FrontendError> {
        Ok(self.encode_impl(phones, pitch, speaker)?.0)
    }

    // ------------------------------------------------------------- decoder

    fn decode_impl(
        &self,
        frames: &Tensor,
        frame_pitch: Option<&[usize]>,
    ) -> Result<(Tensor, DecodeCaches), FrontendError> {
        let mut x = frames.clone();
        let pe = sinusoidal_positional_encoding(x.rows(), self.cfg.model_dim)?;
        x.add_assign(&pe);
        let pitch_ids = if self.cfg.pitch_placement.feeds_decoder() {
            let ids = frame_pitch.ok_or(FrontendError::MissingFramePitch)?;
            if ids.len() != frames.rows() {
                return Err(FrontendError::LengthMismatch {
                    what: "frame pitch",
                    got: ids.len(),
                    want: frames.rows(),
                });
            }
            let (p, ids) = self.pitch_emb.forward(ids)?;
            x.add_assign(&p);
            Some(ids)
        } else {
            None
        };
        let mut blocks = Vec::with_capacity(self.decoder.len());
        for block in &self.decoder {
            let (next, cache) = block.forward(&x)?;
            x = next;
            blocks.push(cache);
        }
        let (features, proj) = self.proj.forward(&x);
        Ok((features, DecodeCaches { pitch_ids, blocks, proj }))
    }

    fn decode_backward(&mut self, caches: &DecodeCaches, grad_features: &Tensor) -> Tensor {
        let mut g = self.proj.backward(&caches.proj, grad_features);
        for (block, cache) in self.decoder.iter_mut().zip(&caches.blocks).rev() {
            g = block.backward(cache, &g);
        }
        if let Some(ids) = &caches.pitch_ids {
            self.pitch_emb.backward(ids, &g);
        }
        g
    }

    /// Frame-rate features from regulated hidden states (inference path:
    /// the mel head is clamped into its feature range).
    pub fn decode_features(
        &self,
        frames: &Tensor,
        frame_pitch: Option<&[usize]>,
    ) -> Result<Tensor, FrontendError> {
        let (mut features, _) = self.decode_impl(frames, frame_pitch)?;
        if self.cfg.output_head == OutputHead::Mel {
            features = features.map(|v| v.clamp(crate::dsp::MEL_NORM_LO, crate::dsp::MEL_NORM_HI));
        }
        Ok(features)
    }

    /// Per-phone frame counts from a trained duration head.
    pub fn predict_durations(&self, encoder_out: &Tensor) -> Vec<usize> {
        DurationPredictor::to_frames(&self.duration.forward(encoder_out).0)
    }

    // ------------------------------------------------------------ training

    /// Forward pass with teacher-forced durations; when `with_grads` is set
    /// the full backward pass runs and parameter gradients accumulate.
    pub fn train_forward_backward(
        &mut self,
        batch: &Batch,
        with_grads: bool,
    ) -> Result<TrainStats, FrontendError> {
        batch.validate(&self.cfg)?;
        let (enc, enc_caches) = self.encode_impl(&batch.phones, &batch.pitch, batch.speaker)?;
        let (dur_pred, dur_cache) = self.duration.forward(&enc);
        let expanded = length_regulate(&enc, &batch.durations)?;
        let smoothed = smooth_boundaries(&expanded, &batch.durations, &self.kernel);
        let frame_pitch = self
            .cfg
            .pitch_placement
            .feeds_decoder()
            .then(|| expand_ids(&batch.pitch, &batch.durations));
        let (features, dec_caches) = self.decode_impl(&smoothed, frame_pitch.as_deref())?;

        let (feat_loss, feat_grad) = self.feature_loss(&features, &batch.target)?;

        let mut postnet_parts = None;
        if let Some(postnet) = &self.postnet {
            let (residual, cache) = postnet.forward(&features);
            let refined = features.add(&residual);
            let (pn_loss, pn_grad) = self.feature_loss(&refined, &batch.target)?;
            postnet_parts = Some((pn_loss, pn_grad, cache));
        }

        // duration loss in the log domain
        let p_count = dur_pred.len() as f64;
        let mut dur_loss = 0.0;
        let mut dur_grad = vec![0.0; dur_pred.len()];
        for (i, &d) in batch.durations.iter().enumerate() {
            let diff = dur_pred[i] - DurationPredictor::log_target(d);
            dur_loss += diff * diff / p_count;
            dur_grad[i] = 2.0 * diff / p_count;
        }

        let pn_loss = postnet_parts.as_ref().map(|(l, _, _)| *l);
        let total = feat_loss + pn_loss.unwrap_or(0.0) + dur_loss;

        if with_grads {
            let mut d_features = feat_grad;
            if let (Some((_, pn_grad, cache)), Some(postnet)) =
                (postnet_parts.as_ref(), self.postnet.as_mut())
            {
                // refined = features + postnet(features)
                d_features.add_assign(pn_grad);
                let through = postnet.backward(cache, pn_grad);
                d_features.add_assign(&through);
            }
            let d_frames = self.decode_backward(&dec_caches, &d_features);
            let d_expanded = smooth_boundaries_backward(&d_frames, &batch.durations, &self.kernel);
            let mut d_enc = length_regulate_backward(&d_expanded, &batch.durations);
            d_enc.add_assign(&self.duration.backward(&dur_cache, &dur_grad));
            self.encode_backward(&enc_caches, d_enc);
        }

        Ok(TrainStats { total, feature: feat_loss, duration: dur_loss, postnet: pn_loss, lr: 0.0 })
    }

    fn feature_loss(
        &self,
        pred: &Tensor,
        target: &Tensor,
    ) -> Result<(f64, Tensor), FrontendError> {
        match self.cfg.output_head {
            OutputHead::Mel | OutputHead::Bfcc => loss_mse(pred, target),
            OutputHead::Linear => loss_weighted_abs(pred, target, PRIORITY_BAND, 1.0),
        }
    }

    /// One optimizer step with the warmup/decay schedule.
    pub fn train_step(
        &mut self,
        batch: &Batch,
        adam: &mut AdamState,
        warmup: u64,
    ) -> Result<TrainStats, FrontendError> {
        self.zero_grad();
        let mut stats = self.train_forward_backward(batch, true)?;
        if !stats.total.is_finite() {
            return Err(FrontendError::NonFiniteLoss(adam.step + 1));
        }
        let lr = noam_lr(adam.step + 1, self.cfg.model_dim, warmup);
        adam.update(self.params_mut(), lr)?;
        stats.lr = lr;
        Ok(stats)
    }

    /// One optimizer step over several utterances: gradients accumulate
    /// across the whole slice (in order, so traces stay reproducible) and a
    /// single update runs. Returned losses are means over the slice.
    pub fn train_step_batched(
        &mut self,
        batches: &[Batch],
        adam: &mut AdamState,
        warmup: u64,
    ) -> Result<TrainStats, FrontendError> {
        assert!(!batches.is_empty(), "at least one utterance per step");
        self.zero_grad();
        let mut total = 0.0;
        let mut feature = 0.0;
        let mut duration = 0.0;
        let mut postnet_sum = 0.0;
        let mut has_postnet = false;
        for batch in batches {
            let stats = self.train_forward_backward(batch, true)?;
            total += stats.total;
            feature += stats.feature;
            duration += stats.duration;
            if let Some(p) = stats.postnet {
                postnet_sum += p;
                has_postnet = true;
            }
        }
        let n = batches.len() as f64;
        if !total.is_finite() {
            return Err(FrontendError::NonFiniteLoss(adam.step + 1));
        }
        let lr = noam_lr(adam.step + 1, self.cfg.model_dim, warmup);
        adam.update(self.params_mut(), lr)?;
        Ok(TrainStats {
            total: total / n,
            feature: feature / n,
            duration: duration / n,
            postnet: has_postnet.then_some(postnet_sum / n),
            lr,
        })
    }

    // ----------------------------------------------------------- inference

    /// Full inference: encode, predict (or force) durations, regulate,
    /// smooth, decode, refine. Also returns the score pitch expanded to
    /// frame rate by the same durations.
    pub fn synthesize_features(
        &self,
        phones: &[usize],
        pitch: &[usize],
        speaker: usize,
        forced_durations: Option<&[usize]>,
    ) -> Result<SynthesisOutput, FrontendError> {
        let (enc, _) = self.encode_impl(phones, pitch, speaker)?;
        let durations = match forced_durations {
            Some(d) => {
                if d.len() != phones.len() {
                    return Err(FrontendError::LengthMismatch {
                        what: "durations",
                        got: d.len(),
                        want: phones.len(),
                    });
                }
                d.to_vec()
            }
            None => self.predict_durations(&enc),
        };
        let expanded = length_regulate(&enc, &durations)?;
        let smoothed = smooth_boundaries(&expanded, &durations, &self.kernel);
        let frame_pitch = expand_ids(pitch, &durations);
        let decoder_pitch = self.cfg.pitch_placement.feeds_decoder().then_some(&frame_pitch[..]);
        let (mut features, _) = self.decode_impl(&smoothed, decoder_pitch)?;
        if let Some(postnet) = &self.postnet {
            let (residual, _) = postnet.forward(&features);
            features.add_assign(&residual);
        }
        if self.cfg.output_head == OutputHead::Mel {
            features = features.map(|v| v.clamp(crate::dsp::MEL_NORM_LO, crate::dsp::MEL_NORM_HI));
        }
        Ok(SynthesisOutput { features, frame_pitch, durations })
    }

    // --------------------------------------------------------- persistence

    pub fn save(&mut self, path: &Path) -> Result<(), FrontendError> {
        let hash = self.cfg.hash();
        let params = self.params_mut();
        let refs: Vec<&Parameter> = params.iter().map(|p| &**p).collect();
        save_checkpoint(path, &refs, &hash).map_err(crate::neural::NeuralError::from)?;
        Ok(())
    }

    /// Load a checkpoint; a config-hash mismatch refuses to load.
    pub fn load(path: &Path, cfg: FrontEndConfig, seed: u64) -> Result<Self, FrontendError> {
        let mut model = FrontEnd::new(cfg, seed)?;
        let hash = model.cfg.hash();
        load_checkpoint(path, model.params_mut(), &hash)
            .map_err(crate::neural::NeuralError::from)?;
        Ok(model)
    }
}

impl ParamModel for FrontEnd {
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.phone_emb.params_mut();
        p.extend(self.pitch_emb.params_mut());
        p.extend(self.speaker_emb.params_mut());
        for b in &mut self.encoder {
            p.extend(b.params_mut());
        }
        p.extend(self.duration.params_mut());
        for b in &mut self.decoder {
            p.extend(b.params_mut());
        }
        p.extend(self.proj.params_mut());
        if let Some(pn) = &mut self.postnet {
            p.extend(pn.params_mut());
        }
        p
    }
}

/// Map a score pitch value ({0} ∪ [24, 96]) onto an embedding id.
pub fn pitch_to_id(pitch: i32) -> usize {
    debug_assert!(
        pitch == score::REST_PITCH || (score::PITCH_MIN..=score::PITCH_MAX).contains(&pitch),
        "pitch {pitch} outside id range"
    );
    pitch.clamp(0, (PITCH_VOCAB - 1) as i32) as usize
}
