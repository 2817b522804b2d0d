//! Feature-to-waveform decoding: Griffin-Lim (direct, or via the inverse
//! mel projection) and the pitch-conditioned WaveNet.

mod griffin_lim;
mod wavenet;

pub use griffin_lim::{griffin_lim, griffin_lim_with_momentum, spectral_convergence, GRIFFIN_LIM_MOMENTUM};
pub use wavenet::{
    frames_to_samples, sample_to_frame, PitchFrameTrack, WaveNet, WaveNetConfig, UPSAMPLE_FACTOR,
};

use crate::dsp::{imel_project, LinearSpectrogram, MelSpectrogram, Waveform};
use crate::frontend::{expand_ids, OutputHead};
use crate::neural::{NeuralError, Tensor};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VocoderError {
    #[error("incompatible head/vocoder pair {head:?} + {vocoder:?}; valid pairs: mel + imel-griffin-lim, mel + wavenet, linear + griffin-lim")]
    IncompatiblePair { head: OutputHead, vocoder: VocoderKind },
    #[error("conditioning: {0}")]
    Condition(String),
    #[error("a trained WaveNet checkpoint is required for this pairing")]
    MissingWaveNet,
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(u64),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocoderKind {
    /// Mel features projected back to a linear spectrogram, then Griffin-Lim.
    ImelGriffinLim,
    /// Griffin-Lim directly on a linear-spectrogram head.
    GriffinLim,
    /// The autoregressive neural vocoder on mel features.
    WaveNet,
}

/// Per-phone pitch expanded to frame rate by the regulator's repeat rule.
pub fn expand_pitch_to_frames(pitch: &[usize], durations: &[usize]) -> PitchFrameTrack {
    PitchFrameTrack(expand_ids(pitch, durations))
}

/// Everything `synthesize_waveform` may need beyond the features.
pub struct SynthesisOptions<'a> {
    pub gl_iters: usize,
    pub wavenet: Option<&'a WaveNet>,
    pub frame_pitch: Option<&'a [usize]>,
    pub seed: u64,
}

impl Default for SynthesisOptions<'_> {
    fn default() -> Self {
        SynthesisOptions { gl_iters: 60, wavenet: None, frame_pitch: None, seed: 0 }
    }
}

/// Decode `[T, head_dim]` features into audio through the chosen vocoder.
pub fn synthesize_waveform(
    features: &Tensor,
    head: OutputHead,
    vocoder: VocoderKind,
    opts: &SynthesisOptions,
) -> Result<Waveform, VocoderError> {
    match (head, vocoder) {
        (OutputHead::Mel, VocoderKind::ImelGriffinLim) => {
            let mel = tensor_to_mel(features);
            let linear = imel_project(&mel);
            Ok(griffin_lim(&linear, opts.gl_iters))
        }
        (OutputHead::Linear, VocoderKind::GriffinLim) => {
            let linear = tensor_to_linear(features);
            Ok(griffin_lim(&linear, opts.gl_iters))
        }
        (OutputHead::Mel, VocoderKind::WaveNet) => {
            let model = opts.wavenet.ok_or(VocoderError::MissingWaveNet)?;
            let pitch = match (model.cfg.use_pitch, opts.frame_pitch) {
                (true, Some(p)) => Some(PitchFrameTrack(p.to_vec())),
                (true, None) => {
                    return Err(VocoderError::Condition(
                        "pitch-conditioned WaveNet needs a frame pitch track".into(),
                    ))
                }
                (false, _) => None,
            };
            model.generate(features, pitch.as_ref(), opts.seed)
        }
        (head, vocoder) => Err(VocoderError::IncompatiblePair { head, vocoder }),
    }
}

fn tensor_to_mel(features: &Tensor) -> MelSpectrogram {
    assert_eq!(features.cols(), MelSpectrogram::COLS, "mel feature width");
    MelSpectrogram::from_flat(features.data().to_vec(), features.rows())
}

fn tensor_to_linear(features: &Tensor) -> LinearSpectrogram {
    assert_eq!(features.cols(), LinearSpectrogram::COLS, "linear feature width");
    LinearSpectrogram::from_flat(
        features.data().iter().map(|v| v.max(0.0)).collect(),
        features.rows(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{grad_check, AdamState, ParamModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg(use_pitch: bool) -> WaveNetConfig {
        WaveNetConfig {
            layers: 4,
            residual_channels: 8,
            skip_channels: 12,
            feature_dim: 80,
            pitch_embed_dim: 6,
            use_pitch,
        }
    }

    fn tiny_inputs(frames: usize) -> (Vec<u8>, Tensor, PitchFrameTrack) {
        let n = frames_to_samples(frames);
        let codes: Vec<u8> = (0..n)
            .map(|i| crate::dsp::mu_law_encode(0.4 * (i as f64 * 0.09).sin()))
            .collect();
        let features = Tensor::matrix(
            frames,
            80,
            (0..frames * 80).map(|v| ((v as f64) * 0.01).sin()).collect(),
        );
        let pitch = PitchFrameTrack(vec![60; frames]);
        (codes, features, pitch)
    }

    #[test]
    fn receptive_field_formula() {
        assert_eq!(WaveNetConfig::default().receptive_field(), 1024);
        assert_eq!(tiny_cfg(true).receptive_field(), 16);
    }

    #[test]
    fn untrained_nll_is_near_uniform() {
        let mut wn = WaveNet::new(tiny_cfg(true), 3).unwrap();
        let (codes, features, pitch) = tiny_inputs(2);
        let nll = wn.nll(&codes, &features, Some(&pitch)).unwrap();
        let mean = nll.iter().sum::<f64>() / nll.len() as f64;
        // glorot-initialized logits are near zero, softmax near uniform
        assert!((mean - 256f64.ln()).abs() < 0.3, "mean nll {mean}");
    }

    #[test]
    fn future_perturbation_leaves_earlier_nll() {
        let mut wn = WaveNet::new(tiny_cfg(true), 4).unwrap();
        let (mut codes, features, pitch) = tiny_inputs(2);
        let a = wn.nll(&codes, &features, Some(&pitch)).unwrap();
        let split = 200;
        codes[split] = codes[split].wrapping_add(40);
        let b = wn.nll(&codes, &features, Some(&pitch)).unwrap();
        for t in 0..split {
            assert_eq!(a[t], b[t], "nll at {t} changed by future sample");
        }
        assert_ne!(a[split], b[split]);
    }

    #[test]
    fn receptive_field_by_perturbation_probe() {
        let cfg = tiny_cfg(false);
        let rf = cfg.receptive_field();
        let mut wn = WaveNet::new(cfg, 5).unwrap();
        let (mut codes, features, _) = tiny_inputs(2);
        let probe = 280usize;
        let base = wn.nll(&codes, &features, None).unwrap();

        // inputs are shifted one step (x[t] = codes[t-1]), so the prediction
        // at `probe` sees codes [probe - rf, probe - 1]
        let idx_in = probe - rf;
        let old = codes[idx_in];
        codes[idx_in] = old.wrapping_add(60);
        let inside = wn.nll(&codes, &features, None).unwrap();
        assert_ne!(base[probe], inside[probe], "inside the receptive field");
        codes[idx_in] = old;

        // one step further back must be invisible
        let idx_out = probe - rf - 1;
        codes[idx_out] = codes[idx_out].wrapping_add(60);
        let outside = wn.nll(&codes, &features, None).unwrap();
        assert_eq!(base[probe], outside[probe], "outside the receptive field");
    }

    #[test]
    fn wavenet_grad_check() {
        let mut wn = WaveNet::new(
            WaveNetConfig {
                layers: 3,
                residual_channels: 4,
                skip_channels: 6,
                feature_dim: 80,
                pitch_embed_dim: 4,
                use_pitch: true,
            },
            6,
        )
        .unwrap();
        let (codes, features, pitch) = tiny_inputs(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = grad_check(
            &mut wn,
            |m, with_grads| {
                m.zero_grad();
                let nll = m
                    .nll_window(&codes, &features, Some(&pitch), 20..52, with_grads)
                    .unwrap();
                nll.iter().sum::<f64>() / nll.len() as f64
            },
            1e-5,
            2,
            &mut rng,
        );
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn generation_is_seeded_and_exact_length() {
        let mut wn = WaveNet::new(tiny_cfg(true), 7).unwrap();
        let (codes, features, pitch) = tiny_inputs(2);
        // a couple of steps so logits are not uniform
        let mut adam = AdamState::vocoder();
        for _ in 0..3 {
            wn.train_step(&codes, &features, Some(&pitch), 0..160, &mut adam, 1e-3)
                .unwrap();
        }
        let a = wn.generate(&features, Some(&pitch), 42).unwrap();
        let b = wn.generate(&features, Some(&pitch), 42).unwrap();
        let c = wn.generate(&features, Some(&pitch), 43).unwrap();
        assert_eq!(a.len(), frames_to_samples(2));
        assert_eq!(a.samples, b.samples, "same seed, same audio");
        assert_ne!(a.samples, c.samples, "different seed, different audio");
    }

    #[test]
    fn generation_matches_teacher_forced_forward() {
        // feed generated codes back through the scorer; finite NLL means the
        // incremental path produced valid categorical samples
        let mut wn = WaveNet::new(tiny_cfg(false), 8).unwrap();
        let (_, features, _) = tiny_inputs(1);
        let w = wn.generate(&features, None, 11).unwrap();
        assert_eq!(w.len(), 160);
        let codes: Vec<u8> = w.samples.iter().map(|s| crate::dsp::mu_law_encode(*s)).collect();
        let nll = wn.nll(&codes, &features, None).unwrap();
        assert!(nll.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn condition_length_mismatch_rejected() {
        let mut wn = WaveNet::new(tiny_cfg(true), 9).unwrap();
        let (codes, features, pitch) = tiny_inputs(2);
        let short = Tensor::matrix(1, 80, features.data()[..80].to_vec());
        assert!(matches!(
            wn.nll(&codes, &short, Some(&pitch)),
            Err(VocoderError::Condition(_))
        ));
        let bad_pitch = PitchFrameTrack(vec![60; 1]);
        assert!(matches!(
            wn.nll(&codes, &features, Some(&bad_pitch)),
            Err(VocoderError::Condition(_))
        ));
    }

    #[test]
    fn upsample_mapping_oracle() {
        assert_eq!(sample_to_frame(0), 0);
        assert_eq!(sample_to_frame(159), 0);
        assert_eq!(sample_to_frame(160), 1);
        assert_eq!(frames_to_samples(3), 480);
        // every frame owns exactly 160 samples
        for f in 0..5usize {
            let count = (0..frames_to_samples(5)).filter(|g| sample_to_frame(*g) == f).count();
            assert_eq!(count, UPSAMPLE_FACTOR);
        }
    }

    #[test]
    fn expand_pitch_examples() {
        let track = expand_pitch_to_frames(&[69, 71], &[2, 1]);
        assert_eq!(track.0, [69, 69, 71]);
        let track = expand_pitch_to_frames(&[69, 71, 72], &[1, 0, 2]);
        assert_eq!(track.0, [69, 72, 72]);
    }

    #[test]
    fn dispatch_contract() {
        let features = Tensor::matrix(3, 80, vec![-4.0; 240]);
        let opts = SynthesisOptions { gl_iters: 2, ..Default::default() };
        let w = synthesize_waveform(&features, OutputHead::Mel, VocoderKind::ImelGriffinLim, &opts)
            .unwrap();
        assert_eq!(w.len(), 2 * crate::dsp::HOP + crate::dsp::FRAME_LEN);

        let linear = Tensor::matrix(3, 513, vec![0.0; 3 * 513]);
        assert!(
            synthesize_waveform(&linear, OutputHead::Linear, VocoderKind::GriffinLim, &opts).is_ok()
        );

        let err = synthesize_waveform(&linear, OutputHead::Linear, VocoderKind::WaveNet, &opts)
            .unwrap_err();
        assert!(err.to_string().contains("valid pairs"), "{err}");

        let err = synthesize_waveform(&features, OutputHead::Mel, VocoderKind::WaveNet, &opts)
            .unwrap_err();
        assert!(matches!(err, VocoderError::MissingWaveNet));
    }
}
