//! Seeded training loops with loss-curve emission.

use crate::dataset::{build_batch, extract, load_utterance, Utterance};
use crate::CliError;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use svskit::frontend::{Batch, CbhgConfig, CbhgModel, FrontEnd, FrontEndConfig};
use svskit::neural::{AdamState, Tensor};
use svskit::vocoder::{frames_to_samples, PitchFrameTrack, WaveNet, WaveNetConfig};

/// `(step, loss, lr)` triples, one per optimizer step.
pub type LossTrace = Vec<(u64, f64, f64)>;

pub fn write_loss_csv(path: &Path, trace: &LossTrace) -> Result<(), CliError> {
    let mut out = String::from("step,loss,lr\n");
    for (step, loss, lr) in trace {
        out.push_str(&format!("{step},{loss:.12},{lr:.12e}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for line in text.lines().skip(1) {
        let mut cells = line.split(',');
        let (Some(step), Some(loss)) = (cells.next(), cells.next()) else {
            continue;
        };
        points.push((
            step.parse::<f64>().map_err(|e| CliError::Validation(e.to_string()))?,
            loss.parse::<f64>().map_err(|e| CliError::Validation(e.to_string()))?,
        ));
    }
    if points.len() < 2 {
        return Err(CliError::Validation(format!(
            "{} holds {} points, need at least 2",
            path.display(),
            points.len()
        )));
    }
    Ok(points)
}

/// Front-end training config: the model plus run parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainFrontendSpec {
    #[serde(flatten)]
    pub model: FrontEndConfig,
    pub seed: u64,
    pub steps: u64,
    pub warmup: u64,
}

impl Default for TrainFrontendSpec {
    fn default() -> Self {
        TrainFrontendSpec { model: FrontEndConfig::default(), seed: 1, steps: 2000, warmup: 400 }
    }
}

/// Fixed data order: one seeded shuffle, then cycling.
pub fn data_order(count: usize, steps: u64, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    (0..steps as usize).map(|s| order[s % count]).collect()
}

/// Train a front-end on prepared batches; every step accumulates gradients
/// over the whole set in a fixed order, so traces are bit-reproducible.
/// `on_step` sees every step's losses and may stop early by returning
/// `false`.
pub fn train_frontend_model(
    batches: &[Batch],
    spec: &TrainFrontendSpec,
    mut on_step: impl FnMut(u64, &svskit::frontend::TrainStats) -> bool,
) -> Result<FrontEnd, CliError> {
    if batches.is_empty() {
        return Err(CliError::Validation("no training batches".into()));
    }
    let mut model = FrontEnd::new(spec.model.clone(), spec.seed)?;
    let mut adam = AdamState::frontend();
    for step in 1..=spec.steps {
        let stats = model.train_step_batched(batches, &mut adam, spec.warmup)?;
        if !on_step(step, &stats) {
            break;
        }
    }
    Ok(model)
}

/// Load utterances, build batches and train, writing `loss.csv`,
/// `config.json` and `frontend.svsk` under `out`.
pub fn train_frontend_from_corpus(
    corpus: &Path,
    utterances: usize,
    spec: &TrainFrontendSpec,
    out: &Path,
) -> Result<FrontEnd, CliError> {
    std::fs::create_dir_all(out)?;
    let batches = load_batches(corpus, utterances, &spec.model)?;
    let mut trace = LossTrace::new();
    let mut model = train_frontend_model(&batches, spec, |step, stats| {
        trace.push((step, stats.total, stats.lr));
        if step % 100 == 0 {
            log::info!(
                "front-end step {step}: loss {:.6} (feature {:.6})",
                stats.total,
                stats.feature
            );
        }
        true
    })?;
    write_loss_csv(&out.join("loss.csv"), &trace)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(spec)?)?;
    model.save(&out.join("frontend.svsk"))?;
    Ok(model)
}

pub fn load_batches(
    corpus: &Path,
    utterances: usize,
    cfg: &FrontEndConfig,
) -> Result<Vec<Batch>, CliError> {
    (0..utterances)
        .map(|i| {
            let utt = load_utterance(corpus, i)?;
            let feats = extract(&utt)?;
            Ok(build_batch(&utt, &feats, cfg.output_head))
        })
        .collect()
}

/// Vocoder training config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainVocoderSpec {
    #[serde(flatten)]
    pub model: WaveNetConfig,
    pub seed: u64,
    pub steps: u64,
    pub lr: f64,
    /// Samples per training window.
    pub crop: usize,
}

impl Default for TrainVocoderSpec {
    fn default() -> Self {
        TrainVocoderSpec {
            model: WaveNetConfig::default(),
            seed: 1,
            steps: 500,
            lr: 1e-3,
            crop: 1600,
        }
    }
}

/// One vocoder training utterance: codes aligned to mel frames plus the
/// frame pitch track.
pub struct VocoderExample {
    pub codes: Vec<u8>,
    pub mel: Tensor,
    pub pitch: PitchFrameTrack,
}

pub fn vocoder_example(utt: &Utterance) -> Result<VocoderExample, CliError> {
    let feats = extract(utt)?;
    let frames = utt.total_frames();
    let mel = Tensor::matrix(
        frames,
        svskit::dsp::MEL_BANDS,
        feats.mel.flat()[..frames * svskit::dsp::MEL_BANDS].to_vec(),
    );
    let codes: Vec<u8> = utt
        .samples_for_frames()
        .iter()
        .map(|s| svskit::dsp::mu_law_encode(*s))
        .collect();
    debug_assert_eq!(codes.len(), frames_to_samples(frames));
    Ok(VocoderExample { codes, mel, pitch: PitchFrameTrack(utt.frame_pitch()) })
}

/// Train a WaveNet on random crops of the examples.
pub fn train_wavenet_model(
    examples: &[VocoderExample],
    spec: &TrainVocoderSpec,
    mut on_step: impl FnMut(u64, f64),
) -> Result<WaveNet, CliError> {
    if examples.is_empty() {
        return Err(CliError::Validation("no vocoder examples".into()));
    }
    let mut model = WaveNet::new(spec.model.clone(), spec.seed)?;
    let mut adam = AdamState::vocoder();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xc0de);
    for step in 1..=spec.steps {
        let ex = &examples[rng.gen_range(0..examples.len())];
        let crop = spec.crop.min(ex.codes.len());
        let start = rng.gen_range(0..=ex.codes.len() - crop);
        let loss = model.train_step(
            &ex.codes,
            &ex.mel,
            model.cfg.use_pitch.then_some(&ex.pitch),
            start..start + crop,
            &mut adam,
            spec.lr,
        )?;
        on_step(step, loss);
    }
    Ok(model)
}

pub fn train_wavenet_from_corpus(
    corpus: &Path,
    utterances: usize,
    spec: &TrainVocoderSpec,
    out: &Path,
) -> Result<WaveNet, CliError> {
    std::fs::create_dir_all(out)?;
    let examples: Vec<VocoderExample> = (0..utterances)
        .map(|i| vocoder_example(&load_utterance(corpus, i)?))
        .collect::<Result<_, _>>()?;
    let mut trace = LossTrace::new();
    let mut model = train_wavenet_model(&examples, spec, |step, loss| {
        trace.push((step, loss, spec.lr));
        if step % 50 == 0 {
            log::info!("wavenet step {step}: nll {loss:.4}");
        }
    })?;
    write_loss_csv(&out.join("loss.csv"), &trace)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(spec)?)?;
    model.save(&out.join("wavenet.svsk"))?;
    Ok(model)
}

/// CBHG training config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainCbhgSpec {
    #[serde(flatten)]
    pub model: CbhgConfig,
    pub seed: u64,
    pub steps: u64,
    pub lr: f64,
    /// Frames per training window.
    pub crop_frames: usize,
}

impl Default for TrainCbhgSpec {
    fn default() -> Self {
        TrainCbhgSpec { model: CbhgConfig::default(), seed: 1, steps: 300, lr: 3e-4, crop_frames: 160 }
    }
}

/// Train the mel→linear head on (mel, linear) pairs from the corpus.
pub fn train_cbhg_model(
    pairs: &[(Tensor, Tensor)],
    spec: &TrainCbhgSpec,
    mut on_step: impl FnMut(u64, f64),
) -> Result<CbhgModel, CliError> {
    if pairs.is_empty() {
        return Err(CliError::Validation("no cbhg pairs".into()));
    }
    let mut model = CbhgModel::new(spec.model.clone(), spec.seed).map_err(svskit::frontend::FrontendError::Neural)?;
    let mut adam = AdamState::frontend();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xcb46);
    for step in 1..=spec.steps {
        let (mel, linear) = &pairs[rng.gen_range(0..pairs.len())];
        let crop = spec.crop_frames.min(mel.rows());
        let start = rng.gen_range(0..=mel.rows() - crop);
        let mel_win = window_rows(mel, start, crop);
        let lin_win = window_rows(linear, start, crop);
        let loss = model.train_step(&mel_win, &lin_win, &mut adam, spec.lr)?;
        on_step(step, loss);
    }
    Ok(model)
}

/// Mel/linear tensor pair of an utterance, trimmed to the duration total.
pub fn cbhg_pair(utt: &Utterance) -> Result<(Tensor, Tensor), CliError> {
    let feats = extract(utt)?;
    let frames = utt.total_frames();
    Ok((
        Tensor::matrix(
            frames,
            svskit::dsp::MEL_BANDS,
            feats.mel.flat()[..frames * svskit::dsp::MEL_BANDS].to_vec(),
        ),
        Tensor::matrix(
            frames,
            svskit::dsp::LINEAR_BINS,
            feats.linear.flat()[..frames * svskit::dsp::LINEAR_BINS].to_vec(),
        ),
    ))
}

fn window_rows(t: &Tensor, start: usize, len: usize) -> Tensor {
    let cols = t.cols();
    Tensor::matrix(len, cols, t.data()[start * cols..(start + len) * cols].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_order_is_reproducible_and_cycles() {
        let a = data_order(4, 10, 9);
        let b = data_order(4, 10, 9);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        // cycling: step s and s+4 visit the same utterance
        for s in 0..6 {
            assert_eq!(a[s], a[s + 4]);
        }
        let c = data_order(4, 10, 10);
        assert_ne!(a, c, "different seed, different order");
    }

    #[test]
    fn loss_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_csv(&path, &vec![(1, 0.5, 1e-4), (2, 0.25, 2e-4)]).unwrap();
        let pts = read_loss_csv(&path).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0], (1.0, 0.5));
        assert_eq!(pts[1].1, 0.25);
    }

    #[test]
    fn empty_loss_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        std::fs::write(&path, "step,loss,lr\n").unwrap();
        assert!(read_loss_csv(&path).is_err());
    }
}
