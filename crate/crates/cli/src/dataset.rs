//! Corpus loading: utterance streams, feature targets, training batches.

use crate::corpus::{utterance_paths, DurationsFile};
use crate::CliError;
use rayon::prelude::*;
use std::path::Path;
use svskit::dsp::{
    bfcc_extract, estimate_f0, frame_signal, mel_spectrogram, read_wav, stft_magnitude,
    write_features, BfccFeature, FeatureKind, LinearSpectrogram, MelSpectrogram, Waveform,
};
use svskit::frontend::{expand_ids, pitch_to_id, Batch, OutputHead};
use svskit::neural::Tensor;
use svskit::score::{score_to_streams, Score};

/// One loaded utterance: ids, ground-truth durations and the raw audio.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub index: usize,
    pub score: Score,
    pub phones: Vec<usize>,
    pub pitch_ids: Vec<usize>,
    pub durations: Vec<usize>,
    pub audio: Waveform,
}

impl Utterance {
    pub fn total_frames(&self) -> usize {
        self.durations.iter().sum()
    }

    /// Frame-rate pitch ids under the ground-truth durations.
    pub fn frame_pitch(&self) -> Vec<usize> {
        expand_ids(&self.pitch_ids, &self.durations)
    }

    /// Audio trimmed to exactly the conditioned sample count (the corpus
    /// pads generation by four hops so spectrogram frames line up).
    pub fn samples_for_frames(&self) -> &[f64] {
        &self.audio.samples[..self.total_frames() * svskit::dsp::HOP]
    }
}

pub fn load_utterance(dir: &Path, index: usize) -> Result<Utterance, CliError> {
    let (wav_path, score_path, dur_path) = utterance_paths(dir, index);
    let score: Score = serde_json::from_str(&std::fs::read_to_string(&score_path)?)?;
    let durs: DurationsFile = serde_json::from_str(&std::fs::read_to_string(&dur_path)?)?;
    let audio = read_wav(&wav_path)?;
    let streams = score_to_streams(&score)?;
    if streams.durations.0 != durs.durations {
        return Err(CliError::Validation(format!(
            "utterance {index}: stored durations disagree with the score"
        )));
    }
    Ok(Utterance {
        index,
        score,
        phones: streams.phones.0.iter().map(|p| p.id()).collect(),
        pitch_ids: streams.pitch.0.iter().map(|p| pitch_to_id(*p)).collect(),
        durations: durs.durations,
        audio,
    })
}

/// Count utterances present under a corpus directory.
pub fn corpus_size(dir: &Path) -> Result<usize, CliError> {
    let mut n = 0;
    while utterance_paths(dir, n).0.exists() {
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Validation(format!(
            "no utterances found under {}",
            dir.display()
        )));
    }
    Ok(n)
}

/// Spectral features of an utterance's audio.
pub struct Features {
    pub linear: LinearSpectrogram,
    pub mel: MelSpectrogram,
    pub bfcc: BfccFeature,
}

pub fn extract(utt: &Utterance) -> Result<Features, CliError> {
    let frames = frame_signal(&utt.audio)?;
    let linear = stft_magnitude(&frames);
    let mel = mel_spectrogram(&linear);
    let bfcc = bfcc_extract(&linear);
    Ok(Features { linear, mel, bfcc })
}

/// Training target for the given head, `[total_frames, head_dim]`.
pub fn build_target(utt: &Utterance, features: &Features, head: OutputHead) -> Tensor {
    let frames = utt.total_frames();
    match head {
        OutputHead::Mel => {
            Tensor::matrix(frames, MelSpectrogram::COLS, features.mel.flat()[..frames * MelSpectrogram::COLS].to_vec())
        }
        OutputHead::Linear => Tensor::matrix(
            frames,
            LinearSpectrogram::COLS,
            features.linear.flat()[..frames * LinearSpectrogram::COLS].to_vec(),
        ),
        OutputHead::Bfcc => {
            let frame_pitch = utt.frame_pitch();
            let dim = BfccFeature::COLS + 1;
            let mut data = vec![0.0; frames * dim];
            for t in 0..frames {
                data[t * dim..t * dim + BfccFeature::COLS].copy_from_slice(features.bfcc.row(t));
                data[t * dim + BfccFeature::COLS] =
                    frame_pitch[t] as f64 / (svskit::frontend::PITCH_VOCAB - 1) as f64;
            }
            Tensor::matrix(frames, dim, data)
        }
    }
}

pub fn build_batch(utt: &Utterance, features: &Features, head: OutputHead) -> Batch {
    Batch {
        phones: utt.phones.clone(),
        pitch: utt.pitch_ids.clone(),
        durations: utt.durations.clone(),
        target: build_target(utt, features, head),
        speaker: 0,
    }
}

/// Dump linear/mel/bfcc/f0 feature files for every utterance.
pub fn extract_features_to_disk(dir: &Path) -> Result<usize, CliError> {
    let n = corpus_size(dir)?;
    std::fs::create_dir_all(dir.join("features"))?;
    (0..n).into_par_iter().try_for_each(|i| -> Result<(), CliError> {
        let utt = load_utterance(dir, i)?;
        let feats = extract(&utt)?;
        let f0 = estimate_f0(&utt.audio);
        let base = dir.join("features");
        write_features(
            &base.join(format!("{i:04}.linear.f32")),
            feats.linear.flat(),
            feats.linear.frames(),
            LinearSpectrogram::COLS,
            FeatureKind::Linear,
        )?;
        write_features(
            &base.join(format!("{i:04}.mel.f32")),
            feats.mel.flat(),
            feats.mel.frames(),
            MelSpectrogram::COLS,
            FeatureKind::Mel,
        )?;
        write_features(
            &base.join(format!("{i:04}.bfcc.f32")),
            feats.bfcc.flat(),
            feats.bfcc.frames(),
            BfccFeature::COLS,
            FeatureKind::Bfcc,
        )?;
        write_features(&base.join(format!("{i:04}.f0.f32")), &f0.0, f0.len(), 1, FeatureKind::F0)?;
        Ok(())
    })?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, CorpusSpec};

    fn tiny_corpus() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            utterances: 1,
            seed: 3,
            min_seconds: 1.0,
            max_seconds: 2.0,
            ..Default::default()
        };
        generate_synthetic_corpus(&spec, dir.path()).unwrap();
        dir
    }

    #[test]
    fn batch_aligns_with_durations() {
        let dir = tiny_corpus();
        let utt = load_utterance(dir.path(), 0).unwrap();
        let feats = extract(&utt).unwrap();
        for head in [OutputHead::Mel, OutputHead::Linear, OutputHead::Bfcc] {
            let batch = build_batch(&utt, &feats, head);
            let cfg = svskit::frontend::FrontEndConfig { output_head: head, ..Default::default() };
            batch.validate(&cfg).unwrap();
        }
    }

    #[test]
    fn feature_dumps_round_trip() {
        let dir = tiny_corpus();
        let n = extract_features_to_disk(dir.path()).unwrap();
        assert_eq!(n, 1);
        let (sidecar, data) =
            svskit::dsp::read_features(&dir.path().join("features/0000.mel.f32")).unwrap();
        assert_eq!(sidecar.cols, 80);
        assert_eq!(data.len(), sidecar.rows * sidecar.cols);
        assert_eq!(sidecar.kind, FeatureKind::Mel);
    }

    #[test]
    fn corpus_size_counts() {
        let dir = tiny_corpus();
        assert_eq!(corpus_size(dir.path()).unwrap(), 1);
        assert!(corpus_size(Path::new("/nonexistent")).is_err());
    }
}
