//! Synthetic singing corpus: random short scores rendered as harmonic
//! tones with vibrato that follow the score pitch, plus ground-truth
//! per-phone durations straight from the generator.

use crate::CliError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use svskit::dsp::{estimate_f0, write_wav, Waveform, HOP, SAMPLE_RATE};
use svskit::score::{
    self, note_beats_to_frames, pinyin, score_to_streams, semitone_to_hz, NoteEvent, Score,
};

/// Singer timbre of the synthetic voice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timbre {
    /// Harmonic `h` enters at amplitude `h^-rolloff`.
    pub harmonic_rolloff: f64,
    pub vibrato_rate_hz: f64,
    pub vibrato_depth_semitones: f64,
    /// Formant-like spectral bumps: (center Hz, width Hz, gain).
    pub band_gains: Vec<(f64, f64, f64)>,
}

impl Default for Timbre {
    fn default() -> Self {
        Timbre {
            harmonic_rolloff: 1.0,
            vibrato_rate_hz: 5.5,
            vibrato_depth_semitones: 0.2,
            band_gains: vec![(700.0, 300.0, 1.5), (2400.0, 500.0, 0.8)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub utterances: usize,
    pub seed: u64,
    #[serde(default)]
    pub timbre: Timbre,
    /// Utterance length bounds in seconds.
    pub min_seconds: f64,
    pub max_seconds: f64,
    /// Semitone range of the melody walk.
    pub pitch_lo: i32,
    pub pitch_hi: i32,
    pub tempo_lo: f64,
    pub tempo_hi: f64,
    pub rest_probability: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            utterances: 8,
            seed: 7,
            timbre: Timbre::default(),
            min_seconds: 3.0,
            max_seconds: 8.0,
            pitch_lo: 55,
            pitch_hi: 79,
            tempo_lo: 70.0,
            tempo_hi: 140.0,
            rest_probability: 0.08,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.utterances == 0 {
            return Err(CliError::Validation("utterances must be >= 1".into()));
        }
        if !(self.min_seconds >= 0.5 && self.max_seconds <= 10.0 && self.min_seconds < self.max_seconds)
        {
            return Err(CliError::Validation("bad utterance length bounds".into()));
        }
        if !(score::PITCH_MIN..=score::PITCH_MAX).contains(&self.pitch_lo)
            || !(score::PITCH_MIN..=score::PITCH_MAX).contains(&self.pitch_hi)
            || self.pitch_lo >= self.pitch_hi
        {
            return Err(CliError::Validation("bad pitch range".into()));
        }
        Ok(())
    }
}

fn utterance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64),
    )
}

/// Random short score: a melodic random walk over legal syllables.
fn random_score(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Score {
    let syllables: Vec<String> = pinyin::legal_syllables().collect();
    let tempo = rng.gen_range(spec.tempo_lo..spec.tempo_hi).round();
    let min_frames = (spec.min_seconds * 100.0).round() as usize;
    let max_frames = (spec.max_seconds * 100.0).round() as usize - 4;
    let target = rng.gen_range(min_frames + 40..max_frames - 40);

    let mut notes = Vec::new();
    let mut total = 0usize;
    let mut pitch = rng.gen_range(spec.pitch_lo..=spec.pitch_hi);
    let beat_choices = [0.5, 1.0, 1.5, 2.0];
    while total < target {
        let beats = beat_choices[rng.gen_range(0..beat_choices.len())];
        let frames = note_beats_to_frames(beats, tempo);
        if total + frames > max_frames {
            if total >= min_frames {
                break;
            }
            continue;
        }
        if rng.gen_bool(spec.rest_probability) && !notes.is_empty() {
            notes.push(NoteEvent { syllable: pinyin::REST_SYMBOL.into(), pitch: None, beats });
        } else {
            let step: i32 = rng.gen_range(-4..=4);
            pitch = (pitch + step).clamp(spec.pitch_lo, spec.pitch_hi);
            let syllable = syllables[rng.gen_range(0..syllables.len())].clone();
            notes.push(NoteEvent { syllable, pitch: Some(pitch), beats });
        }
        total += frames;
    }
    Score { tempo_bpm: tempo, notes }
}

/// Render the score as a harmonic tone following its pitch, one note at a
/// time, each note occupying exactly `frames * HOP` samples. A 4-hop pad of
/// silence keeps the spectrogram frame count equal to the duration total.
fn render_score(score: &Score, timbre: &Timbre, rng: &mut ChaCha8Rng) -> Result<Waveform, CliError> {
    let streams = score_to_streams(score)?;
    let fs = SAMPLE_RATE as f64;
    let mut samples = Vec::new();
    for (note, &frames) in score.notes.iter().zip(&streams.note_frames) {
        let n = frames * HOP;
        match note.pitch {
            None => samples.extend(std::iter::repeat(0.0).take(n)),
            Some(p) => {
                let f0 = semitone_to_hz(p);
                let harmonics = ((0.475 * fs / f0).floor() as usize).clamp(1, 24);
                let amps: Vec<f64> = (1..=harmonics)
                    .map(|h| {
                        let freq = h as f64 * f0;
                        let mut gain = (h as f64).powf(-timbre.harmonic_rolloff);
                        for (c, w, g) in &timbre.band_gains {
                            let d = (freq - c) / w;
                            gain *= 1.0 + g * (-d * d).exp();
                        }
                        gain
                    })
                    .collect();
                let norm = 0.5 / amps.iter().sum::<f64>().max(1e-9);
                let mut phases: Vec<f64> = (0..harmonics)
                    .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
                    .collect();
                let ramp = (0.005 * fs) as usize;
                for i in 0..n {
                    let t = i as f64 / fs;
                    let vib = (timbre.vibrato_depth_semitones / 12.0
                        * (2.0 * std::f64::consts::PI * timbre.vibrato_rate_hz * t).sin())
                    .exp2();
                    let f_inst = f0 * vib;
                    let mut x = 0.0;
                    for (h, phase) in phases.iter_mut().enumerate() {
                        x += amps[h] * phase.sin();
                        *phase += 2.0 * std::f64::consts::PI * (h + 1) as f64 * f_inst / fs;
                    }
                    let env = (i.min(n - 1 - i) as f64 / ramp as f64).min(1.0);
                    samples.push(norm * env * x);
                }
            }
        }
    }
    // pad so frame_count(samples) == total duration frames
    samples.extend(std::iter::repeat(0.0).take(4 * HOP));
    Ok(Waveform::new(samples, SAMPLE_RATE))
}

/// Per-utterance ground-truth durations sidecar.
#[derive(Debug, Serialize, Deserialize)]
pub struct DurationsFile {
    pub durations: Vec<usize>,
}

pub fn utterance_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("wav/{index:04}.wav")),
        dir.join(format!("score/{index:04}.json")),
        dir.join(format!("dur/{index:04}.json")),
    )
}

/// Generate `spec.utterances` utterances under `dir`; fully reproducible
/// for a fixed seed, independent of worker scheduling.
pub fn generate_synthetic_corpus(spec: &CorpusSpec, dir: &Path) -> Result<(), CliError> {
    spec.validate()?;
    for sub in ["wav", "score", "dur", "features"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    std::fs::write(dir.join("corpus.json"), serde_json::to_string_pretty(spec)?)?;
    (0..spec.utterances)
        .into_par_iter()
        .try_for_each(|i| -> Result<(), CliError> {
            let mut rng = utterance_rng(spec.seed, i);
            let score = random_score(spec, &mut rng);
            let wave = render_score(&score, &spec.timbre, &mut rng)?;
            let streams = score_to_streams(&score)?;
            let (wav_path, score_path, dur_path) = utterance_paths(dir, i);
            write_wav(&wav_path, &wave)?;
            std::fs::write(&score_path, serde_json::to_string_pretty(&score)?)?;
            std::fs::write(
                &dur_path,
                serde_json::to_string_pretty(&DurationsFile { durations: streams.durations.0 })?,
            )?;
            Ok(())
        })?;
    Ok(())
}

/// Check that every rendered note's dominant F0 sits within half a semitone
/// of its score pitch; returns the worst absolute error in semitones.
pub fn verify_corpus_pitch(dir: &Path, index: usize) -> Result<f64, CliError> {
    let (wav_path, score_path, _) = utterance_paths(dir, index);
    let wave = svskit::dsp::read_wav(&wav_path)?;
    let score: Score = serde_json::from_str(&std::fs::read_to_string(&score_path)?)?;
    let streams = score_to_streams(&score)?;
    let track = estimate_f0(&wave);
    let mut worst: f64 = 0.0;
    let mut frame = 0usize;
    for (note, &frames) in score.notes.iter().zip(&streams.note_frames) {
        if let Some(p) = note.pitch {
            // median voiced estimate across the note
            let mut voiced: Vec<f64> = track.0[frame..(frame + frames).min(track.len())]
                .iter()
                .copied()
                .filter(|f| *f > 0.0)
                .collect();
            if voiced.is_empty() {
                return Err(CliError::Validation(format!(
                    "utterance {index}: note at frame {frame} produced no voiced frames"
                )));
            }
            voiced.sort_by(f64::total_cmp);
            let dominant = voiced[voiced.len() / 2];
            let err = (12.0 * (dominant / semitone_to_hz(p)).log2()).abs();
            worst = worst.max(err);
        }
        frame += frames;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> CorpusSpec {
        CorpusSpec { utterances: 2, seed: 7, min_seconds: 1.0, max_seconds: 2.5, ..Default::default() }
    }

    #[test]
    fn generation_is_bit_identical_per_seed() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate_synthetic_corpus(&tiny_spec(), d1.path()).unwrap();
        generate_synthetic_corpus(&tiny_spec(), d2.path()).unwrap();
        for i in 0..2 {
            let (w1, s1, du1) = utterance_paths(d1.path(), i);
            let (w2, s2, du2) = utterance_paths(d2.path(), i);
            assert_eq!(std::fs::read(w1).unwrap(), std::fs::read(w2).unwrap(), "wav {i}");
            assert_eq!(std::fs::read(s1).unwrap(), std::fs::read(s2).unwrap());
            assert_eq!(std::fs::read(du1).unwrap(), std::fs::read(du2).unwrap());
        }
    }

    #[test]
    fn rendered_notes_track_score_pitch() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_corpus(&tiny_spec(), dir.path()).unwrap();
        for i in 0..2 {
            let worst = verify_corpus_pitch(dir.path(), i).unwrap();
            assert!(worst <= 0.5, "utterance {i}: worst error {worst} semitones");
        }
    }

    #[test]
    fn utterance_lengths_in_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec { utterances: 3, ..Default::default() };
        generate_synthetic_corpus(&spec, dir.path()).unwrap();
        for i in 0..3 {
            let (wav, _, _) = utterance_paths(dir.path(), i);
            let w = svskit::dsp::read_wav(&wav).unwrap();
            let sec = w.duration_seconds();
            assert!((3.0..=8.0).contains(&sec), "utterance {i}: {sec} s");
        }
    }

    #[test]
    fn audio_frames_match_duration_total() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_corpus(&tiny_spec(), dir.path()).unwrap();
        let (wav, _, dur) = utterance_paths(dir.path(), 0);
        let w = svskit::dsp::read_wav(&wav).unwrap();
        let d: DurationsFile = serde_json::from_str(&std::fs::read_to_string(dur).unwrap()).unwrap();
        let total: usize = d.durations.iter().sum();
        assert_eq!(svskit::dsp::frame_count(w.len()), total);
    }
}
