//! Musical score parsing and the model's three input streams.
//!
//! A [`Score`] is tempo plus an ordered list of notes (syllable, semitone
//! pitch, beats). It lowers to three parallel sequences: phones, per-phone
//! pitch and per-phone frame durations (frame = 10 ms hop).

pub mod pinyin;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frame hop in seconds; every duration in the pipeline counts these.
pub const FRAME_SECONDS: f64 = 0.010;

/// Semitone range a score note may use (MIDI numbering, A440 = 69).
pub const PITCH_MIN: i32 = 24;
pub const PITCH_MAX: i32 = 96;

/// Reserved pitch index carried by rest phones.
pub const REST_PITCH: i32 = 0;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("score JSON parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty notes")]
    EmptyNotes,
    #[error("tempo_bpm out of range: {0} (expected [20, 300])")]
    TempoOutOfRange(f64),
    #[error("note {index}: pitch out of range: {pitch} (expected [{PITCH_MIN}, {PITCH_MAX}])")]
    PitchOutOfRange { index: usize, pitch: i32 },
    #[error("note {index}: beats must be > 0, got {beats}")]
    BadBeats { index: usize, beats: f64 },
    #[error("note {index}: rest notes must not carry a pitch")]
    PitchOnRest { index: usize },
    #[error("note {index}: non-rest note is missing a pitch")]
    MissingPitch { index: usize },
    #[error("unknown syllable {syllable:?}; nearest legal syllables: {}", .nearest.join(", "))]
    UnknownSyllable { syllable: String, nearest: Vec<String> },
    #[error("frequency must be > 0, got {0}")]
    NonPositiveFrequency(f64),
}

/// One note: a sung syllable (or the `-` rest marker) with pitch and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoteEvent {
    pub syllable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<i32>,
    pub beats: f64,
}

impl NoteEvent {
    pub fn is_rest(&self) -> bool {
        self.syllable == pinyin::REST_SYMBOL
    }
}

/// A parsed, validated score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Score {
    pub tempo_bpm: f64,
    pub notes: Vec<NoteEvent>,
}

/// A phone: index into the closed inventory (initials, finals, rest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phone(u8);

impl Phone {
    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn symbol(self) -> &'static str {
        INVENTORY[self.0 as usize]
    }

    pub fn from_symbol(symbol: &str) -> Option<Phone> {
        INVENTORY
            .iter()
            .position(|s| *s == symbol)
            .map(|i| Phone(i as u8))
    }

    pub fn rest() -> Phone {
        Phone(0)
    }

    pub fn is_rest(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Display for Phone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

/// The closed phone inventory: rest, then initials, then finals.
pub static INVENTORY: std::sync::LazyLock<Vec<&'static str>> = std::sync::LazyLock::new(|| {
    let mut v = vec![pinyin::REST_SYMBOL];
    v.extend(pinyin::INITIALS);
    v.extend(pinyin::FINALS);
    v
});

/// Number of phone symbols, i.e. the model's phone vocabulary size.
pub fn inventory_size() -> usize {
    INVENTORY.len()
}

/// Parallel phone stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSequence(pub Vec<Phone>);

/// Per-phone semitone indices; rest phones carry [`REST_PITCH`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitchSeq(pub Vec<i32>);

/// Per-phone frame counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationSeq(pub Vec<usize>);

impl DurationSeq {
    pub fn total_frames(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Parse and validate a score from JSON text.
pub fn parse_score(raw: &str) -> Result<Score, ScoreError> {
    let score: Score = serde_json::from_str(raw)?;
    validate_score(&score)?;
    Ok(score)
}

fn validate_score(score: &Score) -> Result<(), ScoreError> {
    if score.notes.is_empty() {
        return Err(ScoreError::EmptyNotes);
    }
    if !(20.0..=300.0).contains(&score.tempo_bpm) || !score.tempo_bpm.is_finite() {
        return Err(ScoreError::TempoOutOfRange(score.tempo_bpm));
    }
    for (index, note) in score.notes.iter().enumerate() {
        if !(note.beats > 0.0) || !note.beats.is_finite() {
            return Err(ScoreError::BadBeats { index, beats: note.beats });
        }
        match (note.is_rest(), note.pitch) {
            (true, Some(_)) => return Err(ScoreError::PitchOnRest { index }),
            (false, None) => return Err(ScoreError::MissingPitch { index }),
            (false, Some(p)) if !(PITCH_MIN..=PITCH_MAX).contains(&p) => {
                return Err(ScoreError::PitchOutOfRange { index, pitch: p })
            }
            _ => {}
        }
        if !note.is_rest() {
            split_syllable(&note.syllable)?;
        }
    }
    Ok(())
}

/// Split a pinyin syllable into its phones: `[initial, final]`, `[final]`,
/// or `[rest]` for the rest marker.
pub fn split_syllable(syllable: &str) -> Result<Vec<Phone>, ScoreError> {
    if syllable == pinyin::REST_SYMBOL {
        return Ok(vec![Phone::rest()]);
    }
    match pinyin::segment(syllable) {
        Some(("", fin)) => Ok(vec![Phone::from_symbol(fin).unwrap()]),
        Some((ini, fin)) => Ok(vec![
            Phone::from_symbol(ini).unwrap(),
            Phone::from_symbol(fin).unwrap(),
        ]),
        None => Err(ScoreError::UnknownSyllable {
            syllable: syllable.to_string(),
            nearest: pinyin::nearest_syllables(syllable, 3),
        }),
    }
}

/// Quantize a frequency to the nearest semitone, A440 = 69.
pub fn quantize_pitch(freq_hz: f64) -> Result<i32, ScoreError> {
    if !(freq_hz > 0.0) {
        return Err(ScoreError::NonPositiveFrequency(freq_hz));
    }
    Ok((69.0 + 12.0 * (freq_hz / 440.0).log2()).round() as i32)
}

/// Frequency of a semitone index, inverse of [`quantize_pitch`]'s grid.
pub fn semitone_to_hz(semitone: i32) -> f64 {
    440.0 * ((semitone - 69) as f64 / 12.0).exp2()
}

/// Frames a note occupies: `round(beats * (60/tempo) / 0.010)`, at least 1.
pub fn note_beats_to_frames(beats: f64, tempo_bpm: f64) -> usize {
    debug_assert!(beats > 0.0 && tempo_bpm > 0.0);
    let frames = (beats * (60.0 / tempo_bpm) / FRAME_SECONDS).round() as usize;
    frames.max(1)
}

/// Distribute a note's frames over its 1 or 2 phones.
///
/// A lone final takes everything. An `[initial, final]` pair gives the
/// initial `min(ceil(0.2 * frames), 8)` frames (consonants stay short no
/// matter how long the note is held) and the final the remainder. When the
/// note is shorter than its phone count the final takes all frames.
pub fn distribute_note_frames(phones: &[Phone], note_frames: usize) -> Vec<usize> {
    assert!(
        !phones.is_empty() && phones.len() <= 2,
        "a syllable has 1 or 2 phones"
    );
    assert!(note_frames >= 1);
    if phones.len() == 1 {
        return vec![note_frames];
    }
    if note_frames < phones.len() {
        log::warn!(
            "note too short ({note_frames} frames) for {} phones; initial gets no frames",
            phones.len()
        );
        return vec![0, note_frames];
    }
    let initial = (note_frames.div_ceil(5)).min(8);
    vec![initial, note_frames - initial]
}

/// The three aligned streams a score lowers to, plus per-note bookkeeping.
#[derive(Debug, Clone)]
pub struct ScoreStreams {
    pub phones: PhoneSequence,
    pub pitch: PitchSeq,
    pub durations: DurationSeq,
    /// Frame count of each note, in order.
    pub note_frames: Vec<usize>,
    /// Phone index range `[start, end)` of each note.
    pub note_spans: Vec<(usize, usize)>,
}

/// Lower a validated score to phone/pitch/duration streams.
pub fn score_to_streams(score: &Score) -> Result<ScoreStreams, ScoreError> {
    validate_score(score)?;
    let mut phones = Vec::new();
    let mut pitch = Vec::new();
    let mut durations = Vec::new();
    let mut note_frames = Vec::new();
    let mut note_spans = Vec::new();
    for note in &score.notes {
        let note_phones = split_syllable(&note.syllable)?;
        let frames = note_beats_to_frames(note.beats, score.tempo_bpm);
        let split = distribute_note_frames(&note_phones, frames);
        let start = phones.len();
        let p = note.pitch.unwrap_or(REST_PITCH);
        for (phone, frames) in note_phones.iter().zip(&split) {
            phones.push(*phone);
            pitch.push(p);
            durations.push(*frames);
        }
        note_frames.push(frames);
        note_spans.push((start, phones.len()));
    }
    Ok(ScoreStreams {
        phones: PhoneSequence(phones),
        pitch: PitchSeq(pitch),
        durations: DurationSeq(durations),
        note_frames,
        note_spans,
    })
}
