//! Minimal RIFF/WAVE I/O: 16-bit signed PCM, mono, 16 kHz only.

use super::{DspError, Waveform, SAMPLE_RATE};
use std::io::{Read, Write};
use std::path::Path;

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().unwrap())
}

fn read_u16(buf: &[u8], at: usize) -> u16 {
    u16::from_le_bytes(buf[at..at + 2].try_into().unwrap())
}

/// Read a WAV file, rejecting anything but mono 16-bit PCM at 16 kHz.
pub fn read_wav(path: &Path) -> Result<Waveform, DspError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(DspError::WavFormat(format!(
            "{} is not a RIFF/WAVE file",
            path.display()
        )));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(&bytes, pos + 4) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(DspError::WavFormat("truncated chunk".into()));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(DspError::WavFormat("fmt chunk too small".into()));
                }
                format = Some((
                    read_u16(&bytes, pos + 8),
                    read_u16(&bytes, pos + 10),
                    read_u32(&bytes, pos + 12),
                    read_u16(&bytes, pos + 22),
                ));
            }
            b"data" => data = Some(&bytes[pos + 8..body_end]),
            _ => {}
        }
        // chunks are word-aligned
        pos = body_end + size % 2;
    }
    let (tag, channels, rate, bits) =
        format.ok_or_else(|| DspError::WavFormat("missing fmt chunk".into()))?;
    if tag != 1 {
        return Err(DspError::WavFormat(format!(
            "unsupported encoding tag {tag}: expected 1 (integer PCM)"
        )));
    }
    if channels != 1 {
        return Err(DspError::WavFormat(format!(
            "expected mono audio, got {channels} channels"
        )));
    }
    if bits != 16 {
        return Err(DspError::WavFormat(format!(
            "expected 16-bit samples, got {bits}"
        )));
    }
    if rate != SAMPLE_RATE {
        return Err(DspError::BadSampleRate { expected: SAMPLE_RATE, got: rate });
    }
    let data = data.ok_or_else(|| DspError::WavFormat("missing data chunk".into()))?;
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    Ok(Waveform::new(samples, SAMPLE_RATE))
}

/// Write a waveform as mono 16-bit PCM, clamping amplitudes into [-1, 1].
pub fn write_wav(path: &Path, w: &Waveform) -> Result<(), DspError> {
    if w.sample_rate != SAMPLE_RATE {
        return Err(DspError::BadSampleRate { expected: SAMPLE_RATE, got: w.sample_rate });
    }
    let data_len = (w.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for x in &w.samples {
        let v = (x.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
