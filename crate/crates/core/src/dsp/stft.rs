//! Framing, forward/inverse STFT.

use super::{DspError, LinearSpectrogram, Waveform, FFT_SIZE, FRAME_LEN, HOP, LINEAR_BINS};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Periodic Hann window of length [`FRAME_LEN`].
pub fn hann_window() -> Vec<f64> {
    (0..FRAME_LEN)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / FRAME_LEN as f64).cos()))
        .collect()
}

/// Frames a signal of `n` samples yields; tail samples beyond the last full
/// frame are dropped.
pub fn frame_count(n: usize) -> usize {
    assert!(n >= FRAME_LEN);
    1 + (n - FRAME_LEN) / HOP
}

/// Slice the waveform into Hann-windowed frames.
pub fn frame_signal(w: &Waveform) -> Result<Vec<Vec<f64>>, DspError> {
    if w.samples.len() < FRAME_LEN {
        return Err(DspError::TooShort { len: w.samples.len(), min: FRAME_LEN });
    }
    let window = hann_window();
    let count = frame_count(w.samples.len());
    let mut frames = Vec::with_capacity(count);
    for t in 0..count {
        let start = t * HOP;
        let frame: Vec<f64> = w.samples[start..start + FRAME_LEN]
            .iter()
            .zip(&window)
            .map(|(x, w)| x * w)
            .collect();
        frames.push(frame);
    }
    Ok(frames)
}

fn fft_frame(frame: &[f64], planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    assert_eq!(frame.len(), FRAME_LEN);
    let fft = planner.plan_fft_forward(FFT_SIZE);
    let mut buf: Vec<Complex64> = frame
        .iter()
        .map(|x| Complex64::new(*x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(FFT_SIZE)
        .collect();
    fft.process(&mut buf);
    buf.truncate(LINEAR_BINS);
    buf
}

/// Magnitude spectrogram: each frame zero-padded to 1024 points, |DFT| of
/// bins 0..=512.
pub fn stft_magnitude(frames: &[Vec<f64>]) -> LinearSpectrogram {
    let mut planner = FftPlanner::new();
    let mut out = LinearSpectrogram::zeros(frames.len());
    for (t, frame) in frames.iter().enumerate() {
        let spec = fft_frame(frame, &mut planner);
        for (dst, c) in out.row_mut(t).iter_mut().zip(&spec) {
            *dst = c.norm();
        }
    }
    out
}

/// Complex STFT, for phase-aware callers (Griffin-Lim).
pub fn stft_complex(frames: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let mut planner = FftPlanner::new();
    frames.iter().map(|f| fft_frame(f, &mut planner)).collect()
}

/// Inverse STFT by weighted overlap-add with the analysis Hann window.
///
/// Output length is `(frames - 1) * HOP + FRAME_LEN`.
pub fn istft(spectra: &[Vec<Complex64>]) -> Vec<f64> {
    if spectra.is_empty() {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(FFT_SIZE);
    let window = hann_window();
    let out_len = (spectra.len() - 1) * HOP + FRAME_LEN;
    let mut acc = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];

    let mut buf = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
    for (t, spec) in spectra.iter().enumerate() {
        assert_eq!(spec.len(), LINEAR_BINS);
        // rebuild the full Hermitian spectrum
        buf[..LINEAR_BINS].copy_from_slice(spec);
        for k in 1..FFT_SIZE / 2 {
            buf[FFT_SIZE - k] = spec[k].conj();
        }
        ifft.process(&mut buf);
        let start = t * HOP;
        for n in 0..FRAME_LEN {
            // rustfft's inverse is unnormalized
            let sample = buf[n].re / FFT_SIZE as f64;
            acc[start + n] += window[n] * sample;
            norm[start + n] += window[n] * window[n];
        }
    }
    for (a, n) in acc.iter_mut().zip(&norm) {
        if *n > 1e-12 {
            *a /= *n;
        }
    }
    acc
}
