//! Griffin-Lim phase reconstruction with momentum acceleration.

use crate::dsp::{
    frame_signal, istft, stft_complex, LinearSpectrogram, Waveform, FRAME_LEN, HOP, SAMPLE_RATE,
};
use rustfft::num_complex::Complex64;

/// Extrapolation factor for the accelerated iteration; 0 recovers the
/// plain alternating projection.
pub const GRIFFIN_LIM_MOMENTUM: f64 = 0.99;

/// Iterative phase estimation from a magnitude spectrogram, starting at
/// zero phase, with momentum-accelerated updates. Output length is
/// `(frames - 1) * HOP + FRAME_LEN`.
pub fn griffin_lim(mag: &LinearSpectrogram, iters: usize) -> Waveform {
    griffin_lim_with_momentum(mag, iters, GRIFFIN_LIM_MOMENTUM)
}

pub fn griffin_lim_with_momentum(
    mag: &LinearSpectrogram,
    iters: usize,
    momentum: f64,
) -> Waveform {
    assert!(iters >= 1, "at least one iteration");
    assert!((0.0..1.0).contains(&momentum) || momentum == 0.0);
    let frames = mag.frames();
    let beta = momentum / (1.0 + momentum);

    // unit phases, starting at zero phase
    let mut angles: Vec<Vec<Complex64>> =
        vec![vec![Complex64::new(1.0, 0.0); crate::dsp::LINEAR_BINS]; frames];
    let mut prev: Option<Vec<Vec<Complex64>>> = None;

    for _ in 0..iters {
        let spectra: Vec<Vec<Complex64>> = (0..frames)
            .map(|t| {
                angles[t]
                    .iter()
                    .zip(mag.row(t))
                    .map(|(a, m)| a * m)
                    .collect()
            })
            .collect();
        let samples = istft(&spectra);
        let w = Waveform::new(samples, SAMPLE_RATE);
        let reframed = frame_signal(&w).expect("istft output always spans one frame");
        let rebuilt = stft_complex(&reframed);

        for t in 0..frames {
            for j in 0..crate::dsp::LINEAR_BINS {
                let mut c = rebuilt[t][j];
                if let Some(p) = &prev {
                    c -= beta * p[t][j];
                }
                let norm = c.norm();
                angles[t][j] = if norm > 1e-12 { c / norm } else { Complex64::new(1.0, 0.0) };
            }
        }
        prev = Some(rebuilt);
    }
    let spectra: Vec<Vec<Complex64>> = (0..frames)
        .map(|t| {
            angles[t]
                .iter()
                .zip(mag.row(t))
                .map(|(a, m)| a * m)
                .collect()
        })
        .collect();
    let samples = istft(&spectra);
    debug_assert_eq!(samples.len(), (frames - 1) * HOP + FRAME_LEN);
    Waveform::new(samples, SAMPLE_RATE)
}

/// Relative Frobenius distance between `|STFT(w)|` and a target magnitude.
pub fn spectral_convergence(w: &Waveform, mag: &LinearSpectrogram) -> f64 {
    let frames = frame_signal(w).expect("waveform long enough to frame");
    let est = crate::dsp::stft_magnitude(&frames);
    let t_common = est.frames().min(mag.frames());
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..t_common {
        for (a, b) in est.row(t).iter().zip(mag.row(t)) {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    (num / den.max(1e-300)).sqrt()
}
