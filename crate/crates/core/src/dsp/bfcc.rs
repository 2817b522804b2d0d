//! Bark-frequency cepstral coefficients.

use super::{BfccFeature, LinearSpectrogram, LOG_FLOOR};

/// Bark bands and cepstral coefficients kept.
pub const BFCC_COEFFS: usize = 18;

/// Traunmüller's Bark approximation.
fn hz_to_bark(hz: f64) -> f64 {
    26.81 * hz / (1960.0 + hz) - 0.53
}

fn bark_to_hz(bark: f64) -> f64 {
    1960.0 * (bark + 0.53) / (26.28 - bark)
}

/// 18 triangular filters uniform on the Bark axis over 0..8000 Hz.
fn bark_filterbank() -> Vec<Vec<f64>> {
    let top_hz = super::SAMPLE_RATE as f64 / 2.0;
    let (b_lo, b_hi) = (hz_to_bark(0.0), hz_to_bark(top_hz));
    let edges: Vec<f64> = (0..BFCC_COEFFS + 2)
        .map(|i| bark_to_hz(b_lo + (b_hi - b_lo) * i as f64 / (BFCC_COEFFS + 1) as f64))
        .collect();
    let freqs = super::bin_frequencies();
    (0..BFCC_COEFFS)
        .map(|j| {
            let (lo, center, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            freqs
                .iter()
                .map(|&f| {
                    let rising = (f - lo) / (center - lo);
                    let falling = (hi - f) / (hi - center);
                    rising.min(falling).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II of a vector.
fn dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64
                            / (2 * n) as f64)
                            .cos()
                    })
                    .sum::<f64>()
        })
        .collect()
}

/// Bark-band log energies decorrelated by a DCT.
pub fn bfcc_extract(spec: &LinearSpectrogram) -> BfccFeature {
    let bank = bark_filterbank();
    let mut out = BfccFeature::zeros(spec.frames());
    for t in 0..spec.frames() {
        let mags = spec.row(t);
        let log_energies: Vec<f64> = bank
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().zip(mags).map(|(w, m)| w * m * m).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();
        out.row_mut(t).copy_from_slice(&dct2(&log_energies));
    }
    out
}
