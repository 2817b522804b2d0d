//! Mel filterbank, normalized mel features, and the inverse-mel projection.

use super::{
    LinearSpectrogram, MelSpectrogram, LINEAR_BINS, LOG_CEIL, LOG_FLOOR, MEL_BANDS, MEL_NORM_HI,
    MEL_NORM_LO, SAMPLE_RATE,
};

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequency in Hz of every FFT bin.
pub fn bin_frequencies() -> Vec<f64> {
    (0..LINEAR_BINS)
        .map(|i| i as f64 * SAMPLE_RATE as f64 / super::FFT_SIZE as f64)
        .collect()
}

/// 80 triangular filters uniform on the mel axis over 0..8000 Hz, as a
/// row-major `[MEL_BANDS][LINEAR_BINS]` matrix.
pub fn mel_filterbank() -> Vec<Vec<f64>> {
    let top_hz = SAMPLE_RATE as f64 / 2.0;
    let edges: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(hz_to_mel(top_hz) * i as f64 / (MEL_BANDS + 1) as f64))
        .collect();
    let freqs = bin_frequencies();
    (0..MEL_BANDS)
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

fn normalize_log(e: f64) -> f64 {
    let ln = e.max(LOG_FLOOR).ln();
    let lo = LOG_FLOOR.ln();
    let hi = LOG_CEIL.ln();
    let v = MEL_NORM_LO + (MEL_NORM_HI - MEL_NORM_LO) * (ln - lo) / (hi - lo);
    v.clamp(MEL_NORM_LO, MEL_NORM_HI)
}

/// Invert [`normalize_log`] back to a band energy.
pub fn mel_denormalize(v: f64) -> f64 {
    let lo = LOG_FLOOR.ln();
    let hi = LOG_CEIL.ln();
    let ln = lo + (v.clamp(MEL_NORM_LO, MEL_NORM_HI) - MEL_NORM_LO) / (MEL_NORM_HI - MEL_NORM_LO)
        * (hi - lo);
    ln.exp()
}

/// Mel features: filterbank energies, log with floor, affine map into [-4, 4].
pub fn mel_spectrogram(spec: &LinearSpectrogram) -> MelSpectrogram {
    let bank = mel_filterbank();
    let mut out = MelSpectrogram::zeros(spec.frames());
    for t in 0..spec.frames() {
        let mags = spec.row(t);
        let row = out.row_mut(t);
        for (j, filter) in bank.iter().enumerate() {
            let e: f64 = filter.iter().zip(mags).map(|(w, m)| w * m).sum();
            row[j] = normalize_log(e);
        }
    }
    out
}

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky.
fn cholesky_solve(a: &[Vec<f64>], b: &mut Vec<Vec<f64>>) {
    let n = a.len();
    // factor A = L L^T
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][j] = s.max(1e-12).sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // forward then back substitution per right-hand side
    for rhs in b.iter_mut() {
        for i in 0..n {
            let mut s = rhs[i];
            for k in 0..i {
                s -= l[i][k] * rhs[k];
            }
            rhs[i] = s / l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..n {
                s -= l[k][i] * rhs[k];
            }
            rhs[i] = s / l[i][i];
        }
    }
}

/// Pseudo-inverse of the mel filterbank: `M^T (M M^T)^{-1}`, shape
/// `[LINEAR_BINS][MEL_BANDS]`.
fn mel_pseudo_inverse() -> Vec<Vec<f64>> {
    let bank = mel_filterbank();
    let n = MEL_BANDS;
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let g: f64 = bank[i].iter().zip(&bank[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    // columns of (M M^T)^{-1} M, i.e. solve per filterbank row
    let mut cols: Vec<Vec<f64>> = (0..LINEAR_BINS)
        .map(|i| bank.iter().map(|row| row[i]).collect())
        .collect();
    cholesky_solve(&gram, &mut cols);
    cols
}

/// Estimate a linear spectrogram from mel features: de-normalize,
/// exponentiate, apply the filterbank pseudo-inverse, clamp at zero.
pub fn imel_project(mel: &MelSpectrogram) -> LinearSpectrogram {
    let pinv = mel_pseudo_inverse();
    let mut out = LinearSpectrogram::zeros(mel.frames());
    for t in 0..mel.frames() {
        let energies: Vec<f64> = mel.row(t).iter().map(|v| mel_denormalize(*v)).collect();
        let row = out.row_mut(t);
        for (i, coeffs) in pinv.iter().enumerate() {
            let v: f64 = coeffs.iter().zip(&energies).map(|(c, e)| c * e).sum();
            row[i] = v.max(0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filterbank_rows_positive_and_sparse_columns() {
        let bank = mel_filterbank();
        assert_eq!(bank.len(), MEL_BANDS);
        for (j, row) in bank.iter().enumerate() {
            assert!(row.iter().sum::<f64>() > 0.0, "band {j} sums to zero");
        }
        // each linear bin touches at most 2 bands
        for i in 0..LINEAR_BINS {
            let touched = bank.iter().filter(|row| row[i] > 0.0).count();
            assert!(touched <= 2, "bin {i} in {touched} bands");
        }
    }

    #[test]
    fn zero_spectrogram_maps_to_lower_clamp() {
        let mel = mel_spectrogram(&LinearSpectrogram::zeros(3));
        assert!(mel.flat().iter().all(|v| *v == MEL_NORM_LO));
    }

    #[test]
    fn output_always_in_range() {
        let mut spec = LinearSpectrogram::zeros(2);
        for (i, v) in spec.flat_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.7).sin().abs() * 1e6;
        }
        let mel = mel_spectrogram(&spec);
        assert!(mel
            .flat()
            .iter()
            .all(|v| (MEL_NORM_LO..=MEL_NORM_HI).contains(v)));
    }

    #[test]
    fn impulse_touches_at_most_two_bands() {
        let mut spec = LinearSpectrogram::zeros(1);
        spec.row_mut(0)[64] = 1.0;
        let mel = mel_spectrogram(&spec);
        let floor = normalize_log(0.0);
        let lit = mel.row(0).iter().filter(|v| **v > floor + 1e-9).count();
        assert!(lit >= 1 && lit <= 2, "{lit} bands lit");
        // oracle: bands whose filter weight at bin 64 is nonzero
        let bank = mel_filterbank();
        let expect = bank.iter().filter(|row| row[64] > 0.0).count();
        assert_eq!(lit, expect);
    }

    #[test]
    fn all_negative_four_projects_to_near_zero() {
        let mut mel = MelSpectrogram::zeros(2);
        mel.flat_mut().fill(MEL_NORM_LO);
        let spec = imel_project(&mel);
        assert!(spec.flat().iter().all(|v| *v >= 0.0 && *v <= 1e-4));
    }

    #[test]
    fn imel_band_energies_match_on_smooth_spectra() {
        // smooth low-pass-ish magnitude envelope
        let frames = 4;
        let mut spec = LinearSpectrogram::zeros(frames);
        for t in 0..frames {
            for (i, v) in spec.row_mut(t).iter_mut().enumerate() {
                let f = i as f64 / LINEAR_BINS as f64;
                *v = (1.0 + t as f64) * (-3.0 * f).exp() + 0.05;
            }
        }
        let bank = mel_filterbank();
        let mel = mel_spectrogram(&spec);
        let back = imel_project(&mel);
        for t in 0..frames {
            for (j, filter) in bank.iter().enumerate() {
                let want: f64 = filter.iter().zip(spec.row(t)).map(|(w, m)| w * m).sum();
                let got: f64 = filter.iter().zip(back.row(t)).map(|(w, m)| w * m).sum();
                assert!(
                    (got - want).abs() / want.max(1e-9) < 0.2,
                    "frame {t} band {j}: {got} vs {want}"
                );
            }
        }
    }
}
