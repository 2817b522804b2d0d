//! Fundamental frequency estimation by normalized autocorrelation.

use super::{F0Track, Waveform, F0_MAX_HZ, F0_MIN_HZ, FRAME_LEN, HOP, SAMPLE_RATE};

/// Peaks with normalized correlation below this are unvoiced.
const CLARITY_THRESHOLD: f64 = 0.3;
/// A smaller-lag peak within this fraction of the best peak wins, which
/// keeps the estimator off subharmonics of strongly periodic signals.
const OCTAVE_GUARD: f64 = 0.85;

/// Normalized cross-correlation of a frame with itself at lag `tau`.
///
/// Equivalent to the cosine similarity of `x[..n-tau]` and `x[tau..]`, so a
/// perfectly periodic frame scores 1 at its period regardless of lag.
fn nccf(frame: &[f64], sq_prefix: &[f64], tau: usize) -> f64 {
    let n = frame.len();
    let mut cross = 0.0;
    for i in 0..n - tau {
        cross += frame[i] * frame[i + tau];
    }
    let e_head = sq_prefix[n - tau];
    let e_tail = sq_prefix[n] - sq_prefix[tau];
    let denom = (e_head * e_tail).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        cross / denom
    }
}

/// Estimate per-frame F0 in Hz; unvoiced frames are 0. Framing matches the
/// spectrogram geometry so tracks align with feature frames by index.
pub fn estimate_f0(w: &Waveform) -> F0Track {
    let fs = SAMPLE_RATE as f64;
    debug_assert_eq!(w.sample_rate, SAMPLE_RATE);
    if w.samples.len() < FRAME_LEN {
        return F0Track(Vec::new());
    }
    let tau_min = (fs / F0_MAX_HZ).floor() as usize; // 16
    let tau_max = (fs / F0_MIN_HZ).ceil() as usize; // 291
    let count = super::frame_count(w.samples.len());
    let mut track = Vec::with_capacity(count);

    for t in 0..count {
        let frame = &w.samples[t * HOP..t * HOP + FRAME_LEN];
        let mut sq_prefix = vec![0.0; FRAME_LEN + 1];
        for (i, x) in frame.iter().enumerate() {
            sq_prefix[i + 1] = sq_prefix[i] + x * x;
        }
        if sq_prefix[FRAME_LEN] < 1e-10 {
            track.push(0.0);
            continue;
        }
        let corr: Vec<f64> = (tau_min..=tau_max)
            .map(|tau| nccf(frame, &sq_prefix, tau))
            .collect();

        // local maxima over the lag axis
        let mut best = 0.0f64;
        let mut peaks: Vec<usize> = Vec::new();
        for i in 1..corr.len() - 1 {
            if corr[i] >= corr[i - 1] && corr[i] > corr[i + 1] {
                peaks.push(i);
                best = best.max(corr[i]);
            }
        }
        let chosen = peaks.iter().copied().find(|&i| corr[i] >= OCTAVE_GUARD * best);
        let Some(i) = chosen else {
            track.push(0.0);
            continue;
        };
        if corr[i] < CLARITY_THRESHOLD {
            track.push(0.0);
            continue;
        }
        // parabolic interpolation around the peak
        let (ym, y0, yp) = (corr[i - 1], corr[i], corr[i + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let delta = if denom.abs() < 1e-12 {
            0.0
        } else {
            0.5 * (ym - yp) / denom
        };
        let lag = (tau_min + i) as f64 + delta.clamp(-0.5, 0.5);
        track.push((fs / lag).clamp(F0_MIN_HZ, F0_MAX_HZ));
    }
    F0Track(track)
}
