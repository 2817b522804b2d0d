//! Objective and subjective evaluation criteria.

use super::EvalError;
use crate::dsp::F0Track;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean squared error at full precision; display via [`format_mse`].
pub fn mse_metric(pred: &[f64], target: &[f64]) -> Result<f64, EvalError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(EvalError::Shape(format!(
            "mse over {} vs {} values",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Four decimals, ties to even.
pub fn format_mse(value: f64) -> String {
    format!("{:.4}", round_to(value, 4))
}

/// Two decimals, ties to even.
pub fn format_percent(value: f64) -> String {
    format!("{:.2}", round_to(value, 2))
}

fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale).round_ties_even() / scale
}

/// Percent of reference-voiced frames whose prediction is voiced and within
/// half a semitone. Tracks align by frame index; the longer one is truncated.
pub fn pitch_accuracy(reference: &F0Track, predicted: &F0Track) -> Result<f64, EvalError> {
    let n = reference.len().min(predicted.len());
    let mut voiced = 0usize;
    let mut accurate = 0usize;
    for t in 0..n {
        let r = reference.0[t];
        if r <= 0.0 {
            continue;
        }
        voiced += 1;
        let p = predicted.0[t];
        if p > 0.0 && (12.0 * (p / r).log2()).abs() <= 0.5 {
            accurate += 1;
        }
    }
    if voiced == 0 {
        return Err(EvalError::NoVoicedFrames);
    }
    Ok(100.0 * accurate as f64 / voiced as f64)
}

/// One listener's score for one item, on the 1..=5 opinion scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MosSample {
    pub listener: String,
    pub item: String,
    pub score: u8,
}

impl MosSample {
    pub fn new(listener: &str, item: &str, score: u8) -> Result<Self, EvalError> {
        if !(1..=5).contains(&score) {
            return Err(EvalError::BadScore(score));
        }
        Ok(MosSample { listener: listener.into(), item: item.into(), score })
    }
}

/// Mean opinion score with a 95% confidence half-width over per-item means
/// (t-distribution). With a single item the raw scores are the units.
pub fn mos_aggregate(samples: &[MosSample]) -> Result<(f64, f64), EvalError> {
    if samples.len() < 2 {
        return Err(EvalError::TooFewSamples(samples.len()));
    }
    for s in samples {
        if !(1..=5).contains(&s.score) {
            return Err(EvalError::BadScore(s.score));
        }
    }
    let mut by_item: std::collections::BTreeMap<&str, (f64, usize)> = Default::default();
    for s in samples {
        let e = by_item.entry(&s.item).or_insert((0.0, 0));
        e.0 += s.score as f64;
        e.1 += 1;
    }
    let units: Vec<f64> = if by_item.len() >= 2 {
        by_item.values().map(|(sum, n)| sum / *n as f64).collect()
    } else {
        samples.iter().map(|s| s.score as f64).collect()
    };
    let n = units.len() as f64;
    let mean = units.iter().sum::<f64>() / n;
    let var = units.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / (n - 1.0);
    let half = if var <= 0.0 {
        0.0
    } else {
        let t = StudentsT::new(0.0, 1.0, n - 1.0)
            .expect("valid dof")
            .inverse_cdf(0.975);
        t * (var / n).sqrt()
    };
    Ok((mean, half))
}

/// `3.00±0.00` style rendering.
pub fn format_mos(mean: f64, half: f64) -> String {
    format!("{}±{}", format_percent(mean), format_percent(half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_display_examples() {
        let a = vec![0.0; 4];
        let b = vec![0.18; 4];
        let m = mse_metric(&b, &a).unwrap();
        assert_eq!(format_mse(m), "0.0324");
        assert_eq!(format_mse(mse_metric(&a, &a).unwrap()), "0.0000");
    }

    #[test]
    fn mse_symmetry_and_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let a: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let ab = mse_metric(&a, &b).unwrap();
        let ba = mse_metric(&b, &a).unwrap();
        assert_eq!(ab, ba);
        let want: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 50.0;
        assert!((ab - want).abs() < 1e-15);
        assert!(ab > 0.0);
    }

    #[test]
    fn pitch_accuracy_examples() {
        let same = F0Track(vec![220.0, 330.0, 440.0]);
        assert_eq!(pitch_accuracy(&same, &same).unwrap(), 100.0);

        // +2 semitones everywhere: all wrong
        let up2 = F0Track(same.0.iter().map(|f| f * 2f64.powf(2.0 / 12.0)).collect());
        assert_eq!(pitch_accuracy(&same, &up2).unwrap(), 0.0);

        // 233.1 Hz is +1.00 semitone (error), 226.3 is +0.49 (accurate)
        let r = F0Track(vec![220.0, 220.0, 220.0]);
        let p = F0Track(vec![220.0, 233.1, 226.3]);
        let pa = pitch_accuracy(&r, &p).unwrap();
        assert!((pa - 66.666_666).abs() < 1e-3, "{pa}");
        assert_eq!(format_percent(pa), "66.67");
    }

    #[test]
    fn pitch_accuracy_counts_unvoiced_prediction_as_error() {
        let r = F0Track(vec![220.0, 220.0]);
        let p = F0Track(vec![220.0, 0.0]);
        assert_eq!(pitch_accuracy(&r, &p).unwrap(), 50.0);
    }

    #[test]
    fn pitch_accuracy_ignores_unvoiced_reference_and_truncates() {
        let r = F0Track(vec![0.0, 220.0, 0.0, 330.0, 440.0]);
        let p = F0Track(vec![999.0, 220.0, 999.0, 330.0]);
        // frame 4 falls off the shorter track; both voiced frames correct
        assert_eq!(pitch_accuracy(&r, &p).unwrap(), 100.0);
    }

    #[test]
    fn pitch_accuracy_transposition_invariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let r = F0Track((0..40).map(|_| rng.gen_range(100.0..500.0)).collect());
        let p = F0Track(r.0.iter().map(|f| f * rng.gen_range(0.97..1.03)).collect());
        let shift = 2f64.powf(7.0 / 12.0);
        let r2 = F0Track(r.0.iter().map(|f| f * shift).collect());
        let p2 = F0Track(p.0.iter().map(|f| f * shift).collect());
        let a = pitch_accuracy(&r, &p).unwrap();
        let b = pitch_accuracy(&r2, &p2).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn unvoiced_reference_errors() {
        let r = F0Track(vec![0.0, 0.0]);
        let p = F0Track(vec![220.0, 220.0]);
        assert!(matches!(pitch_accuracy(&r, &p), Err(EvalError::NoVoicedFrames)));
    }

    #[test]
    fn mos_zero_variance() {
        let s: Vec<MosSample> = (0..3)
            .map(|i| MosSample::new(&format!("l{i}"), "item0", 3).unwrap())
            .collect();
        let (mean, half) = mos_aggregate(&s).unwrap();
        assert_eq!(format_mos(mean, half), "3.00±0.00");

        let fives: Vec<MosSample> = (0..4)
            .map(|i| MosSample::new(&format!("l{i}"), &format!("i{}", i % 2), 5).unwrap())
            .collect();
        let (mean, half) = mos_aggregate(&fives).unwrap();
        assert_eq!(format_mos(mean, half), "5.00±0.00");
    }

    #[test]
    fn mos_matches_t_interval_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        // one listener, many items: per-item means are the raw scores
        let samples: Vec<MosSample> = (0..12)
            .map(|i| MosSample::new("l0", &format!("item{i:02}"), rng.gen_range(1..=5)).unwrap())
            .collect();
        let (mean, half) = mos_aggregate(&samples).unwrap();

        let xs: Vec<f64> = samples.iter().map(|s| s.score as f64).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let s2 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        // t_{0.975, 11} = 2.200985...
        let want_half = 2.200985160082949 * (s2 / n).sqrt();
        assert!((mean - m).abs() < 1e-12);
        assert!((half - want_half).abs() < 1e-9, "{half} vs {want_half}");
    }

    #[test]
    fn mos_input_validation() {
        assert!(MosSample::new("l", "i", 0).is_err());
        assert!(MosSample::new("l", "i", 6).is_err());
        let one = vec![MosSample::new("l", "i", 3).unwrap()];
        assert!(matches!(mos_aggregate(&one), Err(EvalError::TooFewSamples(1))));
    }
}
