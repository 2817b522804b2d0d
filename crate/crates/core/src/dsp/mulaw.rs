//! μ-law companding for the 256-way categorical waveform output.

/// μ-law code count; codes are `0..=255`.
pub const QUANTIZATION_LEVELS: usize = 256;

const MU: f64 = 255.0;

/// Compress an amplitude in [-1, 1] to a μ-law code.
///
/// Inputs outside [-1, 1] are clamped (with a warning); the compressed
/// value is mapped onto 0..=255 with round-half-up, so 0.0 encodes to 128.
pub fn mu_law_encode(x: f64) -> u8 {
    let x = if x.abs() > 1.0 {
        log::warn!("mu_law_encode: clamping out-of-range amplitude {x}");
        x.clamp(-1.0, 1.0)
    } else {
        x
    };
    let compressed = x.signum() * (1.0 + MU * x.abs()).ln() / (1.0 + MU).ln();
    let scaled = (compressed + 1.0) / 2.0 * 255.0;
    (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Expand a μ-law code back to the amplitude at its bin center.
pub fn mu_law_decode(code: u8) -> f64 {
    let y = 2.0 * code as f64 / 255.0 - 1.0;
    y.signum() * ((1.0 + MU).powf(y.abs()) - 1.0) / MU
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn center_and_endpoints() {
        assert_eq!(mu_law_encode(0.0), 128);
        assert_eq!(mu_law_encode(1.0), 255);
        assert_eq!(mu_law_encode(-1.0), 0);
    }

    #[test]
    fn round_trip_error_bounded() {
        // exhaustive sweep on a 1e-4 grid; worst step is near |x| = 1
        let mut worst = 0.0f64;
        let mut x = -1.0;
        while x <= 1.0 {
            let err = (mu_law_decode(mu_law_encode(x)) - x).abs();
            worst = worst.max(err);
            x += 1e-4;
        }
        assert!(worst <= 0.05, "worst round-trip error {worst}");
    }

    #[test]
    fn out_of_range_clamps() {
        assert_eq!(mu_law_encode(1.5), 255);
        assert_eq!(mu_law_encode(-2.0), 0);
    }

    proptest! {
        #[test]
        fn encode_is_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(mu_law_encode(lo) <= mu_law_encode(hi));
        }

        #[test]
        fn decode_lands_in_unit_interval(code in 0u8..=255) {
            let x = mu_law_decode(code);
            prop_assert!((-1.0..=1.0).contains(&x));
        }
    }
}
