//! Dependency-free raster output: PGM spectrograms and PPM loss curves.

use super::EvalError;
use std::io::Write;
use std::path::Path;

/// 8-bit grayscale image, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Binary PGM (P5).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::File::create(path)?.write_all(&self.to_pgm())?;
        Ok(())
    }
}

/// 8-bit RGB image, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    fn blank(width: usize, height: usize) -> Self {
        RgbImage { width, height, pixels: vec![[255, 255, 255]; width * height] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    fn put(&mut self, x: usize, y: usize, color: [u8; 3]) {
        if x < self.width && y < self.height {
            self.pixels[y * self.width + x] = color;
        }
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::File::create(path)?.write_all(&self.to_ppm())?;
        Ok(())
    }
}

/// Render a feature matrix (`frames` rows of `bins` values) as a grayscale
/// spectrogram: time left-to-right, low frequencies at the bottom, per-image
/// min-max intensity scaling. A constant image maps to mid-gray.
pub fn render_spectrogram_image(
    data: &[f64],
    frames: usize,
    bins: usize,
) -> Result<GrayImage, EvalError> {
    if frames == 0 || bins == 0 || data.len() != frames * bins {
        return Err(EvalError::Shape(format!(
            "{} values is not {frames} frames x {bins} bins",
            data.len()
        )));
    }
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut img = GrayImage { width: frames, height: bins, pixels: vec![0; frames * bins] };
    for t in 0..frames {
        for b in 0..bins {
            let v = data[t * bins + b];
            let g = if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                128
            };
            // bin 0 sits on the bottom row
            let y = bins - 1 - b;
            img.pixels[y * frames + t] = g;
        }
    }
    Ok(img)
}

// 5x7 column-wise glyphs, bit 0 = top row.
const FONT_CHARS: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-._+ ";
const FONT: [[u8; 5]; 41] = [
    [0x7e, 0x11, 0x11, 0x11, 0x7e],
    [0x7f, 0x49, 0x49, 0x49, 0x36],
    [0x3e, 0x41, 0x41, 0x41, 0x22],
    [0x7f, 0x41, 0x41, 0x22, 0x1c],
    [0x7f, 0x49, 0x49, 0x49, 0x41],
    [0x7f, 0x09, 0x09, 0x09, 0x01],
    [0x3e, 0x41, 0x49, 0x49, 0x7a],
    [0x7f, 0x08, 0x08, 0x08, 0x7f],
    [0x00, 0x41, 0x7f, 0x41, 0x00],
    [0x20, 0x40, 0x41, 0x3f, 0x01],
    [0x7f, 0x08, 0x14, 0x22, 0x41],
    [0x7f, 0x40, 0x40, 0x40, 0x40],
    [0x7f, 0x02, 0x0c, 0x02, 0x7f],
    [0x7f, 0x04, 0x08, 0x10, 0x7f],
    [0x3e, 0x41, 0x41, 0x41, 0x3e],
    [0x7f, 0x09, 0x09, 0x09, 0x06],
    [0x3e, 0x41, 0x51, 0x21, 0x5e],
    [0x7f, 0x09, 0x19, 0x29, 0x46],
    [0x46, 0x49, 0x49, 0x49, 0x31],
    [0x01, 0x01, 0x7f, 0x01, 0x01],
    [0x3f, 0x40, 0x40, 0x40, 0x3f],
    [0x1f, 0x20, 0x40, 0x20, 0x1f],
    [0x3f, 0x40, 0x38, 0x40, 0x3f],
    [0x63, 0x14, 0x08, 0x14, 0x63],
    [0x07, 0x08, 0x70, 0x08, 0x07],
    [0x61, 0x51, 0x49, 0x45, 0x43],
    [0x3e, 0x51, 0x49, 0x45, 0x3e],
    [0x00, 0x42, 0x7f, 0x40, 0x00],
    [0x42, 0x61, 0x51, 0x49, 0x46],
    [0x21, 0x41, 0x45, 0x4b, 0x31],
    [0x18, 0x14, 0x12, 0x7f, 0x10],
    [0x27, 0x45, 0x45, 0x45, 0x39],
    [0x3c, 0x4a, 0x49, 0x49, 0x30],
    [0x01, 0x71, 0x09, 0x05, 0x03],
    [0x36, 0x49, 0x49, 0x49, 0x36],
    [0x06, 0x49, 0x49, 0x29, 0x1e],
    [0x08, 0x08, 0x08, 0x08, 0x08],
    [0x00, 0x60, 0x60, 0x00, 0x00],
    [0x40, 0x40, 0x40, 0x40, 0x40],
    [0x08, 0x08, 0x3e, 0x08, 0x08],
    [0x00, 0x00, 0x00, 0x00, 0x00],
];

fn draw_text(img: &mut RgbImage, x: usize, y: usize, text: &str, color: [u8; 3]) {
    let mut cx = x;
    for ch in text.to_uppercase().chars() {
        let idx = FONT_CHARS.find(ch).unwrap_or(FONT_CHARS.len() - 1);
        let glyph = &FONT[idx];
        for (col, bits) in glyph.iter().enumerate() {
            for row in 0..7 {
                if bits >> row & 1 == 1 {
                    img.put(cx + col, y + row, color);
                }
            }
        }
        cx += 6;
    }
}

fn draw_line(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 {
            img.put(x as usize, y as usize, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

const PALETTE: [[u8; 3]; 6] = [
    [214, 48, 49],
    [9, 92, 210],
    [26, 158, 86],
    [216, 150, 20],
    [142, 68, 173],
    [40, 40, 40],
];

const PLOT_W: usize = 640;
const PLOT_H: usize = 400;
const MARGIN_LEFT: usize = 56;
const MARGIN_BOTTOM: usize = 28;
const MARGIN_TOP: usize = 12;
const MARGIN_RIGHT: usize = 12;

/// Overlay one polyline per `(label, points)` series with a legend in the
/// top-right corner. Every series needs at least two points.
pub fn render_loss_curve(series: &[(String, Vec<(f64, f64)>)]) -> Result<RgbImage, EvalError> {
    if series.is_empty() {
        return Err(EvalError::Plot("no series to plot".into()));
    }
    for (label, pts) in series {
        if pts.len() < 2 {
            return Err(EvalError::Plot(format!(
                "series {label:?} has {} points, need at least 2",
                pts.len()
            )));
        }
    }
    let all = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x_lo = x_lo.min(*x);
        x_hi = x_hi.max(*x);
        y_lo = y_lo.min(*y);
        y_hi = y_hi.max(*y);
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }

    let mut img = RgbImage::blank(PLOT_W, PLOT_H);
    let inner_w = (PLOT_W - MARGIN_LEFT - MARGIN_RIGHT) as f64;
    let inner_h = (PLOT_H - MARGIN_TOP - MARGIN_BOTTOM) as f64;
    let to_px = |x: f64, y: f64| -> (i64, i64) {
        let px = MARGIN_LEFT as f64 + (x - x_lo) / (x_hi - x_lo) * inner_w;
        let py = MARGIN_TOP as f64 + (1.0 - (y - y_lo) / (y_hi - y_lo)) * inner_h;
        (px.round() as i64, py.round() as i64)
    };

    // axes
    let axis = [120u8, 120, 120];
    draw_line(
        &mut img,
        MARGIN_LEFT as i64,
        MARGIN_TOP as i64,
        MARGIN_LEFT as i64,
        (PLOT_H - MARGIN_BOTTOM) as i64,
        axis,
    );
    draw_line(
        &mut img,
        MARGIN_LEFT as i64,
        (PLOT_H - MARGIN_BOTTOM) as i64,
        (PLOT_W - MARGIN_RIGHT) as i64,
        (PLOT_H - MARGIN_BOTTOM) as i64,
        axis,
    );
    draw_text(&mut img, MARGIN_LEFT, PLOT_H - MARGIN_BOTTOM + 6, &format!("{x_lo:.0}"), axis);
    let x_hi_label = format!("{x_hi:.0}");
    draw_text(
        &mut img,
        PLOT_W - MARGIN_RIGHT - 6 * x_hi_label.len(),
        PLOT_H - MARGIN_BOTTOM + 6,
        &x_hi_label,
        axis,
    );
    draw_text(&mut img, 2, MARGIN_TOP, &format!("{y_hi:.3}"), axis);
    draw_text(&mut img, 2, PLOT_H - MARGIN_BOTTOM - 8, &format!("{y_lo:.3}"), axis);

    for (si, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        for pair in pts.windows(2) {
            let (x0, y0) = to_px(pair[0].0, pair[0].1);
            let (x1, y1) = to_px(pair[1].0, pair[1].1);
            draw_line(&mut img, x0, y0, x1, y1, color);
        }
    }

    // legend, one row per series
    for (si, (label, _)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let y = MARGIN_TOP + 4 + si * 12;
        let x = PLOT_W - MARGIN_RIGHT - 150;
        for dx in 0..12 {
            for dy in 0..7 {
                img.put(x + dx, y + dy, color);
            }
        }
        draw_text(&mut img, x + 16, y, label, [40, 40, 40]);
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrogram_axis_contract() {
        let data = vec![0.0; 96 * 513];
        let img = render_spectrogram_image(&data, 96, 513).unwrap();
        assert_eq!((img.width, img.height), (96, 513));
        // constant input is uniform mid-gray
        assert!(img.pixels.iter().all(|p| *p == 128));
        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n96 513\n255\n"));
    }

    #[test]
    fn sinusoid_band_lights_one_row() {
        // single hot bin per frame at bin 64
        let (frames, bins) = (10, 513);
        let mut data = vec![0.0; frames * bins];
        for t in 0..frames {
            data[t * bins + 64] = 1.0;
        }
        let img = render_spectrogram_image(&data, frames, bins).unwrap();
        let y_hot = bins - 1 - 64;
        for x in 0..frames {
            assert_eq!(img.pixel(x, y_hot), 255);
            assert_eq!(img.pixel(x, y_hot - 1), 0);
            assert_eq!(img.pixel(x, y_hot + 1), 0);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(render_spectrogram_image(&[0.0; 10], 3, 4).is_err());
        assert!(render_spectrogram_image(&[], 0, 4).is_err());
    }

    #[test]
    fn monotone_series_renders_monotone_polyline() {
        let pts: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 100.0 - i as f64)).collect();
        let img = render_loss_curve(&[("loss".into(), pts)]).unwrap();
        let color = PALETTE[0];
        // topmost series pixel per sampled column moves downward as loss falls
        let mut prev_top = 0usize;
        for x in (MARGIN_LEFT + 5..PLOT_W / 2).step_by(40) {
            let top = (0..PLOT_H)
                .find(|y| img.pixel(x, *y) == color)
                .unwrap_or_else(|| panic!("no series pixel in column {x}"));
            assert!(top >= prev_top, "column {x}: {top} above {prev_top}");
            prev_top = top;
        }
    }

    #[test]
    fn legend_row_per_series() {
        let a: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 1.0 / (i + 1) as f64)).collect();
        let b: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 / (i + 1) as f64)).collect();
        let one = render_loss_curve(&[("a".into(), a.clone())]).unwrap();
        let two = render_loss_curve(&[("a".into(), a), ("b".into(), b)]).unwrap();
        let swatch_x = PLOT_W - MARGIN_RIGHT - 150;
        // first legend row is present in both
        assert_eq!(one.pixel(swatch_x, MARGIN_TOP + 5), PALETTE[0]);
        assert_eq!(two.pixel(swatch_x, MARGIN_TOP + 5), PALETTE[0]);
        // second row only when there are two series
        assert_ne!(one.pixel(swatch_x, MARGIN_TOP + 4 + 12), PALETTE[1]);
        assert_eq!(two.pixel(swatch_x, MARGIN_TOP + 4 + 12), PALETTE[1]);
    }

    #[test]
    fn short_series_rejected() {
        let err = render_loss_curve(&[("x".into(), vec![(0.0, 1.0)])]).unwrap_err();
        assert!(err.to_string().contains("at least 2"), "{err}");
        assert!(render_loss_curve(&[]).is_err());
    }

    #[test]
    fn ppm_header() {
        let pts: Vec<(f64, f64)> = vec![(0.0, 1.0), (1.0, 0.5)];
        let img = render_loss_curve(&[("l".into(), pts)]).unwrap();
        let ppm = img.to_ppm();
        assert!(ppm.starts_with(format!("P6\n{PLOT_W} {PLOT_H}\n255\n").as_bytes()));
        assert_eq!(ppm.len(), 15 + PLOT_W * PLOT_H * 3);
    }
}
