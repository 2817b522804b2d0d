//! Comparison tables in the two experiment schemas, CSV and aligned text.

use super::metrics::{format_mos, format_mse, format_percent};

/// One model's evaluation results; absent metrics render as `/`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub model: String,
    pub feature_type: String,
    pub mel_mse: Option<f64>,
    pub pa_percent: Option<f64>,
    pub mos: Option<(f64, f64)>,
}

/// Rows plus per-column winners, rendered with a `**bold**` text convention.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

/// Index of the best row per column: lowest MSE, highest PA, highest MOS.
fn best_indices(rows: &[MetricsRow]) -> (Option<usize>, Option<usize>, Option<usize>) {
    let mut best_mse: Option<usize> = None;
    let mut best_pa: Option<usize> = None;
    let mut best_mos: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(v) = row.mel_mse {
            if best_mse.is_none_or(|b| v < rows[b].mel_mse.unwrap()) {
                best_mse = Some(i);
            }
        }
        if let Some(v) = row.pa_percent {
            if best_pa.is_none_or(|b| v > rows[b].pa_percent.unwrap()) {
                best_pa = Some(i);
            }
        }
        if let Some((v, _)) = row.mos {
            if best_mos.is_none_or(|b| v > rows[b].mos.unwrap().0) {
                best_mos = Some(i);
            }
        }
    }
    (best_mse, best_pa, best_mos)
}

pub fn compare_table(rows: Vec<MetricsRow>) -> MetricsReport {
    assert!(!rows.is_empty(), "at least one row");
    MetricsReport { rows }
}

fn mark(value: String, bold: bool) -> String {
    if bold {
        format!("**{value}**")
    } else {
        value
    }
}

fn aligned(header: &[&str], body: Vec<Vec<String>>) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        let line: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    emit(&mut out, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    for row in body {
        emit(&mut out, &row);
    }
    out
}

impl MetricsReport {
    /// `Model / Mel-MSE / PA (%) / MOS` schema.
    pub fn table2_text(&self) -> String {
        let (b_mse, b_pa, b_mos) = best_indices(&self.rows);
        let body = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    r.model.clone(),
                    r.mel_mse
                        .map(|v| mark(format_mse(v), b_mse == Some(i)))
                        .unwrap_or_else(|| "/".into()),
                    r.pa_percent
                        .map(|v| mark(format_percent(v), b_pa == Some(i)))
                        .unwrap_or_else(|| "/".into()),
                    r.mos
                        .map(|(m, h)| mark(format_mos(m, h), b_mos == Some(i)))
                        .unwrap_or_else(|| "/".into()),
                ]
            })
            .collect();
        aligned(&["Model", "Mel-MSE", "PA (%)", "MOS"], body)
    }

    /// `Model / Feature Type / PA (%) / MOS` schema.
    pub fn table6_text(&self) -> String {
        let (_, b_pa, b_mos) = best_indices(&self.rows);
        let body = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    r.model.clone(),
                    r.feature_type.clone(),
                    r.pa_percent
                        .map(|v| mark(format_percent(v), b_pa == Some(i)))
                        .unwrap_or_else(|| "/".into()),
                    r.mos
                        .map(|(m, h)| mark(format_mos(m, h), b_mos == Some(i)))
                        .unwrap_or_else(|| "/".into()),
                ]
            })
            .collect();
        aligned(&["Model", "Feature Type", "PA (%)", "MOS"], body)
    }

    /// `metrics.csv` schema: model,feature_type,mel_mse,pa_percent,mos_mean,mos_halfwidth.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,feature_type,mel_mse,pa_percent,mos_mean,mos_halfwidth\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.model,
                r.feature_type,
                r.mel_mse.map(format_mse).unwrap_or_default(),
                r.pa_percent.map(format_percent).unwrap_or_default(),
                r.mos.map(|(m, _)| format_percent(m)).unwrap_or_default(),
                r.mos.map(|(_, h)| format_percent(h)).unwrap_or_default(),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, mse: Option<f64>, pa: Option<f64>, mos: Option<(f64, f64)>) -> MetricsRow {
        MetricsRow {
            model: model.into(),
            feature_type: "Mel".into(),
            mel_mse: mse,
            pa_percent: pa,
            mos,
        }
    }

    #[test]
    fn single_row_is_best_everywhere() {
        let report = compare_table(vec![row("only", Some(0.1), Some(90.0), Some((3.0, 0.1)))]);
        let text = report.table2_text();
        assert!(text.contains("**0.1000**"), "{text}");
        assert!(text.contains("**90.00**"), "{text}");
        assert!(text.contains("**3.00±0.10**"), "{text}");
    }

    #[test]
    fn winners_match_reference_values() {
        let report = compare_table(vec![
            row("decoder-only", Some(0.0894), Some(86.63), Some((2.45, 0.01))),
            row("encoder-only", Some(0.0323), Some(93.91), Some((2.58, 0.11))),
            row("both", Some(0.0581), Some(82.28), Some((2.59, 0.10))),
        ]);
        let text = report.table2_text();
        assert!(text.contains("**0.0323**"), "{text}");
        assert!(text.contains("**93.91**"), "{text}");
        assert!(text.contains("**2.59±0.10**"), "{text}");
        assert!(!text.contains("**0.0894**"));
    }

    #[test]
    fn missing_metrics_render_as_slash() {
        let report = compare_table(vec![
            row("model", Some(0.1), None, None),
            row("recons", None, None, Some((2.67, 0.11))),
        ]);
        let text = report.table2_text();
        assert!(text.lines().nth(2).unwrap().contains('/'), "{text}");
        let csv = report.to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with(",,"), "{csv}");
    }

    #[test]
    fn best_selection_matches_argmin_argmax_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let rows: Vec<MetricsRow> = (0..5)
                .map(|i| {
                    row(
                        &format!("m{i}"),
                        Some(rng.gen_range(0.0..1.0)),
                        Some(rng.gen_range(0.0..100.0)),
                        Some((rng.gen_range(1.0..5.0), 0.1)),
                    )
                })
                .collect();
            let (b_mse, b_pa, b_mos) = best_indices(&rows);
            let want_mse = (0..5)
                .min_by(|a, b| rows[*a].mel_mse.unwrap().total_cmp(&rows[*b].mel_mse.unwrap()))
                .unwrap();
            let want_pa = (0..5)
                .max_by(|a, b| {
                    rows[*a].pa_percent.unwrap().total_cmp(&rows[*b].pa_percent.unwrap())
                })
                .unwrap();
            let want_mos = (0..5)
                .max_by(|a, b| rows[*a].mos.unwrap().0.total_cmp(&rows[*b].mos.unwrap().0))
                .unwrap();
            assert_eq!(b_mse, Some(want_mse));
            assert_eq!(b_pa, Some(want_pa));
            assert_eq!(b_mos, Some(want_mos));
        }
    }

    #[test]
    fn table6_schema_has_feature_type_column() {
        let report = compare_table(vec![row("std + wavenet", None, Some(93.33), Some((3.57, 0.13)))]);
        let text = report.table6_text();
        assert!(text.starts_with("Model"), "{text}");
        assert!(text.contains("Feature Type"), "{text}");
        assert!(text.contains("Mel"), "{text}");
    }
}
