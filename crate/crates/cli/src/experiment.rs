//! Ablation harness: train each configured variant with identical seeds
//! and data order, evaluate, and emit comparison tables, loss curves and a
//! run manifest under `runs/<name>/`.

use crate::corpus::utterance_paths;
use crate::dataset::{build_target, extract, load_utterance, Utterance};
use crate::manifest::{sha256_hex, RunManifest};
use crate::train::{
    cbhg_pair, data_order, train_cbhg_model, write_loss_csv, LossTrace, TrainCbhgSpec,
    TrainFrontendSpec,
};
use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use svskit::dsp::{estimate_f0, imel_project, F0Track, LinearSpectrogram, MelSpectrogram};
use svskit::eval::{compare_table, mos_aggregate, mse_metric, pitch_accuracy, MetricsRow, MosSample};
use svskit::frontend::{CbhgModel, FrontEnd, FrontEndConfig, OutputHead, PitchPlacement};
use svskit::score::semitone_to_hz;
use svskit::vocoder::griffin_lim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// encoder-only / decoder-only / both, mel head, Table-2 schema.
    Placement,
    /// Feature-type comparison across vocoder paths, Table-6 schema.
    Vocoder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub sweep: SweepKind,
    pub seed: u64,
    pub steps: u64,
    pub warmup: u64,
    pub train_utterances: usize,
    /// Utterances evaluated (parallel data drawn from the training set).
    pub eval_utterances: usize,
    pub gl_iters: usize,
    pub base: FrontEndConfig,
    #[serde(default)]
    pub cbhg: Option<TrainCbhgSpec>,
    #[serde(default)]
    pub mos_csv: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "placement".into(),
            sweep: SweepKind::Placement,
            seed: 1,
            steps: 600,
            warmup: 200,
            train_utterances: 4,
            eval_utterances: 2,
            gl_iters: 30,
            base: FrontEndConfig::default(),
            cbhg: None,
            mos_csv: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.eval_utterances == 0 || self.train_utterances == 0 {
            return Err(CliError::Validation("need at least one train and eval utterance".into()));
        }
        if self.eval_utterances > self.train_utterances {
            return Err(CliError::Validation(
                "parallel evaluation draws from the training set".into(),
            ));
        }
        self.base.validate().map_err(CliError::Frontend)
    }
}

/// How a variant turns features into audio for pitch evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AudioPath {
    ImelGriffinLim,
    LinearGriffinLim,
    CbhgGriffinLim,
}

struct Variant {
    label: String,
    feature_type: String,
    cfg: FrontEndConfig,
    audio: AudioPath,
}

fn variants(spec: &ExperimentSpec) -> Vec<Variant> {
    match spec.sweep {
        SweepKind::Placement => [
            ("encoder-only", PitchPlacement::EncoderOnly),
            ("decoder-only", PitchPlacement::DecoderOnly),
            ("both", PitchPlacement::Both),
        ]
        .into_iter()
        .map(|(label, placement)| Variant {
            label: label.into(),
            feature_type: "Mel".into(),
            cfg: FrontEndConfig {
                pitch_placement: placement,
                output_head: OutputHead::Mel,
                use_postnet: false,
                use_cbhg: false,
                ..spec.base.clone()
            },
            audio: AudioPath::ImelGriffinLim,
        })
        .collect(),
        SweepKind::Vocoder => {
            let mut v = vec![
                Variant {
                    label: "std-imel-griffin-lim".into(),
                    feature_type: "Mel".into(),
                    cfg: FrontEndConfig {
                        output_head: OutputHead::Mel,
                        use_postnet: false,
                        use_cbhg: false,
                        ..spec.base.clone()
                    },
                    audio: AudioPath::ImelGriffinLim,
                },
                Variant {
                    label: "std-griffin-lim".into(),
                    feature_type: "Linear".into(),
                    cfg: FrontEndConfig {
                        output_head: OutputHead::Linear,
                        use_postnet: false,
                        use_cbhg: false,
                        ..spec.base.clone()
                    },
                    audio: AudioPath::LinearGriffinLim,
                },
            ];
            if spec.base.use_cbhg {
                v.push(Variant {
                    label: "std-cbhg-griffin-lim".into(),
                    feature_type: "Linear".into(),
                    cfg: FrontEndConfig {
                        output_head: OutputHead::Mel,
                        use_postnet: false,
                        use_cbhg: true,
                        ..spec.base.clone()
                    },
                    audio: AudioPath::CbhgGriffinLim,
                });
            }
            v
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VariantStatus {
    pub label: String,
    pub status: String,
}

/// Reference pitch in Hz from the frame-level id track (0 stays unvoiced).
fn reference_track(frame_pitch: &[usize]) -> F0Track {
    F0Track(
        frame_pitch
            .iter()
            .map(|&id| if id == 0 { 0.0 } else { semitone_to_hz(id as i32) })
            .collect(),
    )
}

struct EvalData {
    utterances: Vec<Utterance>,
    mel_targets: Vec<svskit::neural::Tensor>,
}

fn evaluate_variant(
    variant: &Variant,
    model: &FrontEnd,
    cbhg: Option<&CbhgModel>,
    data: &EvalData,
    gl_iters: usize,
) -> Result<(Option<f64>, f64), CliError> {
    let mut mel_mse_sum = 0.0;
    let mut pa_sum = 0.0;
    for (utt, mel_target) in data.utterances.iter().zip(&data.mel_targets) {
        // feature fit on parallel data: teacher-forced durations
        if variant.cfg.output_head == OutputHead::Mel {
            let forced =
                model.synthesize_features(&utt.phones, &utt.pitch_ids, 0, Some(&utt.durations))?;
            mel_mse_sum += mse_metric(forced.features.data(), mel_target.data())?;
        }
        // pitch accuracy on the full inference path
        let out = model.synthesize_features(&utt.phones, &utt.pitch_ids, 0, None)?;
        let linear: LinearSpectrogram = match variant.audio {
            AudioPath::ImelGriffinLim => {
                let mel = MelSpectrogram::from_flat(out.features.data().to_vec(), out.features.rows());
                imel_project(&mel)
            }
            AudioPath::LinearGriffinLim => LinearSpectrogram::from_flat(
                out.features.data().iter().map(|v| v.max(0.0)).collect(),
                out.features.rows(),
            ),
            AudioPath::CbhgGriffinLim => {
                let mel = MelSpectrogram::from_flat(out.features.data().to_vec(), out.features.rows());
                cbhg.expect("cbhg variant carries a model").cbhg_mel_to_linear(&mel)
            }
        };
        let audio = griffin_lim(&linear, gl_iters);
        let predicted = estimate_f0(&audio);
        pa_sum += pitch_accuracy(&reference_track(&out.frame_pitch), &predicted)?;
    }
    let n = data.utterances.len() as f64;
    let mel_mse = (variant.cfg.output_head == OutputHead::Mel).then(|| mel_mse_sum / n);
    Ok((mel_mse, pa_sum / n))
}

fn mos_rows_for(path: Option<&Path>, label: &str) -> Result<Option<(f64, f64)>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(CliError::Validation(format!(
                "{}:{}: expected variant,listener,item,score",
                path.display(),
                lineno + 1
            )));
        }
        if cells[0] != label {
            continue;
        }
        let score: u8 = cells[3]
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("bad MOS score {:?}", cells[3])))?;
        samples.push(MosSample::new(cells[1], cells[2], score)?);
    }
    if samples.is_empty() {
        return Ok(None);
    }
    Ok(Some(mos_aggregate(&samples)?))
}

/// Train and evaluate every variant; returns the run directory.
pub fn run_experiment(
    corpus: &Path,
    spec: &ExperimentSpec,
    runs_root: &Path,
) -> Result<PathBuf, CliError> {
    spec.validate()?;
    let out = runs_root.join(&spec.name);
    std::fs::create_dir_all(&out)?;

    let spec_json = serde_json::to_string_pretty(spec)?;
    std::fs::write(out.join("experiment.json"), &spec_json)?;
    let mut manifest = RunManifest::new(&spec.name, &sha256_hex(spec_json.as_bytes()));
    for i in 0..spec.train_utterances {
        let (wav, score, dur) = utterance_paths(corpus, i);
        manifest.hash_input(&format!("wav/{i:04}"), &wav)?;
        manifest.hash_input(&format!("score/{i:04}"), &score)?;
        manifest.hash_input(&format!("dur/{i:04}"), &dur)?;
    }
    if let Some(mos) = &spec.mos_csv {
        manifest.hash_input("mos_csv", mos)?;
    }

    // shared data: utterances, features, per-head targets
    let utterances: Vec<Utterance> = (0..spec.train_utterances)
        .map(|i| load_utterance(corpus, i))
        .collect::<Result<_, _>>()?;
    let features: Vec<crate::dataset::Features> =
        utterances.iter().map(extract).collect::<Result<_, _>>()?;
    let eval_data = EvalData {
        mel_targets: utterances
            .iter()
            .zip(&features)
            .take(spec.eval_utterances)
            .map(|(u, f)| build_target(u, f, OutputHead::Mel))
            .collect(),
        utterances: utterances.iter().take(spec.eval_utterances).cloned().collect(),
    };

    // the CBHG converter is shared by any variant that needs it
    let needs_cbhg = variants(spec).iter().any(|v| v.audio == AudioPath::CbhgGriffinLim);
    let cbhg_model = if needs_cbhg {
        let cbhg_spec = spec.cbhg.clone().unwrap_or_default();
        let pairs: Vec<_> = utterances.iter().map(cbhg_pair).collect::<Result<_, _>>()?;
        let mut trace = LossTrace::new();
        let model = train_cbhg_model(&pairs, &cbhg_spec, |step, loss| {
            trace.push((step, loss, cbhg_spec.lr));
        })?;
        write_loss_csv(&out.join("loss_cbhg.csv"), &trace)?;
        manifest.record_artifact("loss_cbhg.csv");
        Some(model)
    } else {
        None
    };

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut statuses: Vec<VariantStatus> = Vec::new();
    let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();

    for variant in variants(spec) {
        let result = (|| -> Result<MetricsRow, CliError> {
            let variant_dir = out.join(&variant.label);
            std::fs::create_dir_all(&variant_dir)?;

            let train_spec = TrainFrontendSpec {
                model: variant.cfg.clone(),
                seed: spec.seed,
                steps: spec.steps,
                warmup: spec.warmup,
            };
            let batches: Vec<_> = utterances
                .iter()
                .zip(&features)
                .map(|(u, f)| crate::dataset::build_batch(u, f, variant.cfg.output_head))
                .collect();
            let mut trace = LossTrace::new();
            let mut model = crate::train::train_frontend_model(&batches, &train_spec, |s, stats| {
                trace.push((s, stats.total, stats.lr));
                true
            })?;
            write_loss_csv(&variant_dir.join("loss.csv"), &trace)?;
            model.save(&variant_dir.join("frontend.svsk"))?;
            curves.push((
                variant.label.clone(),
                trace.iter().map(|(s, l, _)| (*s as f64, *l)).collect(),
            ));

            let (mel_mse, pa) =
                evaluate_variant(&variant, &model, cbhg_model.as_ref(), &eval_data, spec.gl_iters)?;
            let mos = mos_rows_for(spec.mos_csv.as_deref(), &variant.label)?;
            Ok(MetricsRow {
                model: variant.label.clone(),
                feature_type: variant.feature_type.clone(),
                mel_mse,
                pa_percent: Some(pa),
                mos,
            })
        })();
        match result {
            Ok(row) => {
                rows.push(row);
                statuses.push(VariantStatus { label: variant.label.clone(), status: "ok".into() });
                manifest.record_artifact(&format!("{}/frontend.svsk", variant.label));
                manifest.record_artifact(&format!("{}/loss.csv", variant.label));
            }
            Err(err) => {
                log::error!("variant {} failed: {err}", variant.label);
                statuses.push(VariantStatus {
                    label: variant.label.clone(),
                    status: format!("error: {err}"),
                });
            }
        }
    }

    if !rows.is_empty() {
        let report = compare_table(rows);
        std::fs::write(out.join("metrics.csv"), report.to_csv())?;
        std::fs::write(out.join("table2.txt"), report.table2_text())?;
        std::fs::write(out.join("table6.txt"), report.table6_text())?;
        for a in ["metrics.csv", "table2.txt", "table6.txt"] {
            manifest.record_artifact(a);
        }
    }
    if !curves.is_empty() {
        let img = svskit::eval::render_loss_curve(&curves)?;
        img.write_ppm(&out.join("loss_curves.ppm"))?;
        manifest.record_artifact("loss_curves.ppm");
    }
    std::fs::write(out.join("status.json"), serde_json::to_string_pretty(&statuses)?)?;
    manifest.record_artifact("status.json");
    manifest.write(&out)?;
    Ok(out)
}

/// The fixed data order used for every variant, exposed for reporting.
pub fn experiment_order(spec: &ExperimentSpec) -> Vec<usize> {
    data_order(spec.train_utterances, spec.steps, spec.seed)
}
