//! `svskit` command line: corpus generation, feature extraction, training,
//! synthesis, evaluation and the ablation experiment harness.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use svskit::dsp::{estimate_f0, read_wav, write_wav};
use svskit::eval::{format_mos, format_mse, format_percent, mos_aggregate, mse_metric, pitch_accuracy, MosSample};
use svskit::frontend::{CbhgModel, FrontEnd};
use svskit::vocoder::{synthesize_waveform, SynthesisOptions, VocoderKind, WaveNet};
use svskit_cli::corpus::{generate_synthetic_corpus, verify_corpus_pitch, CorpusSpec};
use svskit_cli::dataset::extract_features_to_disk;
use svskit_cli::experiment::{run_experiment, ExperimentSpec};
use svskit_cli::train::{
    train_frontend_from_corpus, train_wavenet_from_corpus, TrainFrontendSpec, TrainVocoderSpec,
};
use svskit_cli::CliError;

#[derive(Parser)]
#[command(name = "svskit", version, about = "Desk-scale singing voice synthesis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reproducible synthetic singing corpus.
    GenCorpus(GenCorpusArgs),
    /// Dump linear/mel/BFCC/F0 feature files for every corpus utterance.
    ExtractFeatures {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Train the acoustic front-end.
    TrainFrontend(TrainArgs),
    /// Train the WaveNet vocoder.
    TrainVocoder(TrainArgs),
    /// Score → features → vocoder → WAV.
    Synth(SynthArgs),
    /// One-off metrics: pitch accuracy, feature MSE, MOS aggregation.
    Eval(EvalArgs),
    /// Run an ablation sweep and emit tables, curves and a manifest.
    Experiment {
        #[arg(long)]
        corpus: PathBuf,
        /// Experiment spec JSON; overrides built-in defaults entirely.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    /// Corpus spec JSON; when present it overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    utterances: usize,
    /// Re-estimate F0 of every rendered note and fail on drift.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Training spec JSON; overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Utterances used for training (defaults to the whole corpus).
    #[arg(long)]
    utterances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Score JSON file.
    #[arg(long)]
    score: PathBuf,
    /// Directory holding frontend.svsk + config.json from train-frontend.
    #[arg(long)]
    frontend: PathBuf,
    #[arg(long, value_enum, default_value = "imel-griffin-lim")]
    vocoder: VocoderArg,
    /// Directory holding wavenet.svsk + config.json (wavenet vocoder only).
    #[arg(long)]
    wavenet: Option<PathBuf>,
    /// Directory holding cbhg.svsk + config.json: mel head → CBHG → Griffin-Lim.
    #[arg(long)]
    cbhg: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    gl_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also render the predicted features as a PGM spectrogram.
    #[arg(long)]
    spectrogram: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq)]
enum VocoderArg {
    ImelGriffinLim,
    GriffinLim,
    Wavenet,
}

#[derive(Args)]
struct EvalArgs {
    /// Reference WAV for pitch accuracy.
    #[arg(long, requires = "pred_wav")]
    ref_wav: Option<PathBuf>,
    /// Synthesized WAV for pitch accuracy.
    #[arg(long)]
    pred_wav: Option<PathBuf>,
    /// Reference feature dump for MSE.
    #[arg(long, requires = "pred_features")]
    ref_features: Option<PathBuf>,
    /// Predicted feature dump for MSE.
    #[arg(long)]
    pred_features: Option<PathBuf>,
    /// MOS sample CSV with columns listener,item,score.
    #[arg(long)]
    mos_csv: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own message; usage problems exit 1
            let _ = err.print();
            std::process::exit(if err.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn load_json_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus(args) => {
            let spec = match &args.config {
                Some(path) => load_json_config::<CorpusSpec>(path)?,
                None => CorpusSpec { seed: args.seed, utterances: args.utterances, ..Default::default() },
            };
            generate_synthetic_corpus(&spec, &args.out)?;
            if args.verify {
                for i in 0..spec.utterances {
                    let worst = verify_corpus_pitch(&args.out, i)?;
                    if worst > 0.5 {
                        return Err(CliError::Validation(format!(
                            "utterance {i}: rendered pitch off by {worst:.3} semitones"
                        )));
                    }
                }
            }
            println!("wrote {} utterances to {}", spec.utterances, args.out.display());
        }
        Command::ExtractFeatures { corpus } => {
            let n = extract_features_to_disk(&corpus)?;
            println!("extracted features for {n} utterances");
        }
        Command::TrainFrontend(args) => {
            let mut spec = match &args.config {
                Some(path) => load_json_config::<TrainFrontendSpec>(path)?,
                None => TrainFrontendSpec::default(),
            };
            if args.config.is_none() {
                if let Some(seed) = args.seed {
                    spec.seed = seed;
                }
                if let Some(steps) = args.steps {
                    spec.steps = steps;
                }
            }
            let n = count_or(&args.corpus, args.utterances)?;
            train_frontend_from_corpus(&args.corpus, n, &spec, &args.out)?;
            println!("front-end trained; artifacts under {}", args.out.display());
        }
        Command::TrainVocoder(args) => {
            let mut spec = match &args.config {
                Some(path) => load_json_config::<TrainVocoderSpec>(path)?,
                None => TrainVocoderSpec::default(),
            };
            if args.config.is_none() {
                if let Some(seed) = args.seed {
                    spec.seed = seed;
                }
                if let Some(steps) = args.steps {
                    spec.steps = steps;
                }
            }
            let n = count_or(&args.corpus, args.utterances)?;
            train_wavenet_from_corpus(&args.corpus, n, &spec, &args.out)?;
            println!("vocoder trained; artifacts under {}", args.out.display());
        }
        Command::Synth(args) => synth(args)?,
        Command::Eval(args) => eval(args)?,
        Command::Experiment { corpus, config, runs, seed } => {
            let mut spec = match &config {
                Some(path) => load_json_config::<ExperimentSpec>(path)?,
                None => ExperimentSpec::default(),
            };
            if config.is_none() {
                if let Some(seed) = seed {
                    spec.seed = seed;
                }
            }
            let out = run_experiment(&corpus, &spec, &runs)?;
            println!("experiment complete; report under {}", out.display());
            let table = std::fs::read_to_string(out.join(match spec.sweep {
                svskit_cli::experiment::SweepKind::Placement => "table2.txt",
                svskit_cli::experiment::SweepKind::Vocoder => "table6.txt",
            }))?;
            println!("{table}");
        }
    }
    Ok(())
}

fn count_or(corpus: &PathBuf, requested: Option<usize>) -> Result<usize, CliError> {
    let available = svskit_cli::dataset::corpus_size(corpus)?;
    match requested {
        Some(n) if n <= available => Ok(n),
        Some(n) => Err(CliError::Validation(format!(
            "requested {n} utterances, corpus has {available}"
        ))),
        None => Ok(available),
    }
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    let score = svskit::score::parse_score(&std::fs::read_to_string(&args.score)?)?;
    let streams = svskit::score::score_to_streams(&score)?;
    let phones: Vec<usize> = streams.phones.0.iter().map(|p| p.id()).collect();
    let pitch: Vec<usize> = streams.pitch.0.iter().map(|p| svskit::frontend::pitch_to_id(*p)).collect();

    let train_spec: TrainFrontendSpec = load_json_config(&args.frontend.join("config.json"))?;
    let model = FrontEnd::load(&args.frontend.join("frontend.svsk"), train_spec.model, 0)?;
    let out = model.synthesize_features(&phones, &pitch, 0, None)?;

    if let Some(path) = &args.spectrogram {
        let img = svskit::eval::render_spectrogram_image(
            out.features.data(),
            out.features.rows(),
            out.features.cols(),
        )?;
        img.write_pgm(path)?;
    }

    let kind = match args.vocoder {
        VocoderArg::ImelGriffinLim => VocoderKind::ImelGriffinLim,
        VocoderArg::GriffinLim => VocoderKind::GriffinLim,
        VocoderArg::Wavenet => VocoderKind::WaveNet,
    };

    // optional mel → CBHG → linear → Griffin-Lim path
    if let Some(cbhg_dir) = &args.cbhg {
        let cbhg_spec: svskit_cli::train::TrainCbhgSpec =
            load_json_config(&cbhg_dir.join("config.json"))?;
        let cbhg = CbhgModel::load(&cbhg_dir.join("cbhg.svsk"), cbhg_spec.model, 0)?;
        let mel = svskit::dsp::MelSpectrogram::from_flat(
            out.features.data().to_vec(),
            out.features.rows(),
        );
        let linear = cbhg.cbhg_mel_to_linear(&mel);
        let wave = svskit::vocoder::griffin_lim(&linear, args.gl_iters);
        write_wav(&args.out, &wave)?;
        println!("wrote {} ({:.2} s)", args.out.display(), wave.duration_seconds());
        return Ok(());
    }

    let wavenet = match (&args.wavenet, kind) {
        (Some(dir), VocoderKind::WaveNet) => {
            let spec: TrainVocoderSpec = load_json_config(&dir.join("config.json"))?;
            Some(WaveNet::load(&dir.join("wavenet.svsk"), spec.model, 0)?)
        }
        _ => None,
    };
    let opts = SynthesisOptions {
        gl_iters: args.gl_iters,
        wavenet: wavenet.as_ref(),
        frame_pitch: Some(&out.frame_pitch),
        seed: args.seed,
    };
    let wave = synthesize_waveform(&out.features, model.cfg.output_head, kind, &opts)?;
    write_wav(&args.out, &wave)?;
    println!("wrote {} ({:.2} s)", args.out.display(), wave.duration_seconds());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let mut did_anything = false;
    if let (Some(r), Some(p)) = (&args.ref_wav, &args.pred_wav) {
        let ref_track = estimate_f0(&read_wav(r)?);
        let pred_track = estimate_f0(&read_wav(p)?);
        let pa = pitch_accuracy(&ref_track, &pred_track)?;
        println!("PA: {}", format_percent(pa));
        did_anything = true;
    }
    if let (Some(r), Some(p)) = (&args.ref_features, &args.pred_features) {
        let (_, ref_data) = svskit::dsp::read_features(r)?;
        let (_, pred_data) = svskit::dsp::read_features(p)?;
        let mse = mse_metric(&pred_data, &ref_data)?;
        println!("MSE: {}", format_mse(mse));
        did_anything = true;
    }
    if let Some(path) = &args.mos_csv {
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::new();
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(CliError::Validation(
                    "MOS CSV needs columns listener,item,score".into(),
                ));
            }
            let score: u8 = cells[2]
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("bad MOS score {:?}", cells[2])))?;
            samples.push(MosSample::new(cells[0], cells[1], score)?);
        }
        let (mean, half) = mos_aggregate(&samples)?;
        println!("MOS: {}", format_mos(mean, half));
        did_anything = true;
    }
    if !did_anything {
        return Err(CliError::Validation(
            "nothing to evaluate; pass --ref-wav/--pred-wav, --ref-features/--pred-features or --mos-csv".into(),
        ));
    }
    Ok(())
}
