//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured values. Run with `cargo test --test acceptance`.

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svskit::dsp::{
    estimate_f0, frame_count, frame_signal, mu_law_decode, mu_law_encode, read_wav,
    stft_magnitude, write_wav, F0Track, MelSpectrogram,
};
use svskit::eval::{mse_metric, pitch_accuracy};
use svskit::frontend::{
    length_regulate, loss_mse, Batch, CbhgConfig, CbhgModel, FrontEnd, FrontEndConfig, OutputHead,
    PitchPlacement,
};
use svskit::neural::{grad_check, AdamState, ParamModel, Tensor};
use svskit::score::{quantize_pitch, semitone_to_hz, PITCH_MAX, PITCH_MIN};
use svskit::vocoder::{
    frames_to_samples, griffin_lim, spectral_convergence, synthesize_waveform, PitchFrameTrack,
    SynthesisOptions, VocoderKind, WaveNet, WaveNetConfig,
};
use svskit_cli::corpus::{generate_synthetic_corpus, CorpusSpec, Timbre};
use svskit_cli::dataset::{build_batch, extract, load_utterance, Utterance};
use svskit_cli::experiment::{run_experiment, ExperimentSpec, SweepKind, VariantStatus};
use svskit_cli::train::{train_cbhg_model, train_wavenet_model, vocoder_example, TrainCbhgSpec, TrainVocoderSpec};

// ------------------------------------------------------------ shared tools

/// Vibrato-free toy corpus: clean pitch targets and fast mel memorization.
fn toy_spec(utterances: usize, seed: u64) -> CorpusSpec {
    CorpusSpec {
        utterances,
        seed,
        timbre: Timbre { vibrato_depth_semitones: 0.0, ..Default::default() },
        min_seconds: 3.0,
        max_seconds: 4.0,
        ..Default::default()
    }
}

fn load_corpus(dir: &Path, n: usize) -> Vec<Utterance> {
    (0..n).map(|i| load_utterance(dir, i).unwrap()).collect()
}

fn mel_batches(utts: &[Utterance]) -> Vec<Batch> {
    utts.iter()
        .map(|u| build_batch(u, &extract(u).unwrap(), OutputHead::Mel))
        .collect()
}

/// Training-set Mel-MSE with teacher-forced durations (the criterion metric).
fn training_mel_mse(model: &FrontEnd, batches: &[Batch]) -> f64 {
    let mut sum = 0.0;
    for b in batches {
        let out = model
            .synthesize_features(&b.phones, &b.pitch, 0, Some(&b.durations))
            .unwrap();
        sum += mse_metric(out.features.data(), b.target.data()).unwrap();
    }
    sum / batches.len() as f64
}

/// Frame-pitch ids as an F0 reference track.
fn id_track(frame_pitch: &[usize]) -> F0Track {
    F0Track(
        frame_pitch
            .iter()
            .map(|&id| if id == 0 { 0.0 } else { semitone_to_hz(id as i32) })
            .collect(),
    )
}

struct OverfitFixture {
    _dir: tempfile::TempDir,
    model: FrontEnd,
    batches: Vec<Batch>,
    utterances: Vec<Utterance>,
    steps_run: u64,
    reached_at: Option<u64>,
    final_mse: f64,
    elapsed: Duration,
}

static OVERFIT: OnceLock<OverfitFixture> = OnceLock::new();

/// Criterion 2's training run, shared with criterion 7.
fn overfit_fixture() -> &'static OverfitFixture {
    OVERFIT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_corpus(&toy_spec(4, 7), dir.path()).unwrap();
        let utterances = load_corpus(dir.path(), 4);
        let batches = mel_batches(&utterances);

        let cfg = FrontEndConfig {
            pitch_placement: PitchPlacement::EncoderOnly,
            ..FrontEndConfig::default()
        };
        let mut model = FrontEnd::new(cfg, 1).unwrap();
        let mut adam = AdamState::frontend();
        let start = Instant::now();
        let mut reached_at = None;
        let mut steps_run = 0;
        let mut final_mse = f64::INFINITY;
        for step in 1..=2000u64 {
            model.train_step_batched(&batches, &mut adam, 200).unwrap();
            steps_run = step;
            if step % 20 == 0 {
                final_mse = training_mel_mse(&model, &batches);
                if final_mse < 0.01 {
                    reached_at = Some(step);
                    break;
                }
            }
        }
        OverfitFixture {
            _dir: dir,
            model,
            batches,
            utterances,
            steps_run,
            reached_at,
            final_mse,
            elapsed: start.elapsed(),
        }
    })
}

// -------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let mut results: Vec<(&str, f64)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);

    // individual layers, each against an MSE (or NLL) readout
    {
        use svskit::neural::{
            relu, relu_backward, sigmoid_backward, softmax_nll, softmax_nll_backward,
            tanh_backward, BiRnn, Conv1d, Embedding, Highway, LayerNorm, Linear,
            MultiHeadAttention, Padding, Parameter,
        };

        fn mse_grad(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
            loss_mse(pred, target).unwrap()
        }

        struct P<M>(M, Tensor, Tensor);
        impl<M: ParamModel> ParamModel for P<M> {
            fn params_mut(&mut self) -> Vec<&mut Parameter> {
                self.0.params_mut()
            }
        }

        let x = Tensor::matrix(6, 8, (0..48).map(|v| (v as f64 * 0.37).sin()).collect());
        let y = Tensor::matrix(6, 8, (0..48).map(|v| (v as f64 * 0.11).cos()).collect());

        let mut lin = P(Linear::new("l", 8, 8, &mut rng), x.clone(), y.clone());
        let e = grad_check(
            &mut lin,
            |m, g| {
                m.0.params_mut().iter_mut().for_each(|p| p.tensor.zero_grad());
                let (out, c) = m.0.forward(&m.1);
                let (l, dl) = mse_grad(&out, &m.2);
                if g {
                    m.0.backward(&c, &dl);
                }
                l
            },
            1e-5,
            12,
            &mut rng,
        );
        results.push(("linear", e));

        let mut emb = P(Embedding::new("e", 12, 8, &mut rng), Tensor::zeros(vec![1]), y.clone());
        let ids = [3usize, 7, 3, 0, 11, 5];
        let e = grad_check(
            &mut emb,
            |m, g| {
                m.0.table.tensor.zero_grad();
                let (out, cached) = m.0.forward(&ids).unwrap();
                let (l, dl) = mse_grad(&out, &m.2);
                if g {
                    m.0.backward(&cached, &dl);
                }
                l
            },
            1e-5,
            12,
            &mut rng,
        );
        results.push(("embedding", e));

        let mut ln = P(LayerNorm::new("ln", 8), x.clone(), y.clone());
        let e = grad_check(
            &mut ln,
            |m, g| {
                m.0.params_mut().iter_mut().for_each(|p| p.tensor.zero_grad());
                let (out, c) = m.0.forward(&m.1);
                let (l, dl) = mse_grad(&out, &m.2);
                if g {
                    m.0.backward(&c, &dl);
                }
                l
            },
            1e-5,
            12,
            &mut rng,
        );
        results.push(("layer_norm", e));

        let mut mha = P(
            MultiHeadAttention::new("a", 8, 2, &mut rng).unwrap(),
            x.clone(),
            y.clone(),
        );
        let e = grad_check(
            &mut mha,
            |m, g| {
                m.0.params_mut().iter_mut().for_each(|p| p.tensor.zero_grad());
                let (out, c) = m.0.forward(&m.1, &m.1, &m.1, None).unwrap();
                let (l, dl) = mse_grad(&out, &m.2);
                if g {
                    let (dq, dk, dv) = m.0.backward(&c, &dl);
                    let _ = (dq, dk, dv);
                }
                l
            },
            1e-5,
            8,
            &mut rng,
        );
        results.push(("multi_head_attention", e));

        for (name, padding, k, dil) in [
            ("conv1d_same", Padding::Same, 3usize, 1usize),
            ("conv1d_causal_dilated", Padding::Causal, 2, 4),
        ] {
            let mut conv = P(
                Conv1d::with_dilation("c", k, 8, 8, padding, dil, &mut rng).unwrap(),
                x.clone(),
                y.clone(),
            );
            let e = grad_check(
                &mut conv,
                |m, g| {
                    m.0.params_mut().iter_mut().for_each(|p| p.tensor.zero_grad());
                    let (out, c) = m.0.forward(&m.1);
                    let (l, dl) = mse_grad(&out, &m.2);
                    if g {
                        m.0.backward(&c, &dl);
                    }
                    l
                },
                1e-5,
                12,
                &mut rng,
            );
            results.push((name, e));
        }

        let mut rnn = P(
            BiRnn::new("r", 8, 4, &mut rng),
            x.clone(),
            Tensor::matrix(6, 8, (0..48).map(|v| (v as f64 * 0.21).sin()).collect()),
        );
        let e = grad_check(
            &mut rnn,
            |m, g| {
                m.0.params_mut().iter_mut().for_each(|p| p.tensor.zero_grad());
                let (out, c) = m.0.forward(&m.1);
                let (l, dl) = mse_grad(&out, &m.2);
                if g {
                    m.0.backward(&c, &dl);
                }
                l
            },
            1e-5,
            10,
            &mut rng,
        );
        results.push(("bidirectional_rnn", e));

        let mut hw = P(Highway::new("h", 8, &mut rng), x.clone(), y.clone());
        let e = grad_check(
            &mut hw,
            |m, g| {
                m.0.params_mut().iter_mut().for_each(|p| p.tensor.zero_grad());
                let (out, c) = m.0.forward(&m.1);
                let (l, dl) = mse_grad(&out, &m.2);
                if g {
                    m.0.backward(&c, &dl);
                }
                l
            },
            1e-5,
            10,
            &mut rng,
        );
        results.push(("highway", e));

        // pointwise activations and the categorical readout as a composite
        let mut act = P(Linear::new("l", 8, 10, &mut rng), x.clone(), Tensor::zeros(vec![1]));
        let targets = [0usize, 3, 9, 5, 2, 7];
        let e = grad_check(
            &mut act,
            |m, g| {
                m.0.params_mut().iter_mut().for_each(|p| p.tensor.zero_grad());
                let (h, c1) = m.0.forward(&m.1);
                let (hr, hc) = relu(&h);
                let (th, tc) = svskit::neural::tanh_forward(&hr);
                let (sg, sc) = svskit::neural::sigmoid(&th);
                let (nll, c2) = softmax_nll(&sg, &targets);
                let l = nll.iter().sum::<f64>() / nll.len() as f64;
                if g {
                    let w = vec![1.0 / nll.len() as f64; nll.len()];
                    let d = softmax_nll_backward(&c2, &w);
                    let d = sigmoid_backward(&sc, &d);
                    let d = tanh_backward(&tc, &d);
                    let d = relu_backward(&hc, &d);
                    m.0.backward(&c1, &d);
                }
                l
            },
            1e-5,
            12,
            &mut rng,
        );
        results.push(("activations_softmax_nll", e));
    }

    // full front-end at the pinned 2-layer / 64-dim configuration
    {
        let cfg = FrontEndConfig {
            layers: 2,
            model_dim: 64,
            heads: 2,
            conv_kernel: 3,
            pitch_placement: PitchPlacement::Both,
            output_head: OutputHead::Mel,
            use_postnet: true,
            use_cbhg: false,
            speaker_count: 2,
        };
        let mut model = FrontEnd::new(cfg, 3).unwrap();
        let durations = vec![2usize, 1, 3];
        let frames: usize = durations.iter().sum();
        let batch = Batch {
            phones: vec![4, 28, 40],
            pitch: vec![60, 64, 0],
            durations,
            target: Tensor::matrix(
                frames,
                80,
                (0..frames * 80).map(|v| ((v as f64) * 0.13).sin()).collect(),
            ),
            speaker: 1,
        };
        let e = grad_check(
            &mut model,
            |m, g| {
                m.zero_grad();
                m.train_forward_backward(&batch, g).unwrap().total
            },
            1e-5,
            1,
            &mut rng,
        );
        results.push(("front_end_2layer_64dim", e));
    }

    // full WaveNet at the pinned 4-layer / 16-channel configuration
    {
        let cfg = WaveNetConfig {
            layers: 4,
            residual_channels: 16,
            skip_channels: 16,
            feature_dim: 80,
            pitch_embed_dim: 8,
            use_pitch: true,
        };
        let mut wn = WaveNet::new(cfg, 5).unwrap();
        let codes: Vec<u8> = (0..160)
            .map(|i| mu_law_encode(0.4 * (i as f64 * 0.09).sin()))
            .collect();
        let features = Tensor::matrix(1, 80, (0..80).map(|v| (v as f64 * 0.05).sin()).collect());
        let pitch = PitchFrameTrack(vec![62]);
        let e = grad_check(
            &mut wn,
            |m, g| {
                m.zero_grad();
                let nll = m.nll_window(&codes, &features, Some(&pitch), 30..62, g).unwrap();
                nll.iter().sum::<f64>() / nll.len() as f64
            },
            1e-5,
            1,
            &mut rng,
        );
        results.push(("wavenet_4layer_16ch", e));
    }

    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    for (name, err) in &results {
        assert!(*err < 1e-4, "{name}: relative error {err}");
        worst = worst.max(*err);
    }
    assert!(elapsed < Duration::from_secs(120), "gradient suite took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 (gradient suite): PASS — {} checks, worst relative error {worst:.2e}, {:.1}s",
        results.len(),
        elapsed.as_secs_f64()
    );
}

// -------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_toy_overfit() {
    let fx = overfit_fixture();
    assert!(
        fx.reached_at.is_some(),
        "training Mel-MSE {} after {} steps never dropped below 0.01",
        fx.final_mse,
        fx.steps_run
    );
    assert!(fx.final_mse < 0.01, "final Mel-MSE {}", fx.final_mse);
    assert!(
        fx.elapsed < Duration::from_secs(300),
        "overfit took {:?}",
        fx.elapsed
    );
    println!(
        "ACCEPTANCE 2 (toy overfit): PASS — Mel-MSE {:.5} at step {} of 2000, {:.0}s of 300s",
        fx.final_mse,
        fx.reached_at.unwrap(),
        fx.elapsed.as_secs_f64()
    );
}

// -------------------------------------------------------------- criterion 3

fn placement_spec(name: &str, steps: u64) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        sweep: SweepKind::Placement,
        seed: 21,
        steps,
        warmup: 60,
        train_utterances: 3,
        eval_utterances: 2,
        gl_iters: 10,
        base: FrontEndConfig::default(),
        cbhg: None,
        mos_csv: None,
    }
}

#[test]
fn criterion_3_placement_harness_reproducible() {
    let corpus = tempfile::tempdir().unwrap();
    generate_synthetic_corpus(&toy_spec(3, 21), corpus.path()).unwrap();

    let runs = tempfile::tempdir().unwrap();
    let out1 = run_experiment(corpus.path(), &placement_spec("sweep-a", 120), runs.path()).unwrap();
    let out2 = run_experiment(corpus.path(), &placement_spec("sweep-b", 120), runs.path()).unwrap();

    let statuses: Vec<VariantStatus> =
        serde_json::from_str(&std::fs::read_to_string(out1.join("status.json")).unwrap()).unwrap();
    assert_eq!(statuses.len(), 3);
    for s in &statuses {
        assert_eq!(s.status, "ok", "variant {} failed", s.label);
    }
    let table = std::fs::read_to_string(out1.join("table2.txt")).unwrap();
    for label in ["encoder-only", "decoder-only", "both"] {
        assert!(table.contains(label), "missing {label} in\n{table}");
    }
    assert!(table.starts_with("Model"), "Table-2 schema header: {table}");
    assert!(table.contains("Mel-MSE"), "{table}");

    let a = std::fs::read(out1.join("metrics.csv")).unwrap();
    let b = std::fs::read(out2.join("metrics.csv")).unwrap();
    assert_eq!(a, b, "metrics.csv must be byte-identical across reruns");
    println!(
        "ACCEPTANCE 3 (placement harness): PASS — 3 variants ok, report byte-reproducible ({} bytes)",
        a.len()
    );
}

// -------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_pitch_condition_contrast() {
    // 4a: placement PA ordering on a pitch-varying corpus
    let corpus = tempfile::tempdir().unwrap();
    generate_synthetic_corpus(&toy_spec(3, 31), corpus.path()).unwrap();
    let runs = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        name: "pa-contrast".into(),
        seed: 31,
        steps: 300,
        warmup: 150,
        train_utterances: 3,
        eval_utterances: 3,
        gl_iters: 20,
        ..placement_spec("pa-contrast", 300)
    };
    let out = run_experiment(corpus.path(), &spec, runs.path()).unwrap();
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut pa = std::collections::BTreeMap::new();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        pa.insert(cells[0].to_string(), cells[3].parse::<f64>().unwrap());
    }
    let (enc, dec) = (pa["encoder-only"], pa["decoder-only"]);
    assert!(
        enc >= dec,
        "encoder-only PA {enc} fell below decoder-only PA {dec}"
    );

    // 4b: pitch-conditioned WaveNet reaches lower held-out NLL than the
    // unconditioned one after identical training
    let wn_corpus = tempfile::tempdir().unwrap();
    generate_synthetic_corpus(&toy_spec(44, 41), wn_corpus.path()).unwrap();
    let utts = load_corpus(wn_corpus.path(), 44);
    let (train, held) = utts.split_at(24);
    let train_ex: Vec<_> = train.iter().map(|u| vocoder_example(u).unwrap()).collect();
    let held_ex: Vec<_> = held[..20].iter().map(|u| vocoder_example(u).unwrap()).collect();

    let base = WaveNetConfig {
        layers: 8,
        residual_channels: 16,
        skip_channels: 32,
        feature_dim: 80,
        pitch_embed_dim: 16,
        use_pitch: true,
    };
    let train_spec = |use_pitch: bool| TrainVocoderSpec {
        model: WaveNetConfig { use_pitch, ..base.clone() },
        seed: 41,
        steps: 350,
        lr: 2e-3,
        crop: 1280,
    };
    let mut conditioned = train_wavenet_model(&train_ex, &train_spec(true), |_, _| {}).unwrap();
    let mut unconditioned = train_wavenet_model(&train_ex, &train_spec(false), |_, _| {}).unwrap();

    // paired per-utterance mean NLL over a fixed window
    let window = 2000..18_000usize;
    let mut diffs = Vec::with_capacity(held_ex.len());
    for ex in &held_ex {
        let end = window.end.min(ex.codes.len());
        let w = window.start..end;
        let c = conditioned
            .nll_window(&ex.codes, &ex.mel, Some(&ex.pitch), w.clone(), false)
            .unwrap();
        let u = unconditioned
            .nll_window(&ex.codes, &ex.mel, None, w, false)
            .unwrap();
        let mc = c.iter().sum::<f64>() / c.len() as f64;
        let mu = u.iter().sum::<f64>() / u.len() as f64;
        diffs.push(mu - mc);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    // t quantile for 19 degrees of freedom at 97.5%
    let half = 2.093024 * (var / n).sqrt();
    let lower = mean - half;
    assert!(
        lower > 0.0,
        "NLL margin {mean:.4} ± {half:.4} does not exclude zero over {} utterances",
        diffs.len()
    );
    println!(
        "ACCEPTANCE 4 (pitch-condition contrast): PASS — PA encoder-only {enc:.2} >= decoder-only {dec:.2}; WaveNet NLL margin {mean:.4} (95% CI lower bound {lower:.4}) over {} held-out utterances",
        diffs.len()
    );
}

// -------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_griffin_lim() {
    // steady harmonic tones (12 partials, 1/h rolloff, dispersed phases)
    // across a musically representative pitch set
    fn harmonic_magnitude(f0: f64) -> svskit::dsp::LinearSpectrogram {
        let n = 2 * svskit::dsp::SAMPLE_RATE as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / svskit::dsp::SAMPLE_RATE as f64;
                let mut x = 0.0;
                for h in 1..=12usize {
                    let phase = (h * h) as f64 * 1.7;
                    x += (h as f64).recip()
                        * (2.0 * std::f64::consts::PI * h as f64 * f0 * t + phase).sin();
                }
                0.2 * x
            })
            .collect();
        let w = svskit::dsp::Waveform::new(samples, svskit::dsp::SAMPLE_RATE);
        stft_magnitude(&frame_signal(&w).unwrap())
    }

    let mut report = Vec::new();
    let mut worst_sc: f64 = 0.0;
    let mut worst_time = Duration::ZERO;
    for f0 in [220.0, 261.63, 329.63, 392.0, 440.0, 523.25] {
        let mag = harmonic_magnitude(f0);
        let start = Instant::now();
        let full = griffin_lim(&mag, 60);
        let elapsed = start.elapsed();
        let sc_final = spectral_convergence(&full, &mag);
        assert!(sc_final < 0.1, "f0 {f0}: spectral convergence {sc_final}");
        assert!(elapsed < Duration::from_secs(10), "f0 {f0}: took {elapsed:?}");

        let mut prev = f64::INFINITY;
        for iters in [5usize, 15, 30, 60] {
            let sc = spectral_convergence(&griffin_lim(&mag, iters), &mag);
            assert!(
                sc <= prev,
                "f0 {f0}: convergence worsened at {iters} iterations: {sc} > {prev}"
            );
            prev = sc;
        }
        report.push(format!("{f0}:{sc_final:.4}"));
        worst_sc = worst_sc.max(sc_final);
        worst_time = worst_time.max(elapsed);
    }
    println!(
        "ACCEPTANCE 5 (griffin-lim): PASS — 60-iteration convergence {} (worst {worst_sc:.4}, slowest {:.1}s per utterance)",
        report.join(" "),
        worst_time.as_secs_f64()
    );
}

// -------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_exact_oracles() {
    // pitch quantization round-trips every semitone
    for p in PITCH_MIN..=PITCH_MAX {
        assert_eq!(quantize_pitch(semitone_to_hz(p)).unwrap(), p);
    }

    // mu-law round-trip on a 1e-4 grid
    let mut worst = 0.0f64;
    let mut x = -1.0;
    while x <= 1.0 {
        worst = worst.max((mu_law_decode(mu_law_encode(x)) - x).abs());
        x += 1e-4;
    }
    assert!(worst <= 0.05, "mu-law round-trip error {worst}");

    // length regulation conserves frames on 1,000 random cases
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    use rand::Rng;
    for _ in 0..1000 {
        let phones = rng.gen_range(1..20);
        let durations: Vec<usize> = (0..phones).map(|_| rng.gen_range(0..9)).collect();
        let total: usize = durations.iter().sum();
        let enc = Tensor::matrix(phones, 4, (0..phones * 4).map(|v| v as f64).collect());
        match length_regulate(&enc, &durations) {
            Ok(out) => assert_eq!(out.rows(), total),
            Err(_) => assert_eq!(total, 0),
        }
    }

    // PA and MSE against brute-force oracles on 100 random tracks
    for _ in 0..100 {
        let len = rng.gen_range(4..60);
        let reference: Vec<f64> = (0..len)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(80.0..800.0) })
            .collect();
        let predicted: Vec<f64> = reference
            .iter()
            .map(|f| {
                if rng.gen_bool(0.1) {
                    0.0
                } else {
                    f * 2f64.powf(rng.gen_range(-1.2..1.2) / 12.0)
                }
            })
            .collect();
        // brute-force: count per frame
        let mut voiced = 0;
        let mut ok = 0;
        for (r, p) in reference.iter().zip(&predicted) {
            if *r > 0.0 {
                voiced += 1;
                if *p > 0.0 && (12.0 * (p / r).log2()).abs() <= 0.5 {
                    ok += 1;
                }
            }
        }
        let got = pitch_accuracy(&F0Track(reference.clone()), &F0Track(predicted.clone()));
        if voiced == 0 {
            assert!(got.is_err());
        } else {
            let want = 100.0 * ok as f64 / voiced as f64;
            assert!((got.unwrap() - want).abs() < 1e-9);
        }

        let a: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let want: f64 =
            a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / len as f64;
        assert!((mse_metric(&a, &b).unwrap() - want).abs() < 1e-9);
    }

    // frame-count formula against the loop oracle for every N in range
    for n in 800..=50_000usize {
        let mut count = 0;
        let mut start = 0;
        while start + 800 <= n {
            count += 1;
            start += 160;
        }
        assert_eq!(frame_count(n), count, "N = {n}");
    }

    println!(
        "ACCEPTANCE 6 (exact oracles): PASS — pitch round-trip, mu-law (worst {worst:.4}), regulator, PA/MSE oracles, frame counts"
    );
}

// -------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_end_to_end_smoke() {
    let fx = overfit_fixture();
    let out_dir = tempfile::tempdir().unwrap();

    // score JSON → features → (Mel, IMel+GL) → WAV, PA against frame pitch
    let mut pa_sum = 0.0;
    for (i, utt) in fx.utterances.iter().enumerate() {
        let out = fx
            .model
            .synthesize_features(&utt.phones, &utt.pitch_ids, 0, None)
            .unwrap();
        let wave = synthesize_waveform(
            &out.features,
            OutputHead::Mel,
            VocoderKind::ImelGriffinLim,
            &SynthesisOptions { gl_iters: 40, ..Default::default() },
        )
        .unwrap();
        let path = out_dir.path().join(format!("gl_{i}.wav"));
        write_wav(&path, &wave).unwrap();
        let reread = read_wav(&path).unwrap();
        let predicted = estimate_f0(&reread);
        pa_sum += pitch_accuracy(&id_track(&out.frame_pitch), &predicted).unwrap();
    }
    let pa = pa_sum / fx.utterances.len() as f64;
    assert!(pa >= 70.0, "griffin-lim path PA {pa:.2} below 70");

    // (Mel, WaveNet) on a briefly-trained toy checkpoint: finite, audible
    let ex = vocoder_example(&fx.utterances[0]).unwrap();
    let spec = TrainVocoderSpec {
        model: WaveNetConfig {
            layers: 6,
            residual_channels: 16,
            skip_channels: 32,
            feature_dim: 80,
            pitch_embed_dim: 16,
            use_pitch: true,
        },
        seed: 7,
        steps: 60,
        lr: 2e-3,
        crop: 1024,
    };
    let wavenet = train_wavenet_model(std::slice::from_ref(&ex), &spec, |_, _| {}).unwrap();
    let out = fx
        .model
        .synthesize_features(&fx.utterances[0].phones, &fx.utterances[0].pitch_ids, 0, None)
        .unwrap();
    let wave = synthesize_waveform(
        &out.features,
        OutputHead::Mel,
        VocoderKind::WaveNet,
        &SynthesisOptions {
            wavenet: Some(&wavenet),
            frame_pitch: Some(&out.frame_pitch),
            seed: 9,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(wave.len(), frames_to_samples(out.features.rows()));
    assert!(wave.samples.iter().all(|s| s.is_finite()));
    assert!(wave.rms() > 0.0, "silent wavenet output");
    write_wav(&out_dir.path().join("wavenet.wav"), &wave).unwrap();

    println!(
        "ACCEPTANCE 7 (end-to-end smoke): PASS — GL path PA {pa:.2}% (target 70), WaveNet path RMS {:.4}",
        wave.rms()
    );
}

// -------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_cbhg_beats_imel() {
    let corpus = tempfile::tempdir().unwrap();
    generate_synthetic_corpus(&toy_spec(6, 81), corpus.path()).unwrap();
    let utts = load_corpus(corpus.path(), 6);
    let (train, held) = utts.split_at(4);

    let pairs: Vec<(Tensor, Tensor)> = train
        .iter()
        .map(|u| svskit_cli::train::cbhg_pair(u).unwrap())
        .collect();
    let spec = TrainCbhgSpec {
        model: CbhgConfig { bank_kernels: 8, bank_channels: 8, highway_layers: 2, rnn_hidden: 32 },
        seed: 81,
        steps: 300,
        lr: 3e-4,
        crop_frames: 120,
    };
    let model: CbhgModel = train_cbhg_model(&pairs, &spec, |_, _| {}).unwrap();

    let mut mae_cbhg = 0.0;
    let mut mae_imel = 0.0;
    let mut count = 0.0;
    for utt in held {
        let feats = extract(utt).unwrap();
        let frames = utt.total_frames();
        let mel = MelSpectrogram::from_flat(
            feats.mel.flat()[..frames * 80].to_vec(),
            frames,
        );
        let target = &feats.linear;
        let cbhg_linear = model.cbhg_mel_to_linear(&mel);
        let imel_linear = svskit::dsp::imel_project(&mel);
        for t in 0..frames {
            for j in 0..svskit::dsp::LINEAR_BINS {
                mae_cbhg += (cbhg_linear.row(t)[j] - target.row(t)[j]).abs();
                mae_imel += (imel_linear.row(t)[j] - target.row(t)[j]).abs();
                count += 1.0;
            }
        }
    }
    mae_cbhg /= count;
    mae_imel /= count;
    assert!(
        mae_cbhg < mae_imel,
        "held-out CBHG MAE {mae_cbhg:.5} not below IMel baseline {mae_imel:.5}"
    );
    println!(
        "ACCEPTANCE 8 (cbhg vs imel): PASS — held-out linear MAE: cbhg {mae_cbhg:.5} < imel {mae_imel:.5}"
    );
}
