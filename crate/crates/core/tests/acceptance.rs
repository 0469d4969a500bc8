//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are printed even when output is captured;
//! the process exits non-zero if any criterion fails.
//!
//! Tolerances and training settings are pinned below.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use downscale_core::arch::{ArchitectureSpec, Checkpoint, Family, Model, ModelProbe};
use downscale_core::data::{
    stats_from_fields, synth_dataset, synthesize_pairs, synthetic_field, DatasetManifest, PairSet, Region,
    SampleMeta, SynthKind, SynthOptions,
};
use downscale_core::eval::{
    evaluate_model, evaluate_with_threads, mse, r2, run_protocol, HeldOut, Mode, ProtocolSpec, Predictor,
    RunOptions,
};
use downscale_core::grid::{
    avg_pool, bicubic_upsample, decode_grd1, encode_grd1, fft2, ifft2, Tensor,
};
use downscale_core::layers::gradcheck::layer_probe;
use downscale_core::layers::{grad_check, GradCheckConfig, Init, LayerKind, Parameter};
use downscale_core::optim::{adam_step, train, AdamConfig, AdamState, TrainingConfig};
use downscale_core::{Error, GridTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    // `cargo test -- <filter>` passes arguments through; a filter that does
    // not match "acceptance" skips the suite like libtest would.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient integrity", c1_gradients),
        ("kernel oracles", c2_kernels),
        ("adam trace", c3_adam),
        ("overfit probe", c4_overfit),
        ("beats bicubic", c5_beats_bicubic),
        ("zero-shot to fine-tune", c6_fine_tune),
        ("determinism and persistence", c7_determinism),
        ("leakage guards", c8_leakage),
        ("shape contract", c9_shapes),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {} {name}: {tag} ({secs:.1}s) {detail}", i + 1);
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

// Criterion 1 ---------------------------------------------------------------

const GRAD_TOL: f64 = 1e-3;
const GRAD_SEEDS: u64 = 5;
const GRAD_BUDGET: Duration = Duration::from_secs(120);

fn c1_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut runs = 0;
    let mut record = |name: String, err: f64, checked: usize| -> Result<(), String> {
        if checked == 0 {
            return Err(format!("{name}: no coordinates checked"));
        }
        if err > worst.0 {
            worst = (err, name);
        }
        runs += 1;
        Ok(())
    };
    for kind in LayerKind::ALL {
        for seed in 0..GRAD_SEEDS {
            let cfg = GradCheckConfig { seed, ..GradCheckConfig::default() };
            let r = grad_check(&mut layer_probe(kind, seed), &cfg).map_err(|e| e.to_string())?;
            record(format!("{kind}/{seed}"), r.max_rel_error, r.checked)?;
        }
    }
    for family in Family::ALL {
        for seed in 0..GRAD_SEEDS {
            let spec = ArchitectureSpec::reduced(family, 2, 16);
            let model = Model::<f64>::build(&spec, seed).map_err(|e| e.to_string())?;
            let lr = Init::new(seed + 100).uniform(&[2, 1, 8, 8], -1.0, 1.0);
            let hr = Init::new(seed + 200).uniform(&[2, 1, 16, 16], -1.0, 1.0);
            let cfg = GradCheckConfig { seed, ..GradCheckConfig::default() };
            let r = grad_check(&mut ModelProbe::new(model, lr, hr), &cfg).map_err(|e| e.to_string())?;
            record(format!("{family}/{seed}"), r.max_rel_error, r.checked)?;
        }
    }
    let elapsed = start.elapsed();
    check(
        worst.0 <= GRAD_TOL && elapsed <= GRAD_BUDGET,
        format!(
            "{runs} checks, worst rel err {:.2e} ({}) <= {GRAD_TOL:e}, {:.1}s <= {}s",
            worst.0,
            worst.1,
            elapsed.as_secs_f64(),
            GRAD_BUDGET.as_secs()
        ),
    )
}

// Criterion 2 ---------------------------------------------------------------

fn noise(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn c2_kernels() -> Outcome {
    // avg_pool against explicit block sums.
    let mut pool_err = 0.0f64;
    for (shape, k) in [(vec![3, 64, 64], 8usize), (vec![2, 32, 48], 2), (vec![16, 16], 4)] {
        let t = noise(&shape, k as u64).cast::<f32>();
        let got = avg_pool(&t, k).map_err(|e| e.to_string())?;
        let (h, w) = t.hw();
        let mut i = 0;
        for p in 0..t.planes() {
            for by in 0..h / k {
                for bx in 0..w / k {
                    let mut s = 0.0f64;
                    for y in 0..k {
                        for x in 0..k {
                            s += t.data()[p * h * w + (by * k + y) * w + bx * k + x] as f64;
                        }
                    }
                    pool_err = pool_err.max((got.data()[i] as f64 - s / (k * k) as f64).abs());
                    i += 1;
                }
            }
        }
    }
    // Bicubic on affine fields, HR centres mapped to LR cell-centre coordinates.
    let mut cubic_err = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for factor in [2usize, 4, 8] {
        let (a, bx, by): (f64, f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let lr = GridTensor::from_fn(9, 7, |r, c| (a + bx * c as f64 + by * r as f64) as f32);
        let hr = bicubic_upsample(&lr, factor).map_err(|e| e.to_string())?;
        let s = factor as f64;
        for r in 0..9 * factor {
            for c in 0..7 * factor {
                let want = a + bx * ((c as f64 + 0.5) / s - 0.5) + by * ((r as f64 + 0.5) / s - 0.5);
                cubic_err = cubic_err.max((hr.data()[r * 7 * factor + c] as f64 - want).abs());
            }
        }
    }
    // FFT round trip and Parseval on f32 grids.
    let t = noise(&[2, 64, 32], 3).cast::<f32>();
    let spec = fft2(&t).map_err(|e| e.to_string())?;
    let back = ifft2(&spec).map_err(|e| e.to_string())?;
    let fft_err = t.data().iter().zip(back.data()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs() as f64));
    let energy: f64 = t.data().iter().map(|&v| (v as f64).powi(2)).sum();
    let spectral: f64 = spec.data().iter().map(|c| c.norm_sqr() as f64).sum::<f64>() / (64 * 32) as f64;
    let parseval = (energy - spectral).abs() / energy;
    // Metrics against scalar loops.
    let p = noise(&[4096], 4);
    let q = noise(&[4096], 5).map(|v| 3.0 * v + 1.0);
    let (mut sse, mut mean) = (0.0, 0.0);
    for i in 0..q.len() {
        sse += (p.data()[i] - q.data()[i]).powi(2);
        mean += q.data()[i];
    }
    mean /= q.len() as f64;
    let mut sst = 0.0;
    for v in q.data() {
        sst += (v - mean).powi(2);
    }
    let mse_err = (mse(&p, &q).map_err(|e| e.to_string())? - sse / q.len() as f64).abs();
    let r2_err = (r2(&p, &q).map_err(|e| e.to_string())? - (1.0 - sse / sst)).abs();
    check(
        pool_err <= 1e-6 && cubic_err <= 1e-5 && fft_err <= 1e-5 && parseval <= 1e-4 && mse_err <= 1e-7 && r2_err <= 1e-7,
        format!(
            "pool {pool_err:.1e} <= 1e-6, bicubic affine {cubic_err:.1e} <= 1e-5, fft round trip {fft_err:.1e} <= 1e-5, \
             parseval {parseval:.1e} <= 1e-4, mse {mse_err:.1e} / r2 {r2_err:.1e} <= 1e-7"
        ),
    )
}

// Criterion 3 ---------------------------------------------------------------

/// θ after each of 10 Adam steps on f(θ) = θ² from θ = 1 with lr 0.1,
/// β = (0.9, 0.999), eps 1e-8, from a standalone Python script.
const ADAM_TRACE: [f64; 10] = [
    0.9000000005,
    0.8004122286917928,
    0.7015862729460303,
    0.603939060573746,
    0.507963659264342,
    0.4142364559936619,
    0.3234207049391021,
    0.23626372452104188,
    0.1535845600703636,
    0.07624915560691221,
];

fn c3_adam() -> Outcome {
    let cfg = AdamConfig { learning_rate: 0.1, ..AdamConfig::default() };
    let mut params = vec![Parameter::new("theta", Tensor::<f64>::filled(&[1], 1.0))];
    let mut state = AdamState::new(&params);
    let mut trace_err = 0.0f64;
    for want in ADAM_TRACE {
        let theta = params[0].value.data()[0];
        params[0].grad.data_mut()[0] = 2.0 * theta;
        adam_step(&mut params, &mut state, &cfg);
        trace_err = trace_err.max((params[0].value.data()[0] - want).abs());
    }
    let mut zero = vec![Parameter::new("w", noise(&[3, 4], 6))];
    let before = zero[0].value.clone();
    let mut zstate = AdamState::new(&zero);
    for _ in 0..3 {
        adam_step(&mut zero, &mut zstate, &cfg);
    }
    let no_op = zero[0].value == before;
    check(
        trace_err <= 1e-7 && no_op,
        format!("10-step trace max err {trace_err:.1e} <= 1e-7, zero-gradient step no-op: {no_op}"),
    )
}

// Criterion 4 ---------------------------------------------------------------

const PROBE_PAIRS: usize = 8;
const PROBE_HR: usize = 32;
const PROBE_STEPS: usize = 500;
const PROBE_LR: f64 = 1e-2;
const PROBE_KIND: SynthKind = SynthKind::BandedSpectrum;
/// Steep spectrum: little energy near the LR Nyquist, so the pairs are
/// learnable by a small local model rather than dominated by pooling loss.
const PROBE_BETA: f64 = 8.0;
const PROBE_TARGET: f64 = 1e-3;
const PROBE_BUDGET: Duration = Duration::from_secs(300);

fn meta() -> SampleMeta {
    SampleMeta {
        variable: "tas".into(),
        units: "K".into(),
        bounds: Region::DACH,
        source: "synthetic".into(),
        timestamp: "t".into(),
    }
}

fn field_set(kind: SynthKind, beta: f64, n: usize, hr: usize, scale: usize, seed: u64) -> Result<PairSet, Error> {
    let fields = (0..n as u64)
        .map(|i| Ok((synthetic_field(kind, hr, seed, i, beta)?.cast(), meta())))
        .collect::<Result<Vec<_>, Error>>()?;
    let stats = stats_from_fields(fields.iter().map(|(g, m)| (g, m.variable.as_str())))?;
    PairSet::from_pairs(&synthesize_pairs(&fields, scale)?, &stats)
}

fn c4_overfit() -> Outcome {
    let set = field_set(PROBE_KIND, PROBE_BETA, PROBE_PAIRS, PROBE_HR, 2, 1).map_err(|e| e.to_string())?;
    let cfg = TrainingConfig {
        learning_rate: PROBE_LR,
        batch_size: PROBE_PAIRS,
        epochs: PROBE_STEPS,
        seed: 0,
        val_fraction: 0.0,
        ..TrainingConfig::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for family in Family::ALL {
        let t = Instant::now();
        let mut m = Model::build(&ArchitectureSpec::reduced(family, 2, PROBE_HR), 0).map_err(|e| e.to_string())?;
        train(&mut m, &set, None, &cfg, None).map_err(|e| e.to_string())?;
        let loss = evaluate_model(Predictor::Model(&m), &set).map_err(|e| e.to_string())?.mse;
        let el = t.elapsed();
        ok &= loss <= PROBE_TARGET && el <= PROBE_BUDGET;
        parts.push(format!("{family} {loss:.2e} in {:.0}s", el.as_secs_f64()));
    }
    check(
        ok,
        format!(
            "train MSE after {PROBE_STEPS} full-batch steps on {PROBE_PAIRS} pairs: {} (<= {PROBE_TARGET:e}, <= {}s each)",
            parts.join(", "),
            PROBE_BUDGET.as_secs()
        ),
    )
}

// Criterion 5 ---------------------------------------------------------------

const DESK_TRAIN: usize = 500;
const DESK_TEST: usize = 100;
const DESK_HR: usize = 64;
const DESK_SEED: u64 = 42;
const DESK_EPOCHS: usize = 40;
const DESK_BATCH: usize = 16;
const DESK_LR: f64 = 2e-3;
const DESK_BUDGET: Duration = Duration::from_secs(30 * 60);

fn c5_beats_bicubic() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = SynthOptions { test_count: DESK_TEST, ..SynthOptions::default() };
    let run = || -> Result<(String, bool), Error> {
        let m = synth_dataset(SynthKind::GaussianBumps, DESK_TRAIN + DESK_TEST, DESK_HR, DESK_SEED, dir.path(), &opts)?;
        let tr = m.load_samples(Some("train"))?;
        let te = m.load_samples(Some("test"))?;
        let stats = stats_from_fields(tr.iter().map(|(g, m)| (g, m.variable.as_str())))?;
        let train_set = PairSet::from_pairs(&synthesize_pairs(&tr, 2)?, &stats)?;
        let test_set = PairSet::from_pairs(&synthesize_pairs(&te, 2)?, &stats)?;
        let bic = evaluate_model(Predictor::Bicubic { scale: 2 }, &test_set)?;
        let cfg = TrainingConfig {
            learning_rate: DESK_LR,
            batch_size: DESK_BATCH,
            epochs: DESK_EPOCHS,
            seed: 0,
            val_fraction: 0.0,
            ..TrainingConfig::default()
        };
        let mut ok = true;
        let mut parts = vec![format!("bicubic mse {:.3e} r2 {:.5}", bic.mse, bic.r2)];
        for family in Family::ALL {
            let t = Instant::now();
            let mut model = Model::build(&ArchitectureSpec::reduced(family, 2, DESK_HR), 0)?;
            train(&mut model, &train_set, None, &cfg, None)?;
            let got = evaluate_model(Predictor::Model(&model), &test_set)?;
            let el = t.elapsed();
            ok &= got.mse <= bic.mse && got.r2 >= bic.r2 && el <= DESK_BUDGET;
            parts.push(format!("{family} mse {:.3e} r2 {:.5} ({:.0}s)", got.mse, got.r2, el.as_secs_f64()));
        }
        Ok((parts.join(", "), ok))
    };
    let (detail, ok) = run().map_err(|e| e.to_string())?;
    check(ok, format!("{DESK_TRAIN}/{DESK_TEST} {DESK_HR}x{DESK_HR} at 2x: {detail}"))
}

// Criterion 6 ---------------------------------------------------------------

const SIM_HR: usize = 32;
const SIM_A_FIELDS: usize = 200;
const SIM_B_FIELDS: usize = 300;
const SIM_B_TEST: usize = 60;

fn two_simulation_spec() -> serde_json::Value {
    json!({
        "kind": "two-simulation",
        "train_manifests": ["sim-a/manifest.json"],
        "eval_manifest": "sim-b/manifest.json",
        "held_out": {"product": "sim-b"},
        "scales": [2, 8],
        "modes": ["zero-shot", "fine-tune"],
        "fine_tune_fraction": 0.3,
        "models": ["bicubic", "cnn", "fno", "cnn-vit"],
        "seed": 0,
        "patch_size": SIM_HR,
        "architecture": "reduced",
        "training": {"epochs": 20, "batch_size": 16, "learning_rate": 2e-3, "val_fraction": 0.0},
        "fine_tuning": {"epochs": 20, "batch_size": 8, "learning_rate": 5e-4, "val_fraction": 0.0},
    })
}

fn c6_fine_tune() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = || -> Result<(String, bool), Error> {
        let a = SynthOptions { product: Some("sim-a".into()), ..SynthOptions::default() };
        let b = SynthOptions { product: Some("sim-b".into()), test_count: SIM_B_TEST, ..SynthOptions::default() };
        synth_dataset(SynthKind::GaussianBumps, SIM_A_FIELDS, SIM_HR, 1, &dir.path().join("sim-a"), &a)?;
        synth_dataset(SynthKind::AnisotropicBumps, SIM_B_FIELDS, SIM_HR, 2, &dir.path().join("sim-b"), &b)?;
        let spec: ProtocolSpec = serde_json::from_value(two_simulation_spec())?;
        let report = run_protocol(&spec, &RunOptions { base_dir: dir.path().to_path_buf(), ..RunOptions::default() })?;
        let mut ok = report.rows.len() == 16;
        let mut parts = Vec::new();
        for scale in [2, 8] {
            for model in ["bicubic", "cnn", "fno", "cnn-vit"] {
                for mode in [Mode::ZeroShot, Mode::FineTune] {
                    ok &= report.row(model, scale, mode).is_some();
                }
            }
            for model in ["cnn", "fno", "cnn-vit"] {
                let (Some(zs), Some(ft)) = (report.row(model, scale, Mode::ZeroShot), report.row(model, scale, Mode::FineTune))
                else {
                    continue;
                };
                ok &= ft.mse < zs.mse;
                parts.push(format!("{model} x{scale} {:.3e} -> {:.3e}", zs.mse, ft.mse));
            }
        }
        Ok((format!("{} rows; ZS -> FT mse: {}", report.rows.len(), parts.join(", ")), ok))
    };
    let (detail, ok) = run().map_err(|e| e.to_string())?;
    check(ok, detail)
}

// Criterion 7 ---------------------------------------------------------------

fn c7_determinism() -> Outcome {
    let set = field_set(SynthKind::GaussianBumps, 3.0, 24, 32, 2, 7).map_err(|e| e.to_string())?;
    let (train_set, val) = set.split(0.25, 3).map_err(|e| e.to_string())?;
    let cfg = TrainingConfig { epochs: 3, batch_size: 5, ..TrainingConfig::default() };
    let mut hist_diff = 0.0f64;
    let mut metric_diff = 0.0f64;
    let mut ckpt_exact = true;
    for family in Family::ALL {
        let spec = ArchitectureSpec::reduced(family, 2, 32);
        let run = || -> Result<_, Error> {
            let mut m = Model::build(&spec, 11)?;
            let h = train(&mut m, &train_set, val.as_ref(), &cfg, None)?;
            let metrics = evaluate_model(Predictor::Model(&m), &set)?;
            Ok((m, h, metrics))
        };
        let (m1, h1, e1) = run().map_err(|e| e.to_string())?;
        let (_, h2, e2) = run().map_err(|e| e.to_string())?;
        for (a, b) in h1.losses().iter().zip(h2.losses()) {
            hist_diff = hist_diff.max((a.0 - b.0).abs()).max((a.1.unwrap() - b.1.unwrap()).abs());
        }
        metric_diff = metric_diff.max((e1.mse - e2.mse).abs()).max((e1.r2 - e2.r2).abs());
        let bytes = Checkpoint::new(m1, None).to_bytes().map_err(|e| e.to_string())?;
        let back = Checkpoint::from_bytes(&bytes, "memory").map_err(|e| e.to_string())?;
        ckpt_exact &= back.to_bytes().map_err(|e| e.to_string())? == bytes;
    }
    let g = noise(&[3, 17, 11], 8).cast::<f32>();
    let enc = encode_grd1(&g);
    let dec = decode_grd1(&enc, "memory").map_err(|e| e.to_string())?;
    let grd_exact = dec.shape() == g.shape()
        && dec.data().iter().zip(g.data()).all(|(a, b)| a.to_bits() == b.to_bits())
        && encode_grd1(&dec) == enc;
    let model = Model::build(&ArchitectureSpec::reduced(Family::CnnVit, 2, 32), 5).map_err(|e| e.to_string())?;
    let serial = evaluate_with_threads(Predictor::Model(&model), &set, 1).map_err(|e| e.to_string())?;
    let parallel = evaluate_with_threads(Predictor::Model(&model), &set, 4).map_err(|e| e.to_string())?;
    let par_diff = (serial.mse - parallel.mse).abs().max((serial.r2 - parallel.r2).abs());
    check(
        hist_diff <= 1e-6 && metric_diff <= 1e-6 && ckpt_exact && grd_exact && par_diff <= 1e-9,
        format!(
            "history {hist_diff:.1e} / metrics {metric_diff:.1e} <= 1e-6, checkpoint bit-exact {ckpt_exact}, \
             GRD1 bit-exact {grd_exact}, serial vs parallel {par_diff:.1e} <= 1e-9"
        ),
    )
}

// Criterion 8 ---------------------------------------------------------------

const LEAK_CASES: usize = 20;

fn write_manifest(dir: &Path, file: &str, name: &str, variables: &[String], region: Region) -> Result<PathBuf, Error> {
    // The referenced sample never exists: any data access would surface as
    // an I/O error instead of the expected protocol error.
    let mut m = DatasetManifest::new(
        name,
        variables.to_vec(),
        (0.25, 0.25),
        region,
        vec![PathBuf::from("absent-00000.grd1")],
        vec!["train".into()],
    )?;
    let path = dir.join(file);
    m.save(&path)?;
    Ok(path)
}

fn rejected(dir: &Path, kind: &str, held_out: HeldOut) -> Result<bool, Error> {
    let spec: ProtocolSpec = serde_json::from_value(json!({
        "kind": kind,
        "train_manifests": ["train.json"],
        "eval_manifest": "eval.json",
        "held_out": held_out,
        "architecture": "reduced",
        "patch_size": 32,
    }))?;
    let opts = RunOptions { base_dir: dir.to_path_buf(), ..RunOptions::default() };
    Ok(matches!(run_protocol(&spec, &opts), Err(Error::Protocol(_))))
}

fn c8_leakage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = [0usize; 3];
    let run = |rng: &mut ChaCha8Rng, counts: &mut [usize; 3]| -> Result<(), Error> {
        for _ in 0..LEAK_CASES {
            let dir = tempfile::tempdir()?;
            let lat = rng.random_range(-80.0..70.0);
            let lon = rng.random_range(-170.0..160.0);
            let train = Region::new(lat, lat + rng.random_range(1.0..10.0), lon, lon + rng.random_range(1.0..10.0))?;
            let y = rng.random_range(train.lat_min..train.lat_max);
            let x = rng.random_range(train.lon_min..train.lon_max);
            let held = Region::new(y, (y + rng.random_range(0.5..8.0)).min(90.0), x, (x + rng.random_range(0.5..8.0)).min(180.0))?;
            let vars = vec!["tas".to_string()];
            write_manifest(dir.path(), "train.json", "era5", &vars, train)?;
            write_manifest(dir.path(), "eval.json", "era5-held", &vars, held)?;
            counts[0] += rejected(dir.path(), "spatial", HeldOut::Region(held))? as usize;

            let dir = tempfile::tempdir()?;
            let shared = format!("v{}", rng.random_range(0..1000));
            let train_vars = vec!["tas".to_string(), shared.clone()];
            write_manifest(dir.path(), "train.json", "era5", &train_vars, Region::DACH)?;
            write_manifest(dir.path(), "eval.json", "era5-eval", &[shared.clone()], Region::DACH)?;
            counts[1] += rejected(dir.path(), "variable", HeldOut::Variable(shared))? as usize;

            let dir = tempfile::tempdir()?;
            let product = format!("product-{}", rng.random_range(0..1000));
            write_manifest(dir.path(), "train.json", &product, &vars, Region::DACH)?;
            write_manifest(dir.path(), "eval.json", &product, &vars, Region::DACH)?;
            let kind = if rng.random_bool(0.5) { "product" } else { "two-simulation" };
            counts[2] += rejected(dir.path(), kind, HeldOut::Product(product))? as usize;
        }
        Ok(())
    };
    run(&mut rng, &mut counts).map_err(|e| e.to_string())?;
    check(
        counts.iter().all(|&c| c == LEAK_CASES),
        format!(
            "rejected before data access: overlapping region {}/{LEAK_CASES}, shared variable {}/{LEAK_CASES}, \
             shared product {}/{LEAK_CASES}",
            counts[0], counts[1], counts[2]
        ),
    )
}

// Criterion 9 ---------------------------------------------------------------

fn c9_shapes() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for scale in [2usize, 8] {
        for hr in [32usize, 64] {
            for family in Family::ALL {
                let spec = ArchitectureSpec::reduced(family, scale, hr);
                if spec.validate().is_err() || spec.check_hr_size(hr, hr).is_err() {
                    continue;
                }
                let lr_side = hr / scale;
                let model = Model::build(&spec, 0).map_err(|e| e.to_string())?;
                let lr = Init::new(1).uniform::<f32>(&[2, 1, lr_side, lr_side], -1.0, 1.0);
                let y = model.forward(&lr).map_err(|e| e.to_string())?;
                checked += 1;
                if y.shape() != [2, 1, lr_side * scale, lr_side * scale] {
                    bad.push(format!("{family} x{scale} hr {hr}: {:?}", y.shape()));
                }
            }
        }
    }
    check(
        bad.is_empty() && checked == 12,
        format!("{checked} scale/patch/architecture combinations give LR x scale outputs{}", if bad.is_empty() { String::new() } else { format!("; mismatches {bad:?}") }),
    )
}
