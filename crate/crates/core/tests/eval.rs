use std::path::{Path, PathBuf};

use downscale_core::arch::{ArchitectureSpec, Family, Model};
use downscale_core::data::{
    stats_from_fields, synth_dataset, synthesize_pairs, synthetic_field, DatasetManifest, PairSet, Region,
    SampleMeta, SynthKind, SynthOptions,
};
use downscale_core::eval::{
    check_leakage, emit_error_grids, evaluate_model, evaluate_with_threads, mse, r2, run_protocol, HeldOut, Mode,
    ProtocolSpec, Predictor, RunOptions,
};
use downscale_core::grid::{read_grd1, Tensor};
use downscale_core::Error;
use proptest::prelude::*;
use serde_json::json;

fn loop_mse(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - q[i]) * (p[i] - q[i]);
    }
    s / p.len() as f64
}

fn loop_r2(p: &[f64], q: &[f64]) -> f64 {
    let mut mean = 0.0;
    for v in q {
        mean += v;
    }
    mean /= q.len() as f64;
    let (mut res, mut tot) = (0.0, 0.0);
    for i in 0..p.len() {
        res += (q[i] - p[i]) * (q[i] - p[i]);
        tot += (q[i] - mean) * (q[i] - mean);
    }
    1.0 - res / tot
}

fn meta(variable: &str) -> SampleMeta {
    SampleMeta {
        variable: variable.into(),
        units: "K".into(),
        bounds: Region::DACH,
        source: "synthetic".into(),
        timestamp: "t".into(),
    }
}

fn pair_set(n: usize, hr: usize, scale: usize, seed: u64) -> PairSet {
    let fields: Vec<_> = (0..n as u64)
        .map(|i| (synthetic_field(SynthKind::GaussianBumps, hr, seed, i, 3.0).unwrap().cast(), meta("tas")))
        .collect();
    let stats = stats_from_fields(fields.iter().map(|(g, m)| (g, m.variable.as_str()))).unwrap();
    PairSet::from_pairs(&synthesize_pairs(&fields, scale).unwrap(), &stats).unwrap()
}

proptest! {
    #[test]
    fn metrics_match_scalar_loops(
        data in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..300),
    ) {
        let p: Vec<f64> = data.iter().map(|d| d.0).collect();
        let q: Vec<f64> = data.iter().map(|d| d.1).collect();
        prop_assume!(q.iter().any(|v| (v - q[0]).abs() > 1e-3));
        let tp = Tensor::new(vec![p.len()], p.clone()).unwrap();
        let tq = Tensor::new(vec![q.len()], q.clone()).unwrap();
        let m = loop_mse(&p, &q);
        prop_assert!((mse(&tp, &tq).unwrap() - m).abs() <= 1e-7 * m.max(1.0));
        let r = loop_r2(&p, &q);
        prop_assert!((r2(&tp, &tq).unwrap() - r).abs() <= 1e-7 * r.abs().max(1.0));
    }

    #[test]
    fn r2_is_affine_invariant_and_mse_scales_quadratically(
        data in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..100),
        a in 0.1f64..10.0,
        b in -100.0f64..100.0,
    ) {
        let p: Vec<f64> = data.iter().map(|d| d.0).collect();
        let q: Vec<f64> = data.iter().map(|d| d.1).collect();
        prop_assume!(q.iter().any(|v| (v - q[0]).abs() > 1e-2));
        let t = |v: &[f64]| Tensor::new(vec![v.len()], v.to_vec()).unwrap();
        let ap: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        let aq: Vec<f64> = q.iter().map(|v| a * v + b).collect();
        let r = r2(&t(&p), &t(&q)).unwrap();
        let ra = r2(&t(&ap), &t(&aq)).unwrap();
        prop_assert!((r - ra).abs() <= 1e-9 * r.abs().max(1.0));
        let m = mse(&t(&p), &t(&q)).unwrap();
        let ma = mse(&t(&ap), &t(&aq)).unwrap();
        prop_assert!((ma - a * a * m).abs() <= 1e-9 * ma.max(1.0));
    }
}

#[test]
fn metrics_reject_degenerate_input() {
    let c = Tensor::<f64>::filled(&[4, 4], 2.0);
    assert!(matches!(r2(&c, &c), Err(Error::UndefinedMetric(_))));
    let other = Tensor::<f64>::zeros(&[3, 4]);
    assert!(matches!(mse(&c, &other), Err(Error::Shape(_))));
}

#[test]
fn constant_target_set_has_no_r2() {
    let fields = vec![(Tensor::filled(&[16, 16], 1.0f32), meta("tas"))];
    let pairs = synthesize_pairs(&fields, 2).unwrap();
    let varied = synthetic_field(SynthKind::GaussianBumps, 16, 0, 0, 3.0).unwrap().cast();
    let stats = stats_from_fields(std::iter::once((&varied, "tas"))).unwrap();
    let set = PairSet::from_pairs(&pairs, &stats).unwrap();
    let err = evaluate_model(Predictor::Bicubic { scale: 2 }, &set).unwrap_err();
    assert!(matches!(err, Error::UndefinedMetric(_)), "{err}");
}

#[test]
fn zero_output_model_scores_no_better_than_the_mean() {
    let set = pair_set(6, 16, 2, 3);
    let mut m = Model::build(&ArchitectureSpec::reduced(Family::Cnn, 2, 16), 0).unwrap();
    let n = m.parameters().len();
    for p in &mut m.parameters_mut()[n - 2..] {
        p.value.data_mut().fill(0.0);
    }
    let got = evaluate_model(Predictor::Model(&m), &set).unwrap();
    assert!(got.r2 <= 1e-12, "{}", got.r2);
    assert_eq!(got.n_samples, 6);
    assert_eq!(got.n_cells, 6 * 16 * 16);
}

#[test]
fn bicubic_and_scale_mismatch() {
    let set = pair_set(4, 16, 2, 1);
    let m = evaluate_model(Predictor::Bicubic { scale: 2 }, &set).unwrap();
    assert!(m.r2 > 0.5 && m.r2 <= 1.0, "{}", m.r2);
    assert!(matches!(evaluate_model(Predictor::Bicubic { scale: 8 }, &set), Err(Error::Shape(_))));
}

#[test]
fn evaluation_is_deterministic_across_thread_counts() {
    let set = pair_set(20, 32, 2, 7);
    for family in Family::ALL {
        let m = Model::build(&ArchitectureSpec::reduced(family, 2, 32), 11).unwrap();
        let serial = evaluate_with_threads(Predictor::Model(&m), &set, 1).unwrap();
        let parallel = evaluate_with_threads(Predictor::Model(&m), &set, 4).unwrap();
        let again = evaluate_with_threads(Predictor::Model(&m), &set, 4).unwrap();
        assert!((serial.r2 - parallel.r2).abs() <= 1e-9, "{family}");
        assert!((serial.mse - parallel.mse).abs() <= 1e-9, "{family}");
        assert_eq!(parallel, again);
    }
}

#[test]
fn error_grids_reproduce_per_sample_mse() {
    let dir = tempfile::tempdir().unwrap();
    let set = pair_set(3, 16, 2, 2);
    let per_sample = emit_error_grids(Predictor::Bicubic { scale: 2 }, &set, dir.path()).unwrap();
    assert_eq!(per_sample.len(), 3);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 6);
    for (i, want) in per_sample.iter().enumerate() {
        let err = read_grd1(&dir.path().join(format!("abserr_{i:05}.grd1"))).unwrap();
        let got = err.data().iter().map(|&e| (e as f64).powi(2)).sum::<f64>() / err.len() as f64;
        assert!((got - want).abs() <= 1e-6 * want.max(1e-12), "{got} vs {want}");
        let pred = read_grd1(&dir.path().join(format!("pred_{i:05}.grd1"))).unwrap();
        assert_eq!(pred.hw(), (16, 16));
    }
    let pooled = evaluate_model(Predictor::Bicubic { scale: 2 }, &set).unwrap().mse;
    let mean: f64 = per_sample.iter().sum::<f64>() / 3.0;
    assert!((mean - pooled).abs() <= 1e-9);
}

fn manifest(name: &str, variables: &[&str], region: Region) -> DatasetManifest {
    DatasetManifest::new(
        name,
        variables.iter().map(|v| v.to_string()).collect(),
        (0.25, 0.25),
        region,
        vec![PathBuf::from("missing-00000.grd1")],
        vec!["train".into()],
    )
    .unwrap()
}

fn spec(kind: &str, held_out: HeldOut, train: &[&str], eval: &str) -> ProtocolSpec {
    serde_json::from_value(json!({
        "kind": kind,
        "train_manifests": train,
        "eval_manifest": eval,
        "held_out": held_out,
        "architecture": "reduced",
        "patch_size": 32,
    }))
    .unwrap()
}

/// Saves the manifests under `dir` (their samples do not exist) and runs
/// the protocol. Any error other than a leakage rejection would mean data
/// was touched first.
fn run_on_disk(dir: &Path, spec: &ProtocolSpec, train: Vec<DatasetManifest>, eval: DatasetManifest) -> Error {
    for (i, mut m) in train.into_iter().enumerate() {
        m.save(&dir.join(format!("train{i}.json"))).unwrap();
    }
    let mut eval = eval;
    eval.save(&dir.join("eval.json")).unwrap();
    let opts = RunOptions {
        base_dir: dir.to_path_buf(),
        ..RunOptions::default()
    };
    run_protocol(spec, &opts).unwrap_err()
}

fn region_strategy() -> impl Strategy<Value = Region> {
    (-80.0f64..70.0, 1.0f64..10.0, -170.0f64..160.0, 1.0f64..10.0)
        .prop_map(|(lat, dlat, lon, dlon)| Region::new(lat, lat + dlat, lon, lon + dlon).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn overlapping_regions_are_rejected(
        train in region_strategy(),
        fy in 0.05f64..0.95,
        fx in 0.05f64..0.95,
        h in 1.0f64..8.0,
        w in 1.0f64..8.0,
    ) {
        // Anchor the held-out box at a point strictly inside the training box.
        let lat = train.lat_min + fy * (train.lat_max - train.lat_min);
        let lon = train.lon_min + fx * (train.lon_max - train.lon_min);
        let held = Region::new(lat, (lat + h).min(90.0), lon, (lon + w).min(180.0)).unwrap();
        let tr = manifest("era5", &["tas"], train);
        let ev = manifest("era5-na", &["tas"], held);
        let s = spec("spatial", HeldOut::Region(held), &["train0.json"], "eval.json");
        prop_assert!(matches!(check_leakage(&s, std::slice::from_ref(&tr), &ev), Err(Error::Protocol(_))));
        let dir = tempfile::tempdir().unwrap();
        let err = run_on_disk(dir.path(), &s, vec![tr], ev);
        prop_assert!(matches!(err, Error::Protocol(_)), "{}", err);
    }

    #[test]
    fn shared_variables_are_rejected(
        extra in prop::collection::vec("[a-z]{2,6}", 0..4),
        held in "[a-z]{2,6}",
    ) {
        let mut vars: Vec<&str> = extra.iter().map(String::as_str).collect();
        vars.push(&held);
        let tr = manifest("era5", &vars, Region::DACH);
        let ev = manifest("era5-eval", &[&held], Region::DACH);
        let s = spec("variable", HeldOut::Variable(held.clone()), &["train0.json"], "eval.json");
        prop_assert!(matches!(check_leakage(&s, std::slice::from_ref(&tr), &ev), Err(Error::Protocol(_))));
        let dir = tempfile::tempdir().unwrap();
        let err = run_on_disk(dir.path(), &s, vec![tr], ev);
        prop_assert!(matches!(err, Error::Protocol(_)), "{}", err);
    }

    #[test]
    fn shared_products_are_rejected(
        others in prop::collection::vec("[a-z0-9]{3,8}", 0..3),
        held in "[A-Z][a-z0-9]{3,8}",
        two_sim in any::<bool>(),
    ) {
        let mut train: Vec<DatasetManifest> = others.iter().map(|n| manifest(n, &["tas"], Region::DACH)).collect();
        train.push(manifest(&held, &["tas"], Region::DACH));
        let ev = manifest(&held, &["tas"], Region::DACH);
        let paths: Vec<String> = (0..train.len()).map(|i| format!("train{i}.json")).collect();
        let paths: Vec<&str> = paths.iter().map(String::as_str).collect();
        let kind = if two_sim { "two-simulation" } else { "product" };
        let s = spec(kind, HeldOut::Product(held.clone()), &paths, "eval.json");
        prop_assert!(matches!(check_leakage(&s, &train, &ev), Err(Error::Protocol(_))));
        let dir = tempfile::tempdir().unwrap();
        let err = run_on_disk(dir.path(), &s, train, ev);
        prop_assert!(matches!(err, Error::Protocol(_)), "{}", err);
    }
}

#[test]
fn disjoint_protocols_pass_the_guard() {
    let tr = manifest("era5", &["tas"], Region::DACH);
    let na = manifest("era5-na", &["tas"], Region::NORTH_AMERICA);
    let s = spec("spatial", HeldOut::Region(Region::NORTH_AMERICA), &["a"], "b");
    check_leakage(&s, std::slice::from_ref(&tr), &na).unwrap();
    let pr = manifest("merra2", &["tas"], Region::DACH);
    let s = spec("product", HeldOut::Product("merra2".into()), &["a"], "b");
    check_leakage(&s, std::slice::from_ref(&tr), &pr).unwrap();
    let s = spec("variable", HeldOut::Variable("tas".into()), &["a"], "b");
    let uas = manifest("era5", &["uas"], Region::DACH);
    check_leakage(&s, std::slice::from_ref(&uas), &tr).unwrap();
}

#[test]
fn two_simulation_report_has_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let opts = |kind, test_count| SynthOptions {
        test_count,
        product: Some(match kind {
            SynthKind::GaussianBumps => "sim-a".into(),
            _ => "sim-b".into(),
        }),
        ..SynthOptions::default()
    };
    synth_dataset(SynthKind::GaussianBumps, 8, 32, 1, &dir.path().join("a"), &opts(SynthKind::GaussianBumps, 0))
        .unwrap();
    synth_dataset(SynthKind::AnisotropicBumps, 8, 32, 2, &dir.path().join("b"), &opts(SynthKind::AnisotropicBumps, 3))
        .unwrap();
    let mut s: ProtocolSpec = serde_json::from_value(json!({
        "kind": "two-simulation",
        "train_manifests": ["a/manifest.json"],
        "eval_manifest": "b/manifest.json",
        "held_out": {"product": "sim-b"},
        "modes": ["zero-shot", "fine-tune"],
        "models": ["bicubic", "cnn"],
        "architecture": "reduced",
        "patch_size": 32,
        "training": {"epochs": 1, "batch_size": 4, "val_fraction": 0.0},
    }))
    .unwrap();
    let out = dir.path().join("out");
    let run = |s: &ProtocolSpec| {
        run_protocol(
            s,
            &RunOptions {
                base_dir: dir.path().to_path_buf(),
                threads: 1,
                out_dir: Some(out.clone()),
            },
        )
        .unwrap()
    };
    let report = run(&s);
    assert_eq!(report.rows.len(), 8);
    for model in ["bicubic", "cnn"] {
        for scale in [2, 8] {
            for mode in [Mode::ZeroShot, Mode::FineTune] {
                let r = report.row(model, scale, mode).unwrap();
                assert_eq!(r.n_samples, 3);
                assert!(r.mse.is_finite() && r.r2.is_finite());
            }
        }
    }
    let bz = report.row("bicubic", 2, Mode::ZeroShot).unwrap();
    let bf = report.row("bicubic", 2, Mode::FineTune).unwrap();
    assert_eq!(bz.mse, bf.mse);
    for f in ["report.json", "report.txt", "stats.json", "checkpoints/cnn-x2.ckpt", "checkpoints/cnn-x8-ft.ckpt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(report.provenance.checkpoints.len(), 4);

    // Rerunning from the stored checkpoints reproduces the zero-shot rows.
    s.modes = vec![Mode::ZeroShot];
    for scale in [2, 8] {
        s.checkpoints.insert(format!("cnn-x{scale}"), out.join(format!("checkpoints/cnn-x{scale}.ckpt")));
    }
    let again = run(&s);
    for scale in [2, 8] {
        assert_eq!(
            again.row("cnn", scale, Mode::ZeroShot).unwrap().mse,
            report.row("cnn", scale, Mode::ZeroShot).unwrap().mse
        );
    }
}
