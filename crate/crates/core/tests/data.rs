use std::fs;

use downscale_core::data::{
    compute_norm_stats, extract_region, ingest, make_patches, spectral_band, stats_from_fields, synth_dataset,
    synthesize_pairs, synthetic_field, DatasetManifest, PairSet, Region, SampleMeta, SynthKind, SynthOptions,
};
use downscale_core::grid::{fft2, normalize, write_grd1, GridTensor, Tensor};
use downscale_core::layers::Init;
use downscale_core::Error;

fn meta(variable: &str) -> SampleMeta {
    SampleMeta {
        variable: variable.into(),
        units: "K".into(),
        bounds: Region::DACH,
        source: "fixture".into(),
        timestamp: "2020-01-01T00:00:00Z".into(),
    }
}

fn write_sidecar(path: &std::path::Path, m: &SampleMeta) {
    fs::write(path.with_extension("json"), serde_json::to_string(m).unwrap()).unwrap();
}

#[test]
fn ingest_reads_hand_written_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.grd1");
    let mut bytes = b"GRD1".to_vec();
    for v in [2u32, 2, 2] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in [1.5f32, -2.0, 0.25, 1e6] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&path, &bytes).unwrap();
    write_sidecar(&path, &meta("tas"));
    let (g, m) = ingest(&path).unwrap();
    assert_eq!(g.shape(), &[2, 2]);
    assert_eq!(g.data(), &[1.5, -2.0, 0.25, 1e6]);
    assert_eq!(m, meta("tas"));
}

#[test]
fn ingest_distinguishes_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.grd1");
    let g = GridTensor::filled(&[4, 4], 1.0);
    write_grd1(&path, &g).unwrap();
    assert!(matches!(ingest(&path), Err(Error::MissingSidecar(_))));
    write_sidecar(&path, &meta("tas"));
    let mut bytes = fs::read(&path).unwrap();
    bytes[1] = b'X';
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(ingest(&path), Err(Error::BadMagic { .. })));
    bytes[1] = b'R';
    bytes.truncate(bytes.len() - 1);
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(ingest(&path), Err(Error::Truncated { .. })));
}

#[test]
fn random_field_round_trips_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.grd1");
    let g: GridTensor = Init::new(4).uniform(&[64, 64], -1e3, 1e3);
    write_grd1(&path, &g).unwrap();
    write_sidecar(&path, &meta("tas"));
    let (back, _) = ingest(&path).unwrap();
    let bits = |t: &GridTensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&g));
}

#[test]
fn dach_window_from_quarter_degree_global_grid() {
    let (dlat, dlon) = (0.25, 0.25);
    let rows = (180.0 / dlat) as usize;
    let cols = (360.0 / dlon) as usize;
    let global = GridTensor::from_fn(rows, cols, |r, c| (r * 10_000 + c) as f32);
    let dach = extract_region(&global, &Region::GLOBAL, (dlat, dlon), &Region::DACH).unwrap();
    let expect_rows = ((55.0 - 45.0) / dlat) as usize;
    let expect_cols = ((15.0 - 5.0) / dlon) as usize;
    assert_eq!(dach.shape(), &[expect_rows, expect_cols]);
    assert_eq!(expect_rows, 40);
    // north-west corner: 55°N is row (90-55)/0.25 = 140, 5°E is column (180+5)/0.25 = 740
    assert_eq!(dach.data()[0], (140 * 10_000 + 740) as f32);
}

#[test]
fn region_extraction_edge_cases() {
    let bounds = Region::new(40.0, 50.0, 0.0, 20.0).unwrap();
    let g = GridTensor::from_fn(10, 20, |r, c| (r * 20 + c) as f32);
    assert_eq!(extract_region(&g, &bounds, (1.0, 1.0), &bounds).unwrap(), g);
    let one = Region::new(44.0, 45.0, 3.0, 4.0).unwrap();
    let cell = extract_region(&g, &bounds, (1.0, 1.0), &one).unwrap();
    assert_eq!(cell.shape(), &[1, 1]);
    assert_eq!(cell.data()[0], (5 * 20 + 3) as f32);
    let south = Region::new(35.0, 45.0, 0.0, 5.0).unwrap();
    let err = extract_region(&g, &bounds, (1.0, 1.0), &south).unwrap_err();
    assert!(matches!(err, Error::Bounds { axis: "latitude", .. }));
    let east = Region::new(41.0, 45.0, 15.0, 25.0).unwrap();
    let err = extract_region(&g, &bounds, (1.0, 1.0), &east).unwrap_err();
    assert!(matches!(err, Error::Bounds { axis: "longitude", .. }));
}

#[test]
fn patch_tiling_counts_and_reassembly() {
    let g = GridTensor::from_fn(128, 128, |r, c| (r * 128 + c) as f32);
    let p = make_patches(&g, 64, 64).unwrap();
    assert_eq!(p.len(), 4);
    let mut back = vec![0.0f32; 128 * 128];
    for (i, t) in p.iter().enumerate() {
        let (r0, c0) = (i / 2 * 64, i % 2 * 64);
        for r in 0..64 {
            back[(r0 + r) * 128 + c0..(r0 + r) * 128 + c0 + 64].copy_from_slice(&t.data()[r * 64..(r + 1) * 64]);
        }
    }
    assert_eq!(back, g.data());
    assert_eq!(make_patches(&GridTensor::zeros(&[130, 130]), 64, 64).unwrap().len(), 4);
    let one = GridTensor::from_fn(64, 64, |r, c| (r + c) as f32);
    assert_eq!(make_patches(&one, 64, 64).unwrap(), vec![one.clone()]);
    assert!(make_patches(&GridTensor::zeros(&[32, 32]), 64, 64).is_err());
}

#[test]
fn synthesized_pairs_pool_and_preserve_the_mean() {
    let hr: GridTensor = Init::new(1).uniform(&[64, 64], 250.0, 300.0);
    for (scale, side) in [(2, 32), (8, 8)] {
        let pairs = synthesize_pairs(&[(hr.clone(), meta("tas"))], scale).unwrap();
        assert_eq!(pairs[0].lr.shape(), &[side, side]);
        assert_eq!(pairs[0].variable, "tas");
        let rel = (pairs[0].lr.mean() - hr.mean()).abs() / hr.mean().abs();
        assert!(rel <= 1e-6);
    }
    assert!(synthesize_pairs(&[(GridTensor::zeros(&[12, 12]), meta("tas"))], 8).is_err());
}

#[test]
fn norm_stats_follow_population_definition() {
    let a = GridTensor::zeros(&[4, 4]);
    let b = GridTensor::filled(&[4, 4], 2.0);
    let s = stats_from_fields([(&a, "tas"), (&b, "tas")]).unwrap();
    let v = s.0["tas"];
    assert_eq!((v.mean, v.std, v.n_cells), (1.0, 1.0, 32));
    let c = GridTensor::filled(&[4, 4], 3.0);
    assert!(matches!(stats_from_fields([(&c, "tas"), (&c, "tas")]), Err(Error::InvalidStats(_))));

    let fields: Vec<GridTensor> = (0..5).map(|i| Init::new(i).uniform(&[16, 16], 260.0, 300.0)).collect();
    let s = stats_from_fields(fields.iter().map(|f| (f, "tas"))).unwrap();
    let norm: Vec<GridTensor> = fields.iter().map(|f| normalize(f, &s.require("tas").unwrap()).unwrap()).collect();
    let again = stats_from_fields(norm.iter().map(|f| (f, "tas"))).unwrap().0["tas"];
    assert!(again.mean.abs() <= 1e-5 && (again.std - 1.0).abs() <= 1e-5, "{again:?}");
}

#[test]
fn synth_is_deterministic_and_lists_every_file() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let opts = SynthOptions {
        test_count: 20,
        ..SynthOptions::default()
    };
    let ma = synth_dataset(SynthKind::GaussianBumps, 100, 16, 5, a.path(), &opts).unwrap();
    let mb = synth_dataset(SynthKind::GaussianBumps, 100, 16, 5, b.path(), &opts).unwrap();
    assert_eq!(ma.sample_files.len(), 100);
    assert_eq!(ma.sample_files, mb.sample_files);
    assert_eq!(ma.indices_with_tag("test").len(), 20);
    assert_eq!(ma.name, "synthetic-gaussian-bumps");
    for f in &ma.sample_files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    assert_eq!(
        fs::read(a.path().join("manifest.json")).unwrap(),
        fs::read(b.path().join("manifest.json")).unwrap()
    );
    assert!(synth_dataset(SynthKind::GaussianBumps, 2, 48, 5, a.path(), &opts).is_err());
}

#[test]
fn manifest_load_is_order_stable_and_checks_variables() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_dataset(SynthKind::AnisotropicBumps, 6, 8, 1, dir.path(), &SynthOptions::default()).unwrap();
    let loaded = DatasetManifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(loaded.sample_files, m.sample_files);
    let samples = loaded.load_samples(None).unwrap();
    for (i, (g, _)) in samples.iter().enumerate() {
        let (direct, _) = ingest(&dir.path().join(&m.sample_files[i])).unwrap();
        assert_eq!(g, &direct);
    }
    let mut wrong = loaded.clone();
    wrong.variables = vec!["pr".into()];
    assert!(matches!(wrong.load_samples(None), Err(Error::Metadata(_))));
    let stats = compute_norm_stats(&[loaded], Some("train")).unwrap();
    assert_eq!(stats.0["tas"].n_cells, 6 * 64);
}

#[test]
fn banded_spectrum_periodogram_slope_matches_beta() {
    let size = 64;
    for beta in [2.0, 3.0, 4.0] {
        let f = synthetic_field(SynthKind::BandedSpectrum, size, 9, 0, beta).unwrap();
        let spec = fft2(&f).unwrap();
        let (kmin, kmax) = spectral_band(size);
        let signed = |k: usize| if k > size / 2 { k as f64 - size as f64 } else { k as f64 };
        let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ky in 0..size {
            for kx in 0..size {
                let k = (signed(ky).powi(2) + signed(kx).powi(2)).sqrt();
                if k < kmin || k > kmax {
                    continue;
                }
                let p = spec.data()[ky * size + kx].norm_sqr();
                let (x, y) = (k.ln(), p.ln());
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                n += 1.0;
            }
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((-slope - beta).abs() <= 0.05 * beta, "beta {beta}: slope {slope}");
    }
}

#[test]
fn pair_set_batches_and_splits_deterministically() {
    let hr: Vec<_> = (0..10u64)
        .map(|i| (synthetic_field(SynthKind::GaussianBumps, 16, 3, i, 3.0).unwrap().cast::<f32>(), meta("tas")))
        .collect();
    let pairs = synthesize_pairs(&hr, 2).unwrap();
    let stats = stats_from_fields(hr.iter().map(|(g, m)| (g, m.variable.as_str()))).unwrap();
    let set = PairSet::from_pairs(&pairs, &stats).unwrap();
    assert_eq!((set.len(), set.scale(), set.hr_size()), (10, 2, (16, 16)));
    let (t, v) = set.split(0.1, 7).unwrap();
    let (t2, v2) = set.split(0.1, 7).unwrap();
    assert_eq!((t.len(), v.as_ref().unwrap().len()), (9, 1));
    assert_eq!(t, t2);
    assert_eq!(v, v2);
    let bad = Tensor::<f32>::zeros(&[3, 1, 16, 16]);
    assert!(PairSet::new(bad.clone(), Tensor::zeros(&[3, 1, 24, 24])).is_err());
}
