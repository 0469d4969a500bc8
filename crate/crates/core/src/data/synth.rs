//! Seeded synthetic climate-like fields for desk-scale experiments. The
//! three kinds differ in covariance structure, so a model trained on one
//! faces a genuine domain gap on another.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_sample, DatasetManifest, Region, SampleMeta};
use crate::error::{Error, Result};
use crate::grid::{ifft2, sum_f64, ComplexGrid, GridTensor, Tensor};
use crate::par::map_indexed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Sums of 10–24 isotropic Gaussian bumps of random sign and log-uniform
    /// width in [size/96, size/6].
    GaussianBumps,
    /// Elongated, rotated Gaussian ridges (aspect 3–6).
    AnisotropicBumps,
    /// Random-phase fields with power `|k|^-β` on an annular band.
    BandedSpectrum,
}

impl SynthKind {
    pub const ALL: [SynthKind; 3] = [
        SynthKind::GaussianBumps,
        SynthKind::AnisotropicBumps,
        SynthKind::BandedSpectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::GaussianBumps => "gaussian-bumps",
            SynthKind::AnisotropicBumps => "anisotropic-bumps",
            SynthKind::BandedSpectrum => "banded-spectrum",
        }
    }

    pub fn product(self) -> String {
        format!("synthetic-{}", self.name())
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown synthetic kind {s:?} (gaussian-bumps, anisotropic-bumps, banded-spectrum)"
                ))
            })
    }
}

/// Everything about a synthetic product other than kind, count, size and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub variable: String,
    pub units: String,
    /// Physical value = offset + amplitude · unit field.
    pub offset: f64,
    pub amplitude: f64,
    pub region: Region,
    /// Trailing samples tagged `test` (the rest are tagged `train`).
    pub test_count: usize,
    /// Spectral exponent of the banded-spectrum kind.
    pub beta: f64,
    /// Overrides the product name `synthetic-<kind>`.
    pub product: Option<String>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            variable: "tas".into(),
            units: "K".into(),
            offset: 280.0,
            amplitude: 10.0,
            region: Region::DACH,
            test_count: 0,
            beta: 3.0,
            product: None,
        }
    }
}

/// Lowest and highest retained radial wavenumber of the banded kind.
pub fn spectral_band(size: usize) -> (f64, f64) {
    (1.0, (size / 4).max(2) as f64)
}

fn bumps(size: usize, rng: &mut ChaCha8Rng, anisotropic: bool) -> Tensor<f64> {
    let n = size as f64;
    let count = rng.random_range(10..=24);
    let mut field = vec![0.0; size * size];
    for _ in 0..count {
        let (cy, cx) = (rng.random_range(0.0..n), rng.random_range(0.0..n));
        let amp = rng.random_range(-1.0..1.0);
        let (a, b, c) = if anisotropic {
            let major = rng.random_range(n / 8.0..n / 3.0);
            let minor = major / rng.random_range(3.0..6.0);
            let th: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (s, co) = th.sin_cos();
            let (i1, i2) = (1.0 / (major * major), 1.0 / (minor * minor));
            (co * co * i1 + s * s * i2, co * s * (i1 - i2), s * s * i1 + co * co * i2)
        } else {
            // log-uniform widths from below one cell at 64² up to broad features
            let sigma = rng.random_range((n / 96.0).ln()..(n / 6.0).ln()).exp();
            let i = 1.0 / (sigma * sigma);
            (i, 0.0, i)
        };
        for r in 0..size {
            // signed periodic offsets keep the field seamless
            let mut dy = (r as f64 - cy).rem_euclid(n);
            if dy > n / 2.0 {
                dy -= n;
            }
            for col in 0..size {
                let mut dx = (col as f64 - cx).rem_euclid(n);
                if dx > n / 2.0 {
                    dx -= n;
                }
                let q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
                field[r * size + col] += amp * (-0.5 * q).exp();
            }
        }
    }
    Tensor::new(vec![size, size], field).expect("bump field")
}

fn banded(size: usize, beta: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let (kmin, kmax) = spectral_band(size);
    let mut spec = ComplexGrid::<f64>::zeros(&[size, size]);
    let signed = |k: usize| if k > size / 2 { k as f64 - size as f64 } else { k as f64 };
    let data = spec.data_mut();
    for ky in 0..size {
        for kx in 0..size {
            let k = (signed(ky).powi(2) + signed(kx).powi(2)).sqrt();
            let (my, mx) = ((size - ky) % size, (size - kx) % size);
            // visit each ± pair once; the partner gets the conjugate
            if (my, mx) < (ky, kx) || k < kmin || k > kmax {
                continue;
            }
            let phase = rng.random_range(0.0..TAU);
            let amp = k.powf(-beta / 2.0);
            let z = if (my, mx) == (ky, kx) {
                Complex::new(amp * phase.cos().signum(), 0.0)
            } else {
                Complex::from_polar(amp, phase)
            };
            data[ky * size + kx] = z;
            data[my * size + mx] = z.conj();
        }
    }
    let f = ifft2(&spec).expect("power-of-two size");
    let rms = (sum_f64(&f.data().iter().map(|v| v * v).collect::<Vec<_>>()) / f.len() as f64).sqrt();
    f.map(|v| v / rms)
}

/// Unit-scale field `index` of a synthetic product, in f64.
pub fn synthetic_field(kind: SynthKind, size: usize, seed: u64, index: u64, beta: f64) -> Result<Tensor<f64>> {
    check_size(size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Ok(match kind {
        SynthKind::GaussianBumps => bumps(size, &mut rng, false),
        SynthKind::AnisotropicBumps => bumps(size, &mut rng, true),
        SynthKind::BandedSpectrum => banded(size, beta, &mut rng),
    })
}

fn check_size(size: usize) -> Result<()> {
    if size < 4 || !size.is_power_of_two() {
        return Err(Error::config(format!(
            "size must be a power of two >= 4, got {size}"
        )));
    }
    Ok(())
}

/// Writes `n` fields as GRD1 + sidecar files under `out_dir` together with
/// `manifest.json`, and returns the manifest.
pub fn synth_dataset(
    kind: SynthKind,
    n: usize,
    size: usize,
    seed: u64,
    out_dir: &Path,
    opts: &SynthOptions,
) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    check_size(size)?;
    if opts.test_count > n {
        return Err(Error::config(format!("test_count {} exceeds n {n}", opts.test_count)));
    }
    opts.region.validate()?;
    fs::create_dir_all(out_dir)?;
    let product = opts.product.clone().unwrap_or_else(|| kind.product());
    let fields = map_indexed(n, |i| synthetic_field(kind, size, seed, i as u64, opts.beta));
    let mut files = Vec::with_capacity(n);
    let mut tags = Vec::with_capacity(n);
    for (i, f) in fields.into_iter().enumerate() {
        let grid: GridTensor = f?.map(|v| opts.offset + opts.amplitude * v).cast();
        let name = PathBuf::from(format!("{product}-{i:05}.grd1"));
        let meta = SampleMeta {
            variable: opts.variable.clone(),
            units: opts.units.clone(),
            bounds: opts.region,
            source: product.clone(),
            timestamp: format!("step-{i:05}"),
        };
        write_sample(&out_dir.join(&name), &grid, &meta)?;
        files.push(name);
        tags.push(if i >= n - opts.test_count { "test" } else { "train" }.to_string());
    }
    let r = opts.region;
    let mut manifest = DatasetManifest::new(
        product,
        vec![opts.variable.clone()],
        ((r.lat_max - r.lat_min) / size as f64, (r.lon_max - r.lon_min) / size as f64),
        r,
        files,
        tags,
    )?;
    manifest.declared_count = Some(n as u64);
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

