//! WebAssembly bindings for the static page in `www/`. Every operation
//! returns a [`Panels`] bundle of square images plus a one-line summary;
//! the page colours and draws them.

use std::str::FromStr;

use downscale_core::data::{synthetic_field, SynthKind};
use downscale_core::eval::{mse, r2};
use downscale_core::grid::{avg_pool, bicubic_upsample, fft2, ifft2};
use downscale_core::Tensor;
use wasm_bindgen::prelude::*;

/// Largest field side the page may request.
pub const MAX_SIZE: usize = 256;

struct Panel {
    label: String,
    side: usize,
    values: Vec<f32>,
    diverging: bool,
}

#[wasm_bindgen]
pub struct Panels {
    panels: Vec<Panel>,
    summary: String,
}

#[wasm_bindgen]
impl Panels {
    pub fn count(&self) -> usize {
        self.panels.len()
    }

    pub fn label(&self, i: usize) -> String {
        self.panels[i].label.clone()
    }

    pub fn side(&self, i: usize) -> usize {
        self.panels[i].side
    }

    /// Row-major values of panel `i`.
    pub fn values(&self, i: usize) -> Vec<f32> {
        self.panels[i].values.clone()
    }

    /// Signed data that should use a colour map centred on zero.
    pub fn diverging(&self, i: usize) -> bool {
        self.panels[i].diverging
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

impl Panels {
    fn push(&mut self, label: impl Into<String>, t: &Tensor<f32>, diverging: bool) {
        self.panels.push(Panel { label: label.into(), side: t.hw().1, values: t.data().to_vec(), diverging });
    }
}

fn field(kind: &str, size: usize, seed: u64, index: u64, beta: f64) -> Result<Tensor<f32>, String> {
    if size > MAX_SIZE {
        return Err(format!("size must be at most {MAX_SIZE}, got {size}"));
    }
    let kind = SynthKind::from_str(kind).map_err(|e| e.to_string())?;
    Ok(synthetic_field(kind, size, seed, index, beta).map_err(|e| e.to_string())?.cast())
}

fn diff(a: &Tensor<f32>, b: &Tensor<f32>) -> Tensor<f32> {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

/// Pools a synthetic field by `scale`, upsamples it again with bicubic
/// interpolation and shows what the interpolation cannot recover.
#[wasm_bindgen]
pub fn downscale_error(kind: &str, size: usize, scale: usize, seed: u64) -> Result<Panels, String> {
    let hr = field(kind, size, seed, 0, 3.0)?;
    let lr = avg_pool(&hr, scale).map_err(|e| e.to_string())?;
    let up = bicubic_upsample(&lr, scale).map_err(|e| e.to_string())?;
    let m = mse(&up, &hr).map_err(|e| e.to_string())?;
    let r = r2(&up, &hr).map_err(|e| e.to_string())?;
    let mut p = Panels { panels: Vec::new(), summary: format!("bicubic from 1/{scale}: MSE {m:.3e}, R² {r:.4}") };
    p.push("high resolution", &hr, false);
    p.push(format!("pooled to {}²", size / scale), &lr, false);
    p.push("bicubic upsampled", &up, false);
    p.push("bicubic minus truth", &diff(&up, &hr), true);
    Ok(p)
}

/// Keeps only Fourier modes with |ky|, |kx| < `modes` (the band an FNO
/// layer with that many modes sees) and shows the reconstruction.
#[wasm_bindgen]
pub fn spectral_truncation(kind: &str, size: usize, modes: usize, seed: u64) -> Result<Panels, String> {
    let f = field(kind, size, seed, 0, 3.0)?;
    if modes == 0 || modes > size / 2 {
        return Err(format!("modes must lie in 1..={}, got {modes}", size / 2));
    }
    let mut spec = fft2(&f).map_err(|e| e.to_string())?;
    let signed = |k: usize| if k > size / 2 { size - k } else { k };
    let total: f64 = spec.data().iter().map(|c| c.norm_sqr() as f64).sum();
    // log magnitude with the zero frequency moved to the centre
    let half = size / 2;
    let shifted = Tensor::from_fn(size, size, |r, c| {
        let z = spec.data()[((r + half) % size) * size + (c + half) % size];
        (z.norm() + 1e-6).log10()
    });
    let mut kept = 0;
    for ky in 0..size {
        for kx in 0..size {
            if signed(ky) < modes && signed(kx) < modes {
                kept += 1;
            } else {
                spec.data_mut()[ky * size + kx] = Default::default();
            }
        }
    }
    let retained: f64 = spec.data().iter().map(|c| c.norm_sqr() as f64).sum();
    let low = ifft2(&spec).map_err(|e| e.to_string())?;
    let mut p = Panels {
        panels: Vec::new(),
        summary: format!(
            "kept {kept} of {} modes, {:.2}% of the energy",
            size * size,
            100.0 * retained / total.max(f64::MIN_POSITIVE)
        ),
    };
    p.push("field", &f, false);
    p.push("log10 |spectrum|, centred", &shifted, false);
    p.push(format!("modes below {modes}"), &low, false);
    p.push("discarded detail", &diff(&f, &low), true);
    Ok(p)
}

/// `count` consecutive fields of a synthetic product.
#[wasm_bindgen]
pub fn synthetic_gallery(kind: &str, size: usize, seed: u64, count: usize, beta: f64) -> Result<Panels, String> {
    if count == 0 || count > 16 {
        return Err(format!("count must lie in 1..=16, got {count}"));
    }
    let mut p = Panels { panels: Vec::new(), summary: String::new() };
    let mut std = 0.0;
    for i in 0..count {
        let f = field(kind, size, seed, i as u64, beta)?;
        let mean = f.mean();
        std += (f.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / f.len() as f64).sqrt();
        p.push(format!("{kind} #{i}"), &f, true);
    }
    p.summary = format!("{count} fields of {size}², mean per-field std {:.3}", std / count as f64);
    Ok(p)
}
