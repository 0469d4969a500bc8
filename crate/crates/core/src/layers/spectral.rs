//! Fourier-domain channel mixing: the FNO layer primitive.
//!
//! The retained band is every signed frequency pair `(ky, kx)` with
//! `|ky| < modes` and `|kx| < modes`, i.e. the four corner blocks of the
//! unshifted spectrum. Weights are stored for the half-plane `kx >= 0` as
//! `[2, 2·modes−1, modes, c_in, c_out]` (real plane, imaginary plane). The
//! `kx < 0` half is the complex conjugate of its mirror and the `kx = 0`
//! column is symmetrized, so the multiplier is Hermitian and the inverse
//! transform is real up to rounding.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{fft2, ifft2_complex, ComplexGrid, Real, Tensor};

#[derive(Clone, Debug)]
pub struct SpectralCtx<T> {
    xf: ComplexGrid<T>,
    w: Tensor<T>,
    modes: usize,
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    modes: usize,
    rows: usize,
    cin: usize,
    cout: usize,
}

impl Layout {
    fn from_weight<T: Real>(w: &Tensor<T>) -> Result<Self> {
        let &[two, rows, modes, cin, cout] = w.shape() else {
            return Err(Error::shape(format!(
                "spectral weight must be 2×(2m−1)×m×cin×cout, got {:?}",
                w.shape()
            )));
        };
        if two != 2 || rows != 2 * modes - 1 {
            return Err(Error::shape(format!(
                "spectral weight shape {:?} is inconsistent with {modes} modes",
                w.shape()
            )));
        }
        Ok(Self {
            modes,
            rows,
            cin,
            cout,
        })
    }

    /// Offset of the `cin×cout` block for stored mode `(ky, kx)`, `kx >= 0`.
    fn offset(&self, ky: isize, kx: isize) -> usize {
        debug_assert!(kx >= 0);
        let a = if ky >= 0 { ky } else { ky + self.rows as isize } as usize;
        (a * self.modes + kx as usize) * self.cin * self.cout
    }

    fn im_plane(&self) -> usize {
        self.rows * self.modes * self.cin * self.cout
    }

    fn stored<T: Real>(&self, w: &[T], ky: isize, kx: isize, j: usize) -> Complex<T> {
        let off = self.offset(ky, kx) + j;
        Complex::new(w[off], w[off + self.im_plane()])
    }

    /// Effective `cin×cout` multiplier at signed mode `(ky, kx)`.
    fn effective<T: Real>(&self, w: &[T], ky: isize, kx: isize, out: &mut [Complex<T>]) {
        let half = T::of(0.5);
        for (j, o) in out.iter_mut().enumerate() {
            *o = match kx {
                k if k > 0 => self.stored(w, ky, kx, j),
                k if k < 0 => self.stored(w, -ky, -kx, j).conj(),
                _ => (self.stored(w, ky, 0, j) + self.stored(w, -ky, 0, j).conj()) * half,
            };
        }
    }

    fn band(&self) -> impl Iterator<Item = (isize, isize)> {
        let m = self.modes as isize;
        (-(m - 1)..m).flat_map(move |ky| (-(m - 1)..m).map(move |kx| (ky, kx)))
    }
}

fn wrap(k: isize, n: usize) -> usize {
    k.rem_euclid(n as isize) as usize
}

fn check_size(h: usize, w: usize, modes: usize) -> Result<()> {
    if h < 2 * modes {
        return Err(Error::shape(format!(
            "spectral conv with {modes} modes needs height >= {}, got {h}",
            2 * modes
        )));
    }
    if w < 2 * modes {
        return Err(Error::shape(format!(
            "spectral conv with {modes} modes needs width >= {}, got {w}",
            2 * modes
        )));
    }
    Ok(())
}

/// `y = Re(ifft2(M ⊙ fft2(x)))` with `M` the learned per-mode channel mix.
pub fn spectral_conv_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>) -> Result<(Tensor<T>, SpectralCtx<T>)> {
    let lay = Layout::from_weight(w)?;
    let [n, cin, h, wd] = x.dims4()?;
    if cin != lay.cin {
        return Err(Error::shape(format!(
            "spectral conv expects {} input channels, got {cin}",
            lay.cin
        )));
    }
    check_size(h, wd, lay.modes)?;
    let xf = fft2(&x.clone().reshape(vec![n, cin, h, wd])?)?;
    let (y, _) = mix(&lay, w.data(), &xf, n, h, wd, false)?;
    Ok((
        y,
        SpectralCtx {
            xf,
            w: w.clone(),
            modes: lay.modes,
        },
    ))
}

/// Per-mode channel mixing followed by the inverse transform. When
/// `imag_residue` is set, also reports `max |Im|` before it is discarded.
fn mix<T: Real>(
    lay: &Layout,
    w: &[T],
    xf: &ComplexGrid<T>,
    n: usize,
    h: usize,
    wd: usize,
    imag_residue: bool,
) -> Result<(Tensor<T>, f64)> {
    let plane = h * wd;
    let zero = Complex::new(T::zero(), T::zero());
    let mut z = ComplexGrid::zeros(&[n, lay.cout, h, wd]);
    let mut weff = vec![zero; lay.cin * lay.cout];
    for (ky, kx) in lay.band() {
        lay.effective(w, ky, kx, &mut weff);
        let idx = wrap(ky, h) * wd + wrap(kx, wd);
        for s in 0..n {
            for o in 0..lay.cout {
                let mut acc = zero;
                for i in 0..lay.cin {
                    acc = acc + weff[i * lay.cout + o] * xf.data()[(s * lay.cin + i) * plane + idx];
                }
                z.data_mut()[(s * lay.cout + o) * plane + idx] = acc;
            }
        }
    }
    let y = ifft2_complex(&z)?;
    let residue = if imag_residue {
        y.data().iter().fold(0.0f64, |m, c| m.max(c.im.f64().abs()))
    } else {
        0.0
    };
    Ok((y.re(), residue))
}

/// Largest imaginary component produced before the real part is taken.
pub fn spectral_imag_residue<T: Real>(x: &Tensor<T>, w: &Tensor<T>) -> Result<f64> {
    let lay = Layout::from_weight(w)?;
    let [n, cin, h, wd] = x.dims4()?;
    check_size(h, wd, lay.modes)?;
    let xf = fft2(&x.clone().reshape(vec![n, cin, h, wd])?)?;
    Ok(mix(&lay, w.data(), &xf, n, h, wd, true)?.1)
}

/// Returns `(dx, dw)`.
pub fn spectral_conv_backward<T: Real>(ctx: &SpectralCtx<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let lay = Layout::from_weight(&ctx.w)?;
    let [n, cin, h, wd] = {
        let s = ctx.xf.shape();
        [s[0], s[1], s[2], s[3]]
    };
    if dy.dims4()? != [n, lay.cout, h, wd] {
        return Err(Error::shape("spectral conv upstream gradient shape mismatch"));
    }
    debug_assert_eq!(lay.modes, ctx.modes);
    let plane = h * wd;
    let scale = T::of(1.0 / plane as f64);
    let zero = Complex::new(T::zero(), T::zero());
    let half = T::of(0.5);
    let gz = fft2(&dy.clone().reshape(vec![n, lay.cout, h, wd])?)?;
    let mut gx = ComplexGrid::zeros(&[n, cin, h, wd]);
    let mut dw = vec![T::zero(); ctx.w.len()];
    let im = lay.im_plane();
    let w = ctx.w.data();
    let mut weff = vec![zero; cin * lay.cout];
    let mut gweff = vec![zero; cin * lay.cout];
    for (ky, kx) in lay.band() {
        lay.effective(w, ky, kx, &mut weff);
        gweff.iter_mut().for_each(|g| *g = zero);
        let idx = wrap(ky, h) * wd + wrap(kx, wd);
        for s in 0..n {
            for o in 0..lay.cout {
                let g = gz.data()[(s * lay.cout + o) * plane + idx] * scale;
                for i in 0..cin {
                    let xi = ctx.xf.data()[(s * cin + i) * plane + idx];
                    let j = i * lay.cout + o;
                    gx.data_mut()[(s * cin + i) * plane + idx] =
                        gx.data()[(s * cin + i) * plane + idx] + g * weff[j].conj();
                    gweff[j] = gweff[j] + xi.conj() * g;
                }
            }
        }
        let mut add = |ky: isize, kx: isize, j: usize, v: Complex<T>| {
            let off = lay.offset(ky, kx) + j;
            dw[off] = dw[off] + v.re;
            dw[off + im] = dw[off + im] + v.im;
        };
        for (j, &g) in gweff.iter().enumerate() {
            match kx {
                k if k > 0 => add(ky, kx, j, g),
                k if k < 0 => add(-ky, -kx, j, g.conj()),
                _ => {
                    add(ky, 0, j, g * half);
                    add(-ky, 0, j, g.conj() * half);
                }
            }
        }
    }
    let n_plane = T::of(plane as f64);
    let dx = ifft2_complex(&gx)?.re().map(|v| v * n_plane);
    Ok((dx, Tensor::from_parts(ctx.w.shape().to_vec(), dw)))
}

/// Weight shape for a spectral layer.
pub fn spectral_weight_shape(modes: usize, cin: usize, cout: usize) -> Vec<usize> {
    vec![2, 2 * modes - 1, modes, cin, cout]
}
