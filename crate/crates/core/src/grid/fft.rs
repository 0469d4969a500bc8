use num_complex::Complex;

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Complex counterpart of [`Tensor`], holding Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid<T = f32> {
    shape: Vec<usize>,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexGrid<T> {
    pub fn new(shape: Vec<usize>, data: Vec<Complex<T>>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape(format!("invalid complex grid shape {shape:?}")));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} does not match {} coefficients",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn from_real(t: &Tensor<T>) -> Self {
        Self {
            shape: t.shape().to_vec(),
            data: t.data().iter().map(|&v| Complex::new(v, T::zero())).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn hw(&self) -> (usize, usize) {
        let r = self.shape.len();
        if r == 1 {
            (1, self.shape[0])
        } else {
            (self.shape[r - 2], self.shape[r - 1])
        }
    }

    pub fn re(&self) -> Tensor<T> {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|c| c.re).collect())
    }

    pub fn im(&self) -> Tensor<T> {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|c| c.im).collect())
    }
}

struct Plan1d<T> {
    n: usize,
    rev: Vec<usize>,
    twiddle: Vec<Complex<T>>,
}

impl<T: Real> Plan1d<T> {
    fn new(n: usize) -> Self {
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if n == 1 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        // Twiddles in f64 so the f32 path carries no extra trig error.
        let twiddle = (0..n / 2)
            .map(|k| {
                let a = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(T::of(a.cos()), T::of(a.sin()))
            })
            .collect();
        Self { n, rev, twiddle }
    }

    fn run(&self, buf: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddle[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

fn check_pow2(h: usize, w: usize) -> Result<()> {
    if !h.is_power_of_two() {
        return Err(Error::shape(format!(
            "FFT height {h} is not a power of two"
        )));
    }
    if !w.is_power_of_two() {
        return Err(Error::shape(format!("FFT width {w} is not a power of two")));
    }
    Ok(())
}

fn transform<T: Real>(grid: &mut ComplexGrid<T>, inverse: bool) -> Result<()> {
    let (h, w) = grid.hw();
    check_pow2(h, w)?;
    let ph = Plan1d::new(h);
    let pw = Plan1d::new(w);
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];
    let scale = T::of(1.0 / (h * w) as f64);
    for plane in grid.data.chunks_exact_mut(h * w) {
        for row in plane.chunks_exact_mut(w) {
            pw.run(row, inverse);
        }
        for c in 0..w {
            for r in 0..h {
                col[r] = plane[r * w + c];
            }
            ph.run(&mut col, inverse);
            for r in 0..h {
                plane[r * w + c] = col[r];
            }
        }
        if inverse {
            plane.iter_mut().for_each(|v| *v = *v * scale);
        }
    }
    Ok(())
}

/// Unnormalized forward 2-D DFT of every trailing `h × w` plane.
pub fn fft2<T: Real>(t: &Tensor<T>) -> Result<ComplexGrid<T>> {
    let mut g = ComplexGrid::from_real(t);
    transform(&mut g, false)?;
    Ok(g)
}

pub fn fft2_complex<T: Real>(c: &ComplexGrid<T>) -> Result<ComplexGrid<T>> {
    let mut g = c.clone();
    transform(&mut g, false)?;
    Ok(g)
}

/// Inverse 2-D DFT, scaled by `1/(h·w)`.
pub fn ifft2_complex<T: Real>(c: &ComplexGrid<T>) -> Result<ComplexGrid<T>> {
    let mut g = c.clone();
    transform(&mut g, true)?;
    Ok(g)
}

/// Inverse 2-D DFT keeping the real part.
pub fn ifft2<T: Real>(c: &ComplexGrid<T>) -> Result<Tensor<T>> {
    Ok(ifft2_complex(c)?.re())
}
