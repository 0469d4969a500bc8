use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Real, Tensor};

/// A named trainable tensor and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }
}

/// Seeded initializer. Draws happen in f64 so an f32 and an f64 model built
/// from the same seed agree up to rounding.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[-√(1/fan_in), √(1/fan_in)]`.
    pub fn fan_in<T: Real>(&mut self, shape: &[usize], fan_in: usize) -> Tensor<T> {
        let bound = (1.0 / fan_in as f64).sqrt();
        self.uniform(shape, -bound, bound)
    }

    pub fn uniform<T: Real>(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::of(self.rng.random_range(lo..hi))).collect();
        Tensor::new(shape.to_vec(), data).expect("init shape")
    }

    pub fn constant<T: Real>(&mut self, shape: &[usize], v: f64) -> Tensor<T> {
        Tensor::filled(shape, T::of(v))
    }
}
