use super::Model;
use crate::error::Result;
use crate::grid::Tensor;
use crate::layers::Probe;

/// End-to-end gradient probe: the MSE training loss of a model over a fixed
/// LR/HR batch as a function of every parameter coordinate.
pub struct ModelProbe {
    model: Model<f64>,
    lr: Tensor<f64>,
    hr: Tensor<f64>,
    offsets: Vec<usize>,
}

impl ModelProbe {
    pub fn new(model: Model<f64>, lr: Tensor<f64>, hr: Tensor<f64>) -> Self {
        let mut offsets = Vec::with_capacity(model.parameters().len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for p in model.parameters() {
            acc += p.numel();
            offsets.push(acc);
        }
        Self { model, lr, hr, offsets }
    }

    fn locate(&self, i: usize) -> (usize, usize) {
        let p = self.offsets.partition_point(|&o| o <= i) - 1;
        (p, i - self.offsets[p])
    }
}

impl Probe for ModelProbe {
    fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn get(&self, i: usize) -> f64 {
        let (p, j) = self.locate(i);
        self.model.parameters()[p].value.data()[j]
    }

    fn set(&mut self, i: usize, v: f64) {
        let (p, j) = self.locate(i);
        self.model.parameters_mut()[p].value.data_mut()[j] = v;
    }

    fn loss(&self) -> Result<(f64, u64)> {
        self.model.loss_signature(&self.lr, &self.hr)
    }

    fn gradient(&self) -> Result<Vec<f64>> {
        let mut m = self.model.clone();
        m.forward_backward(&self.lr, &self.hr)?;
        Ok(m.parameters().iter().flat_map(|p| p.grad.data().iter().copied()).collect())
    }
}
