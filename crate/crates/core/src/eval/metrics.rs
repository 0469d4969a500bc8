use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Real, Tensor};

fn check<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "prediction {:?} and target {:?} differ in shape",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(())
}

/// Mean squared difference over every cell.
pub fn mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    check(pred, target)?;
    let sq: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (t.f64() - p.f64()).powi(2))
        .collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

/// Coefficient of determination `1 − SS_res / SS_tot`, pooled over every
/// cell (one target mean for the whole set).
pub fn r2<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    check(pred, target)?;
    let t: Vec<f64> = target.data().iter().map(|v| v.f64()).collect();
    let mean = pairwise_sum(&t) / t.len() as f64;
    let tot: Vec<f64> = t.iter().map(|v| (v - mean).powi(2)).collect();
    let ss_tot = pairwise_sum(&tot);
    if !(ss_tot > 0.0) {
        return Err(Error::UndefinedMetric(
            "R² is undefined for a target with zero variance".into(),
        ));
    }
    let res: Vec<f64> = pred
        .data()
        .iter()
        .zip(&t)
        .map(|(&p, &t)| (t - p.f64()).powi(2))
        .collect();
    Ok(1.0 - pairwise_sum(&res) / ss_tot)
}
