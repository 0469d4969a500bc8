use super::Real;

const BLOCK: usize = 64;

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how the work is scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// 64-bit pairwise sum of any real slice.
pub fn sum_f64<T: Real>(values: &[T]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().map(|v| v.f64()).sum();
    }
    let mid = values.len() / 2;
    sum_f64(&values[..mid]) + sum_f64(&values[mid..])
}
