use super::tensor::{check_same_shape, Real, Tensor4};
use crate::error::Result;

/// Mean squared error over all elements and its gradient `2 (pred - target) / N`.
pub fn mse_loss<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(f64, Tensor4<T>)> {
    check_same_shape(pred, target, "mse loss")?;
    let n = pred.data.len() as f64;
    let scale = T::of(2.0 / n);
    let mut grad = pred.clone();
    let mut sum = 0.0f64;
    for (g, &t) in grad.data.iter_mut().zip(&target.data) {
        let d = *g - t;
        sum += d.as_f64() * d.as_f64();
        *g = d * scale;
    }
    Ok((sum / n, grad))
}
