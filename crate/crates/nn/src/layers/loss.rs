use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Riemann approximation of `∫ |pred - target|² dV` per batch item, averaged
/// over the batch. Returns the loss and its gradient with respect to `pred`.
pub fn integral_mse_loss(pred: &Tensor, target: &Tensor, dv: f64) -> Result<(f64, Tensor)> {
    pred.same_shape(target, "loss")?;
    if !(dv > 0.0) {
        return Err(Error::Config(format!("volume element must be positive, got {dv}")));
    }
    let batch = pred.batch() as f64;
    let mut grad = pred.clone();
    let mut sum = 0.0;
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        sum += d * d;
        *g = 2.0 * d * dv / batch;
    }
    Ok((sum * dv / batch, grad))
}

/// Per-item integral MSE without the batch average.
pub fn integral_mse(pred: &[f64], target: &[f64], dv: f64) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() * dv
}
