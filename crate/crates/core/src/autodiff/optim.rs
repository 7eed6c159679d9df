use super::tensor::Tensor;
use crate::error::{Error, Result};

/// In-place SGD with L2 weight decay:
/// `θ ← θ − lr·(g + weight_decay·θ)`.
pub fn sgd_step(params: &mut [Tensor], grads: &[Tensor], lr: f64, weight_decay: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Input(format!("learning rate must be positive, got {lr}")));
    }
    if !(weight_decay >= 0.0) || !weight_decay.is_finite() {
        return Err(Error::Input(format!(
            "weight decay must be non-negative, got {weight_decay}"
        )));
    }
    if params.len() != grads.len() {
        return Err(Error::Shape {
            op: "sgd_step(parameter count)",
            left: vec![params.len()],
            right: vec![grads.len()],
        });
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape {
                op: "sgd_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
    }
    for (p, g) in params.iter_mut().zip(grads) {
        for (t, &gi) in p.data_mut().iter_mut().zip(g.data()) {
            *t -= lr * (gi + weight_decay * *t);
        }
        p.ensure_finite("sgd_step")?;
    }
    Ok(())
}

/// Value-returning form of [`sgd_step`].
pub fn sgd_updated(params: &[Tensor], grads: &[Tensor], lr: f64, weight_decay: f64) -> Result<Vec<Tensor>> {
    let mut out = params.to_vec();
    sgd_step(&mut out, grads, lr, weight_decay)?;
    Ok(out)
}
