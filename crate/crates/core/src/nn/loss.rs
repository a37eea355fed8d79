use super::{NnError, Tensor};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean sigmoid cross-entropy over every slot, in the overflow-free form
/// `max(z, 0) − z·y + log(1 + e^{−|z|})`. The gradient w.r.t. the logits is
/// `(σ(z) − y) / N`.
pub fn sigmoid_ce_loss(logits: &Tensor, targets: &Tensor) -> Result<(f64, Tensor), NnError> {
    targets.expect_shape("sigmoid_ce_loss", logits.shape())?;
    let n = logits.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.data().iter().zip(targets.data()) {
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid(z) - y) / n);
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(NnError::NonFiniteValue { op: "sigmoid_ce_loss" });
    }
    Ok((loss, Tensor::from_vec(logits.shape(), grad)?))
}
