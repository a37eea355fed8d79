use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::gemm;
use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Affine layer `y = act(x·W + b)` with `W` stored `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        DenseParams { weight: Tensor::uniform_init(&[input, output], input, rng), bias: Tensor::zeros(&[output]) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    output: Tensor,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Tensor,
    pub bias: Tensor,
    pub d_input: Tensor,
}

/// `x` is `[B, in]`; returns `[B, out]`.
pub fn dense_forward(p: &DenseParams, x: &Tensor, activation: Activation) -> Result<(Tensor, DenseCache), NnError> {
    let (din, dout) = (p.input_dim(), p.output_dim());
    p.bias.expect_shape("dense_forward", &[dout])?;
    if x.shape().len() != 2 || x.shape()[1] != din {
        return Err(NnError::ShapeMismatch {
            op: "dense_forward",
            expected: vec![x.shape().first().copied().unwrap_or(0), din],
            found: x.shape().to_vec(),
        });
    }
    let batch = x.shape()[0];
    let mut y = Tensor::zeros(&[batch, dout]);
    for row in y.data_mut().chunks_exact_mut(dout) {
        row.copy_from_slice(p.bias.data());
    }
    gemm(batch, din, dout, x.data(), false, p.weight.data(), false, 1.0, y.data_mut());
    if activation == Activation::Relu {
        y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    y.check_finite("dense_forward")?;
    Ok((y.clone(), DenseCache { input: x.clone(), output: y, activation }))
}

pub fn dense_backward(p: &DenseParams, cache: &DenseCache, dy: &Tensor) -> Result<DenseGrads, NnError> {
    let (din, dout) = (p.input_dim(), p.output_dim());
    let batch = cache.input.shape()[0];
    dy.expect_shape("dense_backward", &[batch, dout])?;
    let mut dz = dy.clone();
    if cache.activation == Activation::Relu {
        for (g, y) in dz.data_mut().iter_mut().zip(cache.output.data()) {
            if *y <= 0.0 {
                *g = 0.0;
            }
        }
    }
    let mut weight = Tensor::zeros(&[din, dout]);
    gemm(din, batch, dout, cache.input.data(), true, dz.data(), false, 0.0, weight.data_mut());
    let mut bias = Tensor::zeros(&[dout]);
    for row in dz.data().chunks_exact(dout) {
        for (acc, g) in bias.data_mut().iter_mut().zip(row) {
            *acc += g;
        }
    }
    let mut d_input = Tensor::zeros(&[batch, din]);
    gemm(batch, dout, din, dz.data(), false, p.weight.data(), true, 0.0, d_input.data_mut());
    Ok(DenseGrads { weight, bias, d_input })
}

/// Inverted dropout: in training each entry is zeroed with probability
/// `rate` and survivors are scaled by `1/(1−rate)`; at inference it is the
/// identity. Returns the output and the multiplicative mask applied.
pub fn dropout(x: &Tensor, rate: f64, rng: &mut impl Rng, training: bool) -> Result<(Tensor, Vec<f64>), NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::BadRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), vec![1.0; x.len()]));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len()).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((Tensor::from_vec(x.shape(), data)?, mask))
}
