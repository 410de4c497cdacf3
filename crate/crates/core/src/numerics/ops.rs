//! Forward-only layer functions. The differentiable versions live on
//! [`Graph`](super::Graph) and share these scalar kernels.

use super::tensor::{gemm, Tensor};
use crate::error::{GadError, Result};

#[inline]
pub fn elu_scalar(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

#[inline]
pub fn elu_grad(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        alpha * x.exp()
    }
}

/// Logistic function, kept strictly inside (0, 1) even where f64 would round
/// to an endpoint.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `ln σ(x)` without overflow or cancellation.
#[inline]
pub fn log_sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `x · W + b` with `b` broadcast over rows.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if x.cols() != w.rows() || b.shape() != (1, w.cols()) {
        return Err(GadError::ShapeMismatch(format!(
            "dense: x {:?}, W {:?}, b {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(x.rows(), w.cols());
    gemm(x, false, w, false, &mut out);
    let bias = b.data();
    for row in out.data_mut().chunks_exact_mut(bias.len().max(1)) {
        for (o, bv) in row.iter_mut().zip(bias) {
            *o += bv;
        }
    }
    Ok(out)
}

pub fn elu(x: &Tensor, alpha: f64) -> Tensor {
    x.map(|v| elu_scalar(v, alpha))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

/// `mu + exp(log_sigma) ⊙ noise`.
pub fn reparam_sample(mu: &Tensor, log_sigma: &Tensor, noise: &Tensor) -> Result<Tensor> {
    mu.expect_shape(log_sigma.shape())?;
    mu.expect_shape(noise.shape())?;
    let data = mu
        .data()
        .iter()
        .zip(log_sigma.data())
        .zip(noise.data())
        .map(|((&m, &ls), &n)| m + ls.exp() * n)
        .collect();
    Tensor::new(mu.rows(), mu.cols(), data)
}
