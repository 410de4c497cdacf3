//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the tape is already a
//! topological order and `backward` is a single reverse sweep.

use std::collections::BTreeMap;

use super::ops::{elu_grad, elu_scalar, log_sigmoid_scalar, sigmoid_scalar};
use super::params::{ParamId, ParamSet};
use super::tensor::{gemm, Tensor};
use crate::error::{GadError, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Elu(usize, f64),
    Sigmoid(usize),
    LogSigmoid(usize),
    Exp(usize),
    Square(usize),
    Sum(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of a scalar loss with respect to every parameter on the tape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.by_param.get(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GadError::ShapeMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    /// A leaf whose gradient is reported under `id`.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.push(params.get(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, w) = (self.value(a), self.value(b));
        if x.cols() != w.rows() {
            return Err(GadError::ShapeMismatch(format!(
                "matmul {:?} by {:?}",
                x.shape(),
                w.shape()
            )));
        }
        let mut out = Tensor::zeros(x.rows(), w.cols());
        gemm(x, false, w, false, &mut out);
        Ok(self.push(out, Op::MatMul(a.0, b.0)))
    }

    /// Adds a `1×C` bias to every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.shape() != (1, x.cols()) {
            return Err(GadError::ShapeMismatch(format!(
                "bias {:?} for {:?}",
                b.shape(),
                x.shape()
            )));
        }
        let mut out = x.clone();
        let bv = b.data();
        for row in out.data_mut().chunks_exact_mut(bv.len().max(1)) {
            for (o, v) in row.iter_mut().zip(bv) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::AddBias(a.0, bias.0)))
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let h = self.matmul(x, w)?;
        self.add_bias(h, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "add")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "sub")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "mul")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::Scale(a.0, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::AddScalar(a.0))
    }

    pub fn elu(&mut self, a: Var, alpha: f64) -> Var {
        let out = self.value(a).map(|x| elu_scalar(x, alpha));
        self.push(out, Op::Elu(a.0, alpha))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid_scalar);
        self.push(out, Op::Sigmoid(a.0))
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(log_sigmoid_scalar);
        self.push(out, Op::LogSigmoid(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a.0))
    }

    /// Sum of all entries as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a.0))
    }

    /// `mu + exp(log_sigma) ⊙ noise` with gradients to `mu` and `log_sigma`.
    pub fn reparam_sample(&mut self, mu: Var, log_sigma: Var, noise: Tensor) -> Result<Var> {
        same_shape(self.value(mu), &noise, "reparam noise")?;
        let sigma = self.exp(log_sigma);
        let n = self.constant(noise);
        let scaled = self.mul(sigma, n)?;
        self.add(mu, scaled)
    }

    /// Reverse sweep from a scalar node. A graph can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(GadError::GraphConsumed);
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(GadError::ShapeMismatch("loss must be a 1x1 scalar".into()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Constant => {}
                Op::Param(id) => accumulate_param(&mut out, id, g),
                Op::MatMul(a, b) => {
                    let x = &self.nodes[a].value;
                    let w = &self.nodes[b].value;
                    let mut dx = Tensor::zeros(x.rows(), x.cols());
                    gemm(&g, false, w, true, &mut dx);
                    let mut dw = Tensor::zeros(w.rows(), w.cols());
                    gemm(x, true, &g, false, &mut dw);
                    accumulate(&mut grads, a, dx);
                    accumulate(&mut grads, b, dw);
                }
                Op::AddBias(a, b) => {
                    let cols = g.cols();
                    let mut db = Tensor::zeros(1, cols);
                    for row in g.data().chunks_exact(cols.max(1)) {
                        for (d, v) in db.data_mut().iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, b, db);
                    accumulate(&mut grads, a, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, b, g.clone());
                    accumulate(&mut grads, a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, b, g.map(|v| -v));
                    accumulate(&mut grads, a, g);
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(&self.nodes[b].value, |gv, y| gv * y)?;
                    let db = g.zip_map(&self.nodes[a].value, |gv, x| gv * x)?;
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::Scale(a, c) => accumulate(&mut grads, a, g.map(|v| c * v)),
                Op::AddScalar(a) => accumulate(&mut grads, a, g),
                Op::Elu(a, alpha) => {
                    let d = g.zip_map(&self.nodes[a].value, |gv, x| gv * elu_grad(x, alpha))?;
                    accumulate(&mut grads, a, d);
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y))?;
                    accumulate(&mut grads, a, d);
                }
                Op::LogSigmoid(a) => {
                    let d = g.zip_map(&self.nodes[a].value, |gv, x| gv * sigmoid_scalar(-x))?;
                    accumulate(&mut grads, a, d);
                }
                Op::Exp(a) => {
                    let d = g.zip_map(&node.value, |gv, y| gv * y)?;
                    accumulate(&mut grads, a, d);
                }
                Op::Square(a) => {
                    let d = g.zip_map(&self.nodes[a].value, |gv, x| 2.0 * gv * x)?;
                    accumulate(&mut grads, a, d);
                }
                Op::Sum(a) => {
                    let (r, c) = self.nodes[a].value.shape();
                    accumulate(&mut grads, a, Tensor::full(r, c, g.item()));
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], i: usize, g: Tensor) {
    match &mut grads[i] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_param(out: &mut Gradients, id: ParamId, g: Tensor) {
    match out.by_param.get_mut(&id) {
        Some(existing) => existing.add_assign(&g),
        None => {
            out.by_param.insert(id, g);
        }
    }
}
