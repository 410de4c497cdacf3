//! ν-one-class SVM dual solver.
//!
//! Solves `min ½ αᵀKα` subject to `0 ≤ αᵢ ≤ 1/(νM)` and `Σ αᵢ = 1` by
//! SMO-style pairwise updates on the maximal violating pair, which keeps the
//! equality constraint satisfied at every step.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::ScoreTable;
use crate::error::{GadError, Result};
use crate::numerics::Tensor;
use crate::rng;

/// A fitted kernel model with its training scores and Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit<M> {
    pub model: M,
    pub scores: ScoreTable,
    pub gram: Tensor,
}

pub const KKT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSolution {
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
    pub support_indices: Vec<usize>,
    /// Dual objective `½ αᵀKα`.
    pub objective: f64,
    pub iterations: usize,
    /// Set when no margin support vector existed and `rho` came from the
    /// bound support vectors instead.
    pub rho_from_bound: bool,
}

impl SvmSolution {
    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.alphas.len() as f64)
    }
}

fn check_square_symmetric(gram: &Tensor) -> Result<usize> {
    let m = gram.rows();
    if gram.cols() != m {
        return Err(GadError::ShapeMismatch(format!("gram is {:?}", gram.shape())));
    }
    let scale = (0..m).map(|i| gram.get(i, i).abs()).fold(1.0, f64::max);
    for i in 0..m {
        for j in i + 1..m {
            if (gram.get(i, j) - gram.get(j, i)).abs() > 1e-10 * scale {
                return Err(GadError::NotPsd);
            }
        }
    }
    Ok(m)
}

/// Cholesky test of `K + 2·tol·I`: passes iff the smallest eigenvalue of `K`
/// is (numerically) at least `-tol`.
pub fn is_psd(gram: &Tensor, tol: f64) -> bool {
    let m = gram.rows();
    let mut l = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = gram.get(i, j);
            if i == j {
                s += 2.0 * tol;
            }
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    true
}

/// Fits the ν-one-class SVM dual on a precomputed Gram matrix.
///
/// The seed only decides which items hold the initial feasible mass.
pub fn ocsvm_fit(gram: &Tensor, nu: f64, seed: u64) -> Result<SvmSolution> {
    let m = check_square_symmetric(gram)?;
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(GadError::InvalidConfig(format!("nu = {nu} outside (0, 1]")));
    }
    if m == 0 {
        return Err(GadError::TooFewPoints { needed: 1, found: 0 });
    }
    let scale = (0..m).map(|i| gram.get(i, i).abs()).fold(1.0, f64::max);
    if !is_psd(gram, 1e-8 * scale) {
        return Err(GadError::NotPsd);
    }

    let c = 1.0 / (nu * m as f64);
    let mut alphas = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng::seeded(seed, 0));
    let mut remaining = 1.0f64;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let a = c.min(remaining);
        alphas[i] = a;
        remaining -= a;
    }

    // grad = K α
    let mut grad: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|j| gram.get(i, j) * alphas[j]).sum())
        .collect();

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        // i can grow, j can shrink
        let mut up: Option<(usize, f64)> = None;
        let mut down: Option<(usize, f64)> = None;
        for k in 0..m {
            if alphas[k] < c && up.is_none_or(|(_, g)| grad[k] < g) {
                up = Some((k, grad[k]));
            }
            if alphas[k] > 0.0 && down.is_none_or(|(_, g)| grad[k] > g) {
                down = Some((k, grad[k]));
            }
        }
        let (Some((i, gi)), Some((j, gj))) = (up, down) else { break };
        if gj - gi <= KKT_TOLERANCE {
            break;
        }
        iterations += 1;
        let eta = gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j);
        let cap_i = c - alphas[i];
        let cap_j = alphas[j];
        let cap = cap_i.min(cap_j);
        let step = if eta > 1e-12 { ((gj - gi) / eta).min(cap) } else { cap };
        if step <= 0.0 {
            break;
        }
        alphas[i] = if step == cap_i { c } else { alphas[i] + step };
        alphas[j] = if step == cap_j { 0.0 } else { alphas[j] - step };
        for (k, g) in grad.iter_mut().enumerate() {
            *g += step * (gram.get(k, i) - gram.get(k, j));
        }
    }

    let free_eps = 1e-12 * c;
    let free: Vec<usize> = (0..m)
        .filter(|&k| alphas[k] > free_eps && alphas[k] < c - free_eps)
        .collect();
    let (rho, rho_from_bound) = if free.is_empty() {
        let bound_max = (0..m)
            .filter(|&k| alphas[k] >= c - free_eps)
            .map(|k| grad[k])
            .fold(f64::NEG_INFINITY, f64::max);
        log::warn!("one-class SVM has no margin support vectors; rho taken from bound support vectors");
        (bound_max, true)
    } else {
        (free.iter().map(|&k| grad[k]).sum::<f64>() / free.len() as f64, false)
    };

    let objective = 0.5 * alphas.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();
    let support_indices = (0..m).filter(|&k| alphas[k] > 0.0).collect();
    Ok(SvmSolution {
        alphas,
        rho,
        nu,
        support_indices,
        objective,
        iterations,
        rho_from_bound,
    })
}

/// Decision value `Σ αᵢ k(x, xᵢ)` for a kernel row against the training items.
pub fn decision_value(sol: &SvmSolution, gram_row: &[f64]) -> Result<f64> {
    if gram_row.len() != sol.alphas.len() {
        return Err(GadError::LengthMismatch {
            expected: sol.alphas.len(),
            found: gram_row.len(),
        });
    }
    Ok(sol.alphas.iter().zip(gram_row).map(|(a, k)| a * k).sum())
}

/// Anomaly score `rho − Σ αᵢ k(x, xᵢ)`; larger is more anomalous.
pub fn ocsvm_score(sol: &SvmSolution, gram_row: &[f64]) -> Result<f64> {
    Ok(sol.rho - decision_value(sol, gram_row)?)
}
