//! RBF kernels, group mean-embedding kernels and the median bandwidth heuristic.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Group, GroupDataset};
use crate::error::{GadError, Result};
use crate::numerics::Tensor;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
}

/// `k(x, y) = exp(-‖x − y‖² / bandwidth)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(GadError::InvalidConfig(format!("bandwidth {bandwidth} must be positive")));
        }
        Ok(Self {
            kind: KernelKind::Rbf,
            bandwidth,
        })
    }
}

/// `exp(-t)` for `t ≥ 0`, written so the compiler can vectorise it.
///
/// Cody–Waite range reduction to `r ∈ [-ln2/2, ln2/2]` followed by a
/// degree-12 Taylor polynomial; relative error stays below 1e-15.
#[inline(always)]
pub(crate) fn exp_neg(t: f64) -> f64 {
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 0.693_147_180_369_123_8;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = (-t).max(-708.0);
    let shifted = x * std::f64::consts::LOG2_E + SHIFTER;
    let k = shifted - SHIFTER;
    let r = x - k * LN2_HI - k * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // low bits of `shifted` hold k as a two's-complement integer
    let scale = f64::from_bits(shifted.to_bits().wrapping_add(1023) << 52);
    p * scale
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf_kernel(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(GadError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok((-squared_distance(x, y) / spec.bandwidth).exp())
}

/// A point set stored dimension-major for the inner kernel loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    n: usize,
    dim: usize,
    columns: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn from_group(g: &Group) -> Self {
        let columns = (0..g.dim())
            .map(|j| g.rows().map(|r| r[j]).collect())
            .collect();
        Self {
            n: g.n_points(),
            dim: g.dim(),
            columns,
        }
    }

    /// Points `idx` of `g` only.
    pub fn from_group_subset(g: &Group, idx: &[usize]) -> Self {
        let columns = (0..g.dim())
            .map(|j| idx.iter().map(|&i| g.get(i, j)).collect())
            .collect();
        Self {
            n: idx.len(),
            dim: g.dim(),
            columns,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn to_group(&self) -> Result<Group> {
        let mut data = Vec::with_capacity(self.n * self.dim);
        for i in 0..self.n {
            for c in &self.columns {
                data.push(c[i]);
            }
        }
        Group::new(self.n, self.dim, data)
    }
}

const LANES: usize = 8;

/// `Σ_b exp(-‖x − y_b‖² · inv_bw)` over all points `y_b` of `set`.
fn kernel_row_sum(x: &[f64], set: &PointSet, inv_bw: f64) -> f64 {
    let n = set.n;
    let full = n - n % LANES;
    let mut acc = [0.0f64; LANES];
    let mut start = 0;
    while start < full {
        let mut d2 = [0.0f64; LANES];
        for (xj, col) in x.iter().zip(&set.columns) {
            let c = &col[start..start + LANES];
            for l in 0..LANES {
                let d = xj - c[l];
                d2[l] += d * d;
            }
        }
        for l in 0..LANES {
            acc[l] += exp_neg(d2[l] * inv_bw);
        }
        start += LANES;
    }
    let mut total: f64 = acc.iter().sum();
    for b in full..n {
        let d2: f64 = x
            .iter()
            .zip(&set.columns)
            .map(|(xj, col)| (xj - col[b]) * (xj - col[b]))
            .sum();
        total += exp_neg(d2 * inv_bw);
    }
    total
}

fn set_kernel(a: &PointSet, b: &PointSet, spec: &KernelSpec) -> f64 {
    let inv_bw = 1.0 / spec.bandwidth;
    let mut x = vec![0.0; a.dim];
    let mut total = 0.0;
    for i in 0..a.n {
        for (xj, col) in x.iter_mut().zip(&a.columns) {
            *xj = col[i];
        }
        total += kernel_row_sum(&x, b, inv_bw);
    }
    total / (a.n as f64 * b.n as f64)
}

/// Inner product of the empirical kernel mean embeddings of two groups.
pub fn mean_map_kernel(gi: &Group, gj: &Group, spec: &KernelSpec) -> Result<f64> {
    if gi.dim() != gj.dim() {
        return Err(GadError::DimensionMismatch {
            expected: gi.dim(),
            found: gj.dim(),
        });
    }
    Ok(set_kernel(&PointSet::from_group(gi), &PointSet::from_group(gj), spec))
}

/// Symmetric group-level Gram matrix; rows are filled in parallel.
pub fn embedding_gram(sets: &[PointSet], spec: &KernelSpec) -> Result<Tensor> {
    let m = sets.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| set_kernel(&sets[i], &sets[j], spec)).collect())
        .collect();
    let mut gram = Tensor::zeros(m, m);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            gram.set(i, i + off, v);
            gram.set(i + off, i, v);
        }
    }
    Ok(gram)
}

/// Kernel values between every set in `rows` and every set in `cols`.
pub fn embedding_cross_gram(rows: &[PointSet], cols: &[PointSet], spec: &KernelSpec) -> Result<Tensor> {
    if let (Some(a), Some(b)) = (rows.first(), cols.first()) {
        if a.dim != b.dim {
            return Err(GadError::DimensionMismatch {
                expected: b.dim,
                found: a.dim,
            });
        }
    }
    let data: Vec<f64> = rows
        .par_iter()
        .flat_map_iter(|r| cols.iter().map(move |c| set_kernel(r, c, spec)))
        .collect();
    Tensor::new(rows.len(), cols.len(), data)
}

/// Gram matrix of the group mean embeddings of a dataset.
pub fn group_gram(ds: &GroupDataset, spec: &KernelSpec) -> Result<Tensor> {
    let sets: Vec<PointSet> = ds.groups().iter().map(PointSet::from_group).collect();
    embedding_gram(&sets, spec)
}

/// Pointwise RBF Gram matrix of the rows of `x`.
pub fn rbf_gram(x: &Tensor, spec: &KernelSpec) -> Tensor {
    let m = x.rows();
    let mut gram = Tensor::zeros(m, m);
    for i in 0..m {
        gram.set(i, i, 1.0);
        for j in i + 1..m {
            let v = (-squared_distance(x.row(i), x.row(j)) / spec.bandwidth).exp();
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    gram
}

/// RBF kernel values between rows of `a` and rows of `b`.
pub fn rbf_cross_gram(a: &Tensor, b: &Tensor, spec: &KernelSpec) -> Result<Tensor> {
    if a.cols() != b.cols() {
        return Err(GadError::DimensionMismatch {
            expected: b.cols(),
            found: a.cols(),
        });
    }
    let mut out = Tensor::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            out.set(i, j, (-squared_distance(a.row(i), b.row(j)) / spec.bandwidth).exp());
        }
    }
    Ok(out)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, &mut upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median squared distance between distinct rows of a row-major point buffer.
///
/// All pairs are enumerated when there are at most `max_pairs` of them;
/// otherwise `max_pairs` pairs are drawn uniformly (with replacement) from the
/// seeded stream.
pub fn median_sq_distance(points: &[f64], dim: usize, max_pairs: usize, seed: u64) -> Result<f64> {
    let n = if dim == 0 { 0 } else { points.len() / dim };
    if n < 2 {
        return Err(GadError::TooFewPoints { needed: 2, found: n });
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let total_pairs = n as u128 * (n as u128 - 1) / 2;
    let mut d2: Vec<f64> = if total_pairs <= max_pairs.max(1) as u128 {
        let mut v = Vec::with_capacity(total_pairs as usize);
        for i in 0..n {
            for j in i + 1..n {
                v.push(squared_distance(row(i), row(j)));
            }
        }
        v
    } else {
        let mut rng = rng::seeded(seed, rng::stream::BANDWIDTH);
        (0..max_pairs)
            .map(|_| {
                let pick = index::sample(&mut rng, n, 2);
                squared_distance(row(pick.index(0)), row(pick.index(1)))
            })
            .collect()
    };
    let med = median_in_place(&mut d2);
    if med <= 0.0 {
        return Err(GadError::DegenerateData);
    }
    Ok(med)
}

/// Median heuristic over all observations of all groups.
pub fn median_bandwidth(ds: &GroupDataset, max_pairs: usize, seed: u64) -> Result<f64> {
    let mut pts = Vec::with_capacity(ds.total_points() * ds.dim());
    for p in ds.points() {
        pts.extend_from_slice(p);
    }
    median_sq_distance(&pts, ds.dim(), max_pairs, seed)
}

/// Draws `k` point indices out of `n` without replacement, in ascending order.
pub(crate) fn subsample_indices<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx = index::sample(rng, n, k.min(n)).into_vec();
    idx.sort_unstable();
    idx
}
