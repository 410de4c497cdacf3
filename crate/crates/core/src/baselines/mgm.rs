//! Mixture of Gaussian mixtures fitted by expectation–maximisation.
//!
//! Each group draws a latent type `t ~ π`; given its type, every point of the
//! group independently draws a component `l ~ θ_t` from `L` Gaussian
//! components shared by all types. The group likelihood is
//! `Σ_t π_t Π_i Σ_l θ_{t,l} N(x_i; μ_l, Σ_l)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_plus_plus, pooled_points};
use crate::dataset::{Group, GroupDataset, ScoreTable};
use crate::error::{GadError, Result};
use crate::numerics::TensorContainer;
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Row-major `V × V` covariance.
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgmModel {
    pub n_types: usize,
    pub n_components: usize,
    pub type_weights: Vec<f64>,
    /// `T × L`, each row sums to one.
    pub mixing: Vec<Vec<f64>>,
    pub components: Vec<GaussianComponent>,
    /// Data log-likelihood before every M-step of the kept restart.
    pub log_likelihood_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgmConfig {
    pub n_types: usize,
    pub n_components: usize,
    pub max_iter: usize,
    /// Stop once the log-likelihood gains less than `tol · |ll|` in one step.
    pub tol: f64,
    pub restarts: usize,
    /// Pooled points used for k-means++ initialisation.
    pub init_points: usize,
    pub seed: u64,
}

impl Default for MgmConfig {
    fn default() -> Self {
        Self {
            n_types: 1,
            n_components: 3,
            max_iter: 200,
            tol: 1e-6,
            restarts: 5,
            init_points: 20_000,
            seed: 0,
        }
    }
}

/// A component with its inverse Cholesky factor cached for density evaluation.
struct Prepared {
    mean: Vec<f64>,
    /// Lower-triangular `L⁻¹` with `Σ = L Lᵀ`.
    inv_chol: Vec<f64>,
    log_norm: f64,
}

impl Prepared {
    fn new(c: &GaussianComponent, index: usize) -> Result<Self> {
        let v = c.mean.len();
        let mut l = vec![0.0; v * v];
        for i in 0..v {
            for j in 0..=i {
                let mut s = c.cov[i * v + j];
                for k in 0..j {
                    s -= l[i * v + k] * l[j * v + k];
                }
                if i == j {
                    if !(s > 1e-12) {
                        return Err(GadError::DegenerateComponent(index));
                    }
                    l[i * v + i] = s.sqrt();
                } else {
                    l[i * v + j] = s / l[j * v + j];
                }
            }
        }
        let log_det: f64 = (0..v).map(|i| 2.0 * l[i * v + i].ln()).sum();
        let mut inv = vec![0.0; v * v];
        for col in 0..v {
            for i in col..v {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in col..i {
                    s -= l[i * v + k] * inv[k * v + col];
                }
                inv[i * v + col] = s / l[i * v + i];
            }
        }
        Ok(Self {
            mean: c.mean.clone(),
            inv_chol: inv,
            log_norm: -0.5 * (v as f64 * LN_2PI + log_det),
        })
    }

    #[inline(always)]
    fn log_pdf_fixed<const V: usize>(&self, x: &[f64; V]) -> f64 {
        let mut d = [0.0; V];
        for a in 0..V {
            d[a] = x[a] - self.mean[a];
        }
        let mut quad = 0.0;
        for i in 0..V {
            let mut y = 0.0;
            for k in 0..=i {
                y += self.inv_chol[i * V + k] * d[k];
            }
            quad += y * y;
        }
        self.log_norm - 0.5 * quad
    }

    fn log_pdf(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let v = self.mean.len();
        for ((d, xi), m) in scratch.iter_mut().zip(x).zip(&self.mean) {
            *d = xi - m;
        }
        let mut quad = 0.0;
        for (i, row) in self.inv_chol.chunks_exact(v).enumerate() {
            let y: f64 = row[..=i].iter().zip(&scratch[..=i]).map(|(a, b)| a * b).sum();
            quad += y * y;
        }
        self.log_norm - 0.5 * quad
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Per-type point log-likelihoods `log Σ_l θ_{t,l} N(x_i; μ_l, Σ_l)` (`N × T`)
/// and the matching within-type component posteriors (`N × T × L`).
fn point_terms(g: &Group, comps: &[Prepared], log_mixing: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let l_count = comps.len();
    let t_count = log_mixing.len();
    let mut log_a = vec![0.0; g.n_points() * t_count];
    let mut post = vec![0.0; g.n_points() * t_count * l_count];
    let mut scratch = vec![0.0; g.dim()];
    let mut log_n = vec![0.0; l_count];
    let mut buf = vec![0.0; l_count];
    for (i, x) in g.rows().enumerate() {
        for (l, c) in comps.iter().enumerate() {
            log_n[l] = c.log_pdf(x, &mut scratch);
        }
        for t in 0..t_count {
            let mut max = f64::NEG_INFINITY;
            for l in 0..l_count {
                buf[l] = log_mixing[t][l] + log_n[l];
                max = max.max(buf[l]);
            }
            let p = &mut post[(i * t_count + t) * l_count..(i * t_count + t + 1) * l_count];
            if max == f64::NEG_INFINITY {
                log_a[i * t_count + t] = max;
                p.fill(0.0);
                continue;
            }
            let mut total = 0.0;
            for l in 0..l_count {
                let e = (buf[l] - max).exp();
                p[l] = e;
                total += e;
            }
            for e in p.iter_mut() {
                *e /= total;
            }
            log_a[i * t_count + t] = max + total.ln();
        }
    }
    (log_a, post)
}

/// Group log-likelihood given per-type point terms.
fn group_type_loglik(log_a: &[f64], t_count: usize, log_pi: &[f64]) -> Vec<f64> {
    let mut per_type = log_pi.to_vec();
    for row in log_a.chunks_exact(t_count) {
        for (acc, a) in per_type.iter_mut().zip(row) {
            *acc += a;
        }
    }
    per_type
}

struct GroupStats {
    loglik: f64,
    type_resp: Vec<f64>,
    type_component: Vec<f64>,
    s0: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

struct Params {
    type_weights: Vec<f64>,
    mixing: Vec<Vec<f64>>,
    components: Vec<GaussianComponent>,
}

fn e_step_group(g: &Group, comps: &[Prepared], log_pi: &[f64], log_mixing: &[Vec<f64>]) -> GroupStats {
    let t_count = log_pi.len();
    let l_count = comps.len();
    let v = g.dim();
    // per-type sufficient statistics; weighted by the type posterior at the end
    let mut t0 = vec![0.0; t_count * l_count];
    let mut t1 = vec![0.0; t_count * l_count * v];
    let mut t2 = vec![0.0; t_count * l_count * v * v];
    let mut per_type = log_pi.to_vec();
    let mut scratch = vec![0.0; v];
    let mut log_n = vec![0.0; l_count];
    let mut post = vec![0.0; l_count];
    for x in g.rows() {
        for (l, c) in comps.iter().enumerate() {
            log_n[l] = c.log_pdf(x, &mut scratch);
        }
        for t in 0..t_count {
            let lm = &log_mixing[t];
            let mut max = f64::NEG_INFINITY;
            for l in 0..l_count {
                post[l] = lm[l] + log_n[l];
                max = max.max(post[l]);
            }
            if max == f64::NEG_INFINITY {
                per_type[t] = f64::NEG_INFINITY;
                continue;
            }
            let mut total = 0.0;
            for p in post.iter_mut() {
                *p = (*p - max).exp();
                total += *p;
            }
            per_type[t] += max + total.ln();
            let inv = 1.0 / total;
            for l in 0..l_count {
                let w = post[l] * inv;
                let k = t * l_count + l;
                t0[k] += w;
                let s1 = &mut t1[k * v..(k + 1) * v];
                let s2 = &mut t2[k * v * v..(k + 1) * v * v];
                for a in 0..v {
                    let wa = w * x[a];
                    s1[a] += wa;
                    for b in 0..=a {
                        s2[a * v + b] += wa * x[b];
                    }
                }
            }
        }
    }
    let loglik = log_sum_exp(&per_type);
    let type_resp: Vec<f64> = per_type.iter().map(|x| (x - loglik).exp()).collect();

    let mut type_component = vec![0.0; t_count * l_count];
    let mut s0 = vec![0.0; l_count];
    let mut s1 = vec![0.0; l_count * v];
    let mut s2 = vec![0.0; l_count * v * v];
    for t in 0..t_count {
        let r = type_resp[t];
        for l in 0..l_count {
            let k = t * l_count + l;
            type_component[k] = r * t0[k];
            s0[l] += r * t0[k];
            for a in 0..v {
                s1[l * v + a] += r * t1[k * v + a];
            }
            for e in 0..v * v {
                s2[l * v * v + e] += r * t2[k * v * v + e];
            }
        }
    }
    GroupStats {
        loglik,
        type_resp,
        type_component,
        s0,
        s1,
        s2,
    }
}

/// [`e_step_group`] with the dimension known at compile time.
fn e_step_fixed<const V: usize>(g: &Group, comps: &[Prepared], log_pi: &[f64], log_mixing: &[Vec<f64>]) -> GroupStats {
    let t_count = log_pi.len();
    let l_count = comps.len();
    let v = V;
    // per-type sufficient statistics; weighted by the type posterior at the end
    let mut t0 = vec![0.0; t_count * l_count];
    let mut t1 = vec![0.0; t_count * l_count * v];
    let mut t2 = vec![0.0; t_count * l_count * v * v];
    let mut per_type = log_pi.to_vec();
    let mut log_n = vec![0.0; l_count];
    let mut post = vec![0.0; l_count];
    for x in g.rows() {
        let x: &[f64; V] = x.try_into().expect("row width equals V");
        for (l, c) in comps.iter().enumerate() {
            log_n[l] = c.log_pdf_fixed(x);
        }
        for t in 0..t_count {
            let lm = &log_mixing[t];
            let mut max = f64::NEG_INFINITY;
            for l in 0..l_count {
                post[l] = lm[l] + log_n[l];
                max = max.max(post[l]);
            }
            if max == f64::NEG_INFINITY {
                per_type[t] = f64::NEG_INFINITY;
                continue;
            }
            let mut total = 0.0;
            for p in post.iter_mut() {
                *p = (*p - max).exp();
                total += *p;
            }
            per_type[t] += max + total.ln();
            let inv = 1.0 / total;
            for l in 0..l_count {
                let w = post[l] * inv;
                let k = t * l_count + l;
                t0[k] += w;
                let s1 = &mut t1[k * v..(k + 1) * v];
                let s2 = &mut t2[k * v * v..(k + 1) * v * v];
                for a in 0..v {
                    let wa = w * x[a];
                    s1[a] += wa;
                    for b in 0..=a {
                        s2[a * v + b] += wa * x[b];
                    }
                }
            }
        }
    }
    let loglik = log_sum_exp(&per_type);
    let type_resp: Vec<f64> = per_type.iter().map(|x| (x - loglik).exp()).collect();

    let mut type_component = vec![0.0; t_count * l_count];
    let mut s0 = vec![0.0; l_count];
    let mut s1 = vec![0.0; l_count * v];
    let mut s2 = vec![0.0; l_count * v * v];
    for t in 0..t_count {
        let r = type_resp[t];
        for l in 0..l_count {
            let k = t * l_count + l;
            type_component[k] = r * t0[k];
            s0[l] += r * t0[k];
            for a in 0..v {
                s1[l * v + a] += r * t1[k * v + a];
            }
            for e in 0..v * v {
                s2[l * v * v + e] += r * t2[k * v * v + e];
            }
        }
    }
    GroupStats {
        loglik,
        type_resp,
        type_component,
        s0,
        s1,
        s2,
    }
}

fn prepare_all(components: &[GaussianComponent]) -> Result<Vec<Prepared>> {
    components
        .iter()
        .enumerate()
        .map(|(i, c)| Prepared::new(c, i))
        .collect()
}

fn logs(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| x.ln()).collect()
}

/// One EM iteration: returns the log-likelihood of `params` and the updated parameters.
fn em_step(ds: &GroupDataset, params: &Params) -> Result<(f64, Params)> {
    let comps = prepare_all(&params.components)?;
    let log_pi = logs(&params.type_weights);
    let log_mixing: Vec<Vec<f64>> = params.mixing.iter().map(|r| logs(r)).collect();
    let stats: Vec<GroupStats> = ds
        .groups()
        .par_iter()
        .map(|g| match g.dim() {
            1 => e_step_fixed::<1>(g, &comps, &log_pi, &log_mixing),
            2 => e_step_fixed::<2>(g, &comps, &log_pi, &log_mixing),
            3 => e_step_fixed::<3>(g, &comps, &log_pi, &log_mixing),
            _ => e_step_group(g, &comps, &log_pi, &log_mixing),
        })
        .collect();

    let t_count = params.type_weights.len();
    let l_count = params.components.len();
    let v = ds.dim();
    let mut loglik = 0.0;
    let mut type_total = vec![0.0; t_count];
    let mut tc = vec![0.0; t_count * l_count];
    let mut s0 = vec![0.0; l_count];
    let mut s1 = vec![0.0; l_count * v];
    let mut s2 = vec![0.0; l_count * v * v];
    // fixed-order reduction keeps the result independent of thread scheduling
    for st in &stats {
        loglik += st.loglik;
        for (a, b) in type_total.iter_mut().zip(&st.type_resp) {
            *a += b;
        }
        for (a, b) in tc.iter_mut().zip(&st.type_component) {
            *a += b;
        }
        for (a, b) in s0.iter_mut().zip(&st.s0) {
            *a += b;
        }
        for (a, b) in s1.iter_mut().zip(&st.s1) {
            *a += b;
        }
        for (a, b) in s2.iter_mut().zip(&st.s2) {
            *a += b;
        }
    }

    let m = ds.len() as f64;
    let type_weights: Vec<f64> = type_total.iter().map(|x| x / m).collect();
    let mixing: Vec<Vec<f64>> = (0..t_count)
        .map(|t| {
            let row = &tc[t * l_count..(t + 1) * l_count];
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter().map(|x| x / total).collect()
            } else {
                params.mixing[t].clone()
            }
        })
        .collect();
    let mut components = Vec::with_capacity(l_count);
    for l in 0..l_count {
        if !(s0[l] > 1e-10) {
            return Err(GadError::DegenerateComponent(l));
        }
        let mean: Vec<f64> = (0..v).map(|a| s1[l * v + a] / s0[l]).collect();
        let mut cov = vec![0.0; v * v];
        for a in 0..v {
            for b in 0..=a {
                let c = s2[(l * v + a) * v + b] / s0[l] - mean[a] * mean[b];
                cov[a * v + b] = c;
                cov[b * v + a] = c;
            }
        }
        regularize(&mut cov, v);
        components.push(GaussianComponent { mean, cov });
    }
    Ok((
        loglik,
        Params {
            type_weights,
            mixing,
            components,
        },
    ))
}

/// Adds `1e-6 · trace / V` to the diagonal.
fn regularize(cov: &mut [f64], v: usize) {
    let trace: f64 = (0..v).map(|a| cov[a * v + a]).sum();
    let ridge = 1e-6 * trace / v as f64;
    for a in 0..v {
        cov[a * v + a] += ridge;
    }
}

fn initial_params(ds: &GroupDataset, cfg: &MgmConfig, restart: usize) -> Result<Params> {
    let seed = cfg.seed.wrapping_add(restart as u64);
    let mut rng = rng::seeded(seed, rng::stream::MGM);
    let pooled = pooled_points(ds, cfg.init_points, seed)?;
    let centres = kmeans_plus_plus(&pooled, cfg.n_components, &mut rng)?;
    let v = ds.dim();
    let n = pooled.rows() as f64;
    let mean: Vec<f64> = (0..v)
        .map(|a| (0..pooled.rows()).map(|i| pooled.get(i, a)).sum::<f64>() / n)
        .collect();
    let mut cov = vec![0.0; v * v];
    for i in 0..pooled.rows() {
        for a in 0..v {
            for b in 0..v {
                cov[a * v + b] += (pooled.get(i, a) - mean[a]) * (pooled.get(i, b) - mean[b]) / n;
            }
        }
    }
    regularize(&mut cov, v);
    let components: Vec<GaussianComponent> = (0..cfg.n_components)
        .map(|l| GaussianComponent {
            mean: centres.row(l).to_vec(),
            cov: cov.clone(),
        })
        .collect();

    // per-group soft component counts under uniform mixing
    let comps = prepare_all(&components)?;
    let l_count = cfg.n_components;
    let uniform = vec![vec![-(l_count as f64).ln(); l_count]];
    let soft: Vec<Vec<f64>> = ds
        .groups()
        .par_iter()
        .map(|g| {
            let (_, post) = point_terms(g, &comps, &uniform);
            let mut counts = vec![0.0; l_count];
            for p in post.chunks_exact(l_count) {
                for l in 0..l_count {
                    counts[l] += p[l];
                }
            }
            let n = g.n_points() as f64;
            counts.iter().map(|c| c / n).collect()
        })
        .collect();

    use rand::Rng;
    let mut sums = vec![vec![0.0; l_count]; cfg.n_types];
    let mut members = vec![0usize; cfg.n_types];
    for s in &soft {
        let t = rng.gen_range(0..cfg.n_types);
        members[t] += 1;
        for (a, b) in sums[t].iter_mut().zip(s) {
            *a += b;
        }
    }
    let mixing = sums
        .into_iter()
        .zip(members)
        .map(|(row, cnt)| {
            if cnt == 0 {
                vec![1.0 / l_count as f64; l_count]
            } else {
                row.iter()
                    .map(|x| 0.9 * x / cnt as f64 + 0.1 / l_count as f64)
                    .collect()
            }
        })
        .collect();
    Ok(Params {
        type_weights: vec![1.0 / cfg.n_types as f64; cfg.n_types],
        mixing,
        components,
    })
}

fn run_em(ds: &GroupDataset, cfg: &MgmConfig, restart: usize) -> Result<MgmModel> {
    let mut params = initial_params(ds, cfg, restart)?;
    let mut history: Vec<f64> = Vec::new();
    for iter in 0..cfg.max_iter {
        let (ll, next) = em_step(ds, &params)?;
        let converged = history
            .last()
            .is_some_and(|&prev| ll - prev < cfg.tol * prev.abs());
        history.push(ll);
        if converged || iter + 1 == cfg.max_iter {
            break;
        }
        params = next;
    }
    Ok(MgmModel {
        n_types: cfg.n_types,
        n_components: cfg.n_components,
        type_weights: params.type_weights,
        mixing: params.mixing,
        components: params.components,
        log_likelihood_history: history,
    })
}

/// Fits the model with several seeded restarts, keeping the best final
/// log-likelihood.
pub fn mgm_fit(ds: &GroupDataset, cfg: &MgmConfig) -> Result<MgmModel> {
    if cfg.n_types == 0 || cfg.n_components == 0 || cfg.max_iter == 0 || cfg.restarts == 0 {
        return Err(GadError::InvalidConfig(
            "MGM needs n_types, n_components, max_iter and restarts all >= 1".into(),
        ));
    }
    ds.validate()?;
    let mut best: Option<MgmModel> = None;
    let mut last_err = None;
    for restart in 0..cfg.restarts {
        match run_em(ds, cfg, restart) {
            Ok(model) => {
                let ll = *model.log_likelihood_history.last().unwrap_or(&f64::NEG_INFINITY);
                let better = best.as_ref().is_none_or(|b| {
                    ll > *b.log_likelihood_history.last().unwrap_or(&f64::NEG_INFINITY)
                });
                if better {
                    best = Some(model);
                }
            }
            Err(e) => {
                log::warn!("MGM restart {restart} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(GadError::DegenerateComponent(0)))
}

impl MgmModel {
    /// Log marginal likelihood of each group under the model.
    pub fn group_log_likelihoods(&self, ds: &GroupDataset) -> Result<Vec<f64>> {
        let dim = self.components[0].mean.len();
        if ds.dim() != dim {
            return Err(GadError::DimensionMismatch {
                expected: dim,
                found: ds.dim(),
            });
        }
        let comps = prepare_all(&self.components)?;
        let log_pi = logs(&self.type_weights);
        let log_mixing: Vec<Vec<f64>> = self.mixing.iter().map(|r| logs(r)).collect();
        Ok(ds
            .groups()
            .par_iter()
            .map(|g| {
                let (log_a, _) = point_terms(g, &comps, &log_mixing);
                log_sum_exp(&group_type_loglik(&log_a, log_pi.len(), &log_pi))
            })
            .collect())
    }
}

impl MgmModel {
    pub fn to_container(&self) -> Result<TensorContainer> {
        let json = serde_json::to_string(self).map_err(|e| GadError::Serde(e.to_string()))?;
        Ok(TensorContainer::new(json))
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        serde_json::from_str(&c.metadata).map_err(|e| GadError::Serde(e.to_string()))
    }
}

/// Score `-(1/N_m) · log p(G_m)`; higher means less likely under the model.
pub fn mgm_score(model: &MgmModel, ds: &GroupDataset) -> Result<ScoreTable> {
    let ll = model.group_log_likelihoods(ds)?;
    let scores = ll
        .iter()
        .zip(ds.groups())
        .map(|(l, g)| -l / g.n_points() as f64)
        .collect();
    ScoreTable::from_scores(scores)
}
