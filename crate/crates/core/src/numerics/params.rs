//! Trainable parameters and the Adam update.

use std::sync::atomic::{AtomicU32, Ordering};

use serde::{Deserialize, Serialize};

use super::graph::Gradients;
use super::tensor::Tensor;
use crate::error::{GadError, Result};

static NEXT_SET_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to one tensor inside a particular [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId {
    pub(crate) set: u32,
    pub(crate) index: u32,
}

impl ParamId {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Named weights with their Adam moments.
#[derive(Debug)]
pub struct ParamSet {
    id: u32,
    names: Vec<String>,
    values: Vec<Tensor>,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step: u64,
}

impl Clone for ParamSet {
    fn clone(&self) -> Self {
        Self {
            id: NEXT_SET_ID.fetch_add(1, Ordering::Relaxed),
            names: self.names.clone(),
            values: self.values.clone(),
            first_moment: self.first_moment.clone(),
            second_moment: self.second_moment.clone(),
            step: self.step,
        }
    }
}

impl PartialEq for ParamSet {
    /// Compares contents, ignoring the set identity.
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.values == other.values
            && self.first_moment == other.first_moment
            && self.second_moment == other.second_moment
            && self.step == other.step
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self {
            id: NEXT_SET_ID.fetch_add(1, Ordering::Relaxed),
            names: Vec::new(),
            values: Vec::new(),
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let (r, c) = value.shape();
        self.names.push(name.into());
        self.values.push(value);
        self.first_moment.push(Tensor::zeros(r, c));
        self.second_moment.push(Tensor::zeros(r, c));
        ParamId {
            set: self.id,
            index: (self.values.len() - 1) as u32,
        }
    }

    pub fn id_at(&self, index: usize) -> ParamId {
        ParamId {
            set: self.id,
            index: index as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        debug_assert_eq!(id.set, self.id, "parameter from another set");
        &self.values[id.index()]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        debug_assert_eq!(id.set, self.id, "parameter from another set");
        &mut self.values[id.index()]
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first_moment
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second_moment
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Replaces every value by name, keeping shapes; used when loading checkpoints.
    pub fn load_named<'a>(&mut self, mut lookup: impl FnMut(&str) -> Option<&'a Tensor>) -> Result<()> {
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let t = lookup(name)
                .ok_or_else(|| GadError::Serde(format!("checkpoint lacks tensor {name}")))?;
            t.expect_shape(value.shape())?;
            *value = t.clone();
        }
        Ok(())
    }

    /// Gradient list aligned with this set; parameters the graph never touched get zeros.
    pub fn align(&self, grads: &Gradients) -> Vec<Tensor> {
        (0..self.len())
            .map(|i| {
                grads
                    .get(self.id_at(i))
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(self.values[i].rows(), self.values[i].cols()))
            })
            .collect()
    }
}

/// One bias-corrected Adam update; increments the step counter.
pub fn adam_step(params: &mut ParamSet, grads: &[Tensor], cfg: &AdamConfig) -> Result<()> {
    if grads.len() != params.len() {
        return Err(GadError::ShapeMismatch(format!(
            "{} gradients for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    for (g, p) in grads.iter().zip(&params.values) {
        g.expect_shape(p.shape())?;
    }
    params.step += 1;
    let t = params.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for ((p, g), (m, v)) in params
        .values
        .iter_mut()
        .zip(grads)
        .zip(params.first_moment.iter_mut().zip(params.second_moment.iter_mut()))
    {
        let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
