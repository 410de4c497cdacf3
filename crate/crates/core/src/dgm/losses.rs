//! Reconstruction, KL and adversarial losses on plain values.

use serde::{Deserialize, Serialize};

use crate::dataset::Group;
use crate::error::{GadError, Result};

/// Encoder output for one group: mean and log standard deviation of `q(z|G)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderOutput {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl EncoderOutput {
    pub fn new(mu: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != log_sigma.len() {
            return Err(GadError::LengthMismatch {
                expected: mu.len(),
                found: log_sigma.len(),
            });
        }
        if !mu.iter().chain(&log_sigma).all(|x| x.is_finite()) {
            return Err(GadError::DomainError(f64::NAN));
        }
        Ok(Self { mu, log_sigma })
    }

    pub fn latent_size(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|l| l.exp()).collect()
    }
}

/// Squared Frobenius distance `‖g − ĝ‖²`.
pub fn recon_loss(g: &Group, g_hat: &Group) -> Result<f64> {
    if (g.n_points(), g.dim()) != (g_hat.n_points(), g_hat.dim()) {
        return Err(GadError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            g.n_points(),
            g.dim(),
            g_hat.n_points(),
            g_hat.dim()
        )));
    }
    Ok(g.data()
        .iter()
        .zip(g_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `KL(N(μ, diag σ²) ‖ N(0, I)) = ½ Σ (σ² + μ² − 1 − 2 log σ)`.
pub fn kl_term(enc: &EncoderOutput) -> f64 {
    0.5 * enc
        .mu
        .iter()
        .zip(&enc.log_sigma)
        .map(|(m, ls)| (2.0 * ls).exp() + m * m - 1.0 - 2.0 * ls)
        .sum::<f64>()
}

pub fn vae_loss(g: &Group, g_hat: &Group, enc: &EncoderOutput, kl_weight: f64) -> Result<f64> {
    Ok(recon_loss(g, g_hat)? + kl_weight * kl_term(enc))
}

/// Adversarial losses from discriminator outputs on prior samples (`real`)
/// and on encoder codes (`fake`).
///
/// Returns `(L_G, L_D)` with `L_G = mean log D(z)` and
/// `L_D = −mean [log D(z') + log(1 − D(z))]`.
pub fn aae_losses(real: &[f64], fake: &[f64]) -> Result<(f64, f64)> {
    if real.len() != fake.len() {
        return Err(GadError::LengthMismatch {
            expected: real.len(),
            found: fake.len(),
        });
    }
    if real.is_empty() {
        return Err(GadError::InvalidConfig("empty minibatch".into()));
    }
    if let Some(&bad) = real.iter().chain(fake).find(|&&d| !(d > 0.0 && d < 1.0)) {
        return Err(GadError::DomainError(bad));
    }
    let m = real.len() as f64;
    let l_g = fake.iter().map(|d| d.ln()).sum::<f64>() / m;
    let l_d = -real
        .iter()
        .zip(fake)
        .map(|(r, f)| r.ln() + (1.0 - f).ln())
        .sum::<f64>()
        / m;
    Ok((l_g, l_d))
}
