//! Rotated-Gaussian group benchmark.
//!
//! Regular groups are bivariate Gaussians with covariance
//! `[[var, cov], [cov, var]]`; anomalous groups flip the sign of the
//! off-diagonal. Group means are drawn uniformly from a box. Anomalous groups
//! are placed after all regular ones.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Group, GroupDataset};
use crate::error::{GadError, Result};
use crate::rng::{self, BoxMuller};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_regular: usize,
    pub n_anomalous: usize,
    pub points_per_group: usize,
    pub mean_low: f64,
    pub mean_high: f64,
    pub var: f64,
    pub cov: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_regular: 500,
            n_anomalous: 50,
            points_per_group: 1536,
            mean_low: -0.6,
            mean_high: 0.6,
            var: 0.2,
            cov: 0.14,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(GadError::InvalidConfig(msg.to_string()));
        if !(self.var > 0.0) || !self.var.is_finite() {
            return bad("var must be positive");
        }
        if !(self.cov.abs() < self.var) {
            return bad("|cov| must be below var");
        }
        if self.n_regular < 1 {
            return bad("n_regular must be at least 1");
        }
        if self.points_per_group < 2 {
            return bad("points_per_group must be at least 2");
        }
        if !(self.mean_low <= self.mean_high) || !self.mean_low.is_finite() || !self.mean_high.is_finite() {
            return bad("mean bounds must be finite with mean_low <= mean_high");
        }
        Ok(())
    }

    pub fn regular_covariance(&self) -> [[f64; 2]; 2] {
        [[self.var, self.cov], [self.cov, self.var]]
    }

    pub fn anomalous_covariance(&self) -> [[f64; 2]; 2] {
        [[self.var, -self.cov], [-self.cov, self.var]]
    }

    pub fn n_groups(&self) -> usize {
        self.n_regular + self.n_anomalous
    }
}

/// Lower Cholesky factor of a 2×2 SPD matrix.
fn cholesky2(s: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l00 = s[0][0].sqrt();
    let l10 = s[1][0] / l00;
    let l11 = (s[1][1] - l10 * l10).sqrt();
    [[l00, 0.0], [l10, l11]]
}

pub fn generate(cfg: &SyntheticConfig) -> Result<GroupDataset> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed, rng::stream::SYNTHETIC);
    let mut normal = BoxMuller::new();
    let chol_reg = cholesky2(cfg.regular_covariance());
    let chol_anom = cholesky2(cfg.anomalous_covariance());
    let n = cfg.points_per_group;

    let mut groups = Vec::with_capacity(cfg.n_groups());
    let mut labels = Vec::with_capacity(cfg.n_groups());
    for m in 0..cfg.n_groups() {
        let anomalous = m >= cfg.n_regular;
        let l = if anomalous { chol_anom } else { chol_reg };
        let mu = [
            rng.gen_range(cfg.mean_low..=cfg.mean_high),
            rng.gen_range(cfg.mean_low..=cfg.mean_high),
        ];
        let mut data = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let z0 = normal.sample(&mut rng);
            let z1 = normal.sample(&mut rng);
            data.push(mu[0] + l[0][0] * z0);
            data.push(mu[1] + l[1][0] * z0 + l[1][1] * z1);
        }
        groups.push(Group::new(n, 2, data)?);
        labels.push(anomalous);
    }
    GroupDataset::new(groups, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_regular: 20,
            n_anomalous: 5,
            points_per_group: 1536,
            seed,
            ..Default::default()
        }
    }

    fn sample_cov(g: &Group) -> [[f64; 2]; 2] {
        let n = g.n_points() as f64;
        let (mut m0, mut m1) = (0.0, 0.0);
        for r in g.rows() {
            m0 += r[0];
            m1 += r[1];
        }
        m0 /= n;
        m1 /= n;
        let (mut c00, mut c01, mut c11) = (0.0, 0.0, 0.0);
        for r in g.rows() {
            let (a, b) = (r[0] - m0, r[1] - m1);
            c00 += a * a;
            c01 += a * b;
            c11 += b * b;
        }
        let d = n - 1.0;
        [[c00 / d, c01 / d], [c01 / d, c11 / d]]
    }

    #[test]
    fn covariances_match_configuration() {
        let cfg = SyntheticConfig::default();
        assert_eq!(cfg.regular_covariance(), [[0.2, 0.14], [0.14, 0.2]]);
        assert_eq!(cfg.anomalous_covariance(), [[0.2, -0.14], [-0.14, 0.2]]);
        let rho = cfg.cov / cfg.var;
        assert!((rho - 0.7).abs() < 1e-12);
    }

    #[test]
    fn paper_sized_config_has_550_groups() {
        let cfg = SyntheticConfig {
            points_per_group: 2,
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.len(), 550);
        assert_eq!(ds.labels().unwrap().iter().filter(|&&l| l).count(), 50);
        assert!(ds.labels().unwrap()[500..].iter().all(|&l| l));
    }

    #[test]
    fn large_sample_covariance_matches() {
        let cfg = SyntheticConfig {
            n_regular: 1,
            n_anomalous: 1,
            points_per_group: 100_000,
            seed: 3,
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        let reg = sample_cov(ds.group(0));
        let anom = sample_cov(ds.group(1));
        let want_reg = cfg.regular_covariance();
        let want_anom = cfg.anomalous_covariance();
        for i in 0..2 {
            for j in 0..2 {
                assert!((reg[i][j] - want_reg[i][j]).abs() < 0.01, "{reg:?}");
                assert!((anom[i][j] - want_anom[i][j]).abs() < 0.01, "{anom:?}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&small(9)).unwrap(), generate(&small(9)).unwrap());
        let a = generate(&small(9)).unwrap();
        let b = generate(&small(10)).unwrap();
        assert_ne!(a.group(0).row(0), b.group(0).row(0));
    }

    #[test]
    fn means_and_covariance_signs() {
        for seed in 0..3 {
            let cfg = small(seed);
            let ds = generate(&cfg).unwrap();
            ds.validate().unwrap();
            let tol = 5.0 * (cfg.var / cfg.points_per_group as f64).sqrt();
            for (g, &anom) in ds.groups().iter().zip(ds.labels().unwrap()) {
                let c = sample_cov(g);
                assert_eq!(c[0][1] < 0.0, anom);
                let n = g.n_points() as f64;
                let m0 = g.rows().map(|r| r[0]).sum::<f64>() / n;
                let m1 = g.rows().map(|r| r[1]).sum::<f64>() / n;
                assert!(m0 >= cfg.mean_low - tol && m0 <= cfg.mean_high + tol);
                assert!(m1 >= cfg.mean_low - tol && m1 <= cfg.mean_high + tol);
            }
        }
    }

    #[test]
    fn sample_means_near_drawn_means() {
        // replay the mean draws with the same stream layout
        let cfg = small(4);
        let ds = generate(&cfg).unwrap();
        let mut rng = rng::seeded(cfg.seed, rng::stream::SYNTHETIC);
        let mut normal = BoxMuller::new();
        let tol = 5.0 * (cfg.var / cfg.points_per_group as f64).sqrt();
        for g in ds.groups() {
            let mu0: f64 = rng.gen_range(cfg.mean_low..=cfg.mean_high);
            let mu1: f64 = rng.gen_range(cfg.mean_low..=cfg.mean_high);
            for _ in 0..2 * cfg.points_per_group {
                normal.sample(&mut rng);
            }
            let n = g.n_points() as f64;
            let m0 = g.rows().map(|r| r[0]).sum::<f64>() / n;
            let m1 = g.rows().map(|r| r[1]).sum::<f64>() / n;
            assert!((m0 - mu0).abs() < tol && (m1 - mu1).abs() < tol);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SyntheticConfig { var: 0.0, ..Default::default() },
            SyntheticConfig { cov: 0.2, ..Default::default() },
            SyntheticConfig { n_regular: 0, ..Default::default() },
            SyntheticConfig { points_per_group: 1, ..Default::default() },
        ] {
            assert!(matches!(generate(&cfg), Err(GadError::InvalidConfig(_))));
        }
    }
}
