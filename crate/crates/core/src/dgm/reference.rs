//! Group reference construction and distance scoring.

use rand::Rng;
use rayon::prelude::*;

use super::losses::{recon_loss, EncoderOutput};
use super::train::{DgmKind, DgmModel};
use crate::dataset::{unflatten_group, Group, GroupDataset, ScoreTable};
use crate::error::{GadError, Result};
use crate::numerics::Tensor;
use crate::rng::{self, BoxMuller, GadRng};

const ENCODE_CHUNK: usize = 256;

/// Decoded representative group in data space.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReference {
    pub group: Group,
    /// Latent code that was decoded.
    pub z: Vec<f64>,
}

impl DgmModel {
    /// Encoder outputs for every group. The AAE encoder is deterministic, so
    /// its `log_sigma` is reported as `-inf`.
    pub fn encode(&self, ds: &GroupDataset) -> Result<Vec<EncoderOutput>> {
        let idx: Vec<usize> = (0..ds.len()).collect();
        let chunks: Vec<Result<Vec<EncoderOutput>>> = idx
            .par_chunks(ENCODE_CHUNK)
            .map(|c| {
                let x = self.batch(ds, c)?;
                let (mu, ls) = self.encoder.eval(&self.params, &x)?;
                Ok((0..c.len())
                    .map(|r| EncoderOutput {
                        mu: mu.row(r).to_vec(),
                        log_sigma: match &ls {
                            Some(t) => t.row(r).to_vec(),
                            None => vec![f64::NEG_INFINITY; mu.cols()],
                        },
                    })
                    .collect())
            })
            .collect();
        let mut out = Vec::with_capacity(ds.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }

    /// Decodes a latent code into a data-space group.
    pub fn decode(&self, z: &[f64]) -> Result<Group> {
        let zt = Tensor::new(1, z.len(), z.to_vec())?;
        let mut flat = self.decoder.eval(&self.params, &zt)?.into_data();
        self.normalizer.inverse(&mut flat);
        unflatten_group(&flat, self.n_points, self.dim)
    }

    fn draw_reference(&self, codes: &[EncoderOutput], rng: &mut GadRng, bm: &mut BoxMuller) -> Result<GroupReference> {
        let k = self.config.latent_size;
        let z = match self.config.kind {
            DgmKind::Vae => {
                let (mu, sigma) = average_code(codes, k);
                mu.iter().zip(&sigma).map(|(m, s)| m + s * bm.sample(rng)).collect()
            }
            DgmKind::Aae => codes[rng.gen_range(0..codes.len())].mu.clone(),
        };
        Ok(GroupReference { group: self.decode(&z)?, z })
    }
}

/// Arithmetic means of `μ_m` and of `σ_m` over groups.
pub fn average_code(codes: &[EncoderOutput], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mu = vec![0.0; k];
    let mut sigma = vec![0.0; k];
    for c in codes {
        for j in 0..k {
            mu[j] += c.mu[j];
            sigma[j] += c.log_sigma[j].exp();
        }
    }
    let m = codes.len() as f64;
    for j in 0..k {
        mu[j] /= m;
        sigma[j] /= m;
    }
    (mu, sigma)
}

/// `n_reference_draws` references built from the encodings of `ds`.
pub fn group_references(model: &DgmModel, ds: &GroupDataset, seed: u64) -> Result<Vec<GroupReference>> {
    if !model.is_trained() {
        return Err(GadError::UntrainedModel);
    }
    if ds.is_empty() {
        return Err(GadError::NoGroups);
    }
    let codes = model.encode(ds)?;
    let mut rng = rng::seeded(seed, rng::stream::REFERENCE);
    let mut bm = BoxMuller::new();
    (0..model.config.n_reference_draws)
        .map(|_| model.draw_reference(&codes, &mut rng, &mut bm))
        .collect()
}

pub fn group_reference(model: &DgmModel, ds: &GroupDataset, seed: u64) -> Result<GroupReference> {
    Ok(group_references(model, ds, seed)?.swap_remove(0))
}

/// Squared Frobenius distance of every group to `reference`.
pub fn score(reference: &GroupReference, ds: &GroupDataset) -> Result<ScoreTable> {
    score_many(std::slice::from_ref(reference), ds)
}

/// Distances averaged over several references.
pub fn score_many(references: &[GroupReference], ds: &GroupDataset) -> Result<ScoreTable> {
    if references.is_empty() {
        return Err(GadError::UntrainedModel);
    }
    let scores = ds
        .groups()
        .par_iter()
        .map(|g| {
            let mut total = 0.0;
            for r in references {
                total += recon_loss(&r.group, g)?;
            }
            Ok(total / references.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreTable::from_scores(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgm::train::{train, TrainConfig};
    use crate::synthetic::{generate, SyntheticConfig};

    fn setup(kind: DgmKind, n_groups: usize) -> (DgmModel, GroupDataset) {
        let ds = generate(&SyntheticConfig {
            n_regular: n_groups,
            n_anomalous: 0,
            points_per_group: 4,
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            kind,
            latent_size: 3,
            hidden: vec![6],
            disc_hidden: vec![4],
            epochs: 2,
            batch_size: 3,
            ..Default::default()
        };
        (train(&ds, &cfg).unwrap(), ds)
    }

    #[test]
    fn single_group_vae_reference_uses_its_own_code() {
        let (model, ds) = setup(DgmKind::Vae, 1);
        let code = &model.encode(&ds).unwrap()[0];
        let r = group_reference(&model, &ds, 5).unwrap();
        let mut rng = rng::seeded(5, rng::stream::REFERENCE);
        let mut bm = BoxMuller::new();
        let z: Vec<f64> = code
            .mu
            .iter()
            .zip(&code.log_sigma)
            .map(|(m, ls)| m + ls.exp() * bm.sample(&mut rng))
            .collect();
        assert_eq!(r.z, z);
        assert_eq!(r.group, model.decode(&z).unwrap());
        assert_eq!((r.group.n_points(), r.group.dim()), (4, 2));
    }

    #[test]
    fn average_matches_loop() {
        let (model, ds) = setup(DgmKind::Vae, 7);
        let codes = model.encode(&ds).unwrap();
        let (mu, sigma) = average_code(&codes, 3);
        for j in 0..3 {
            let mut sm = 0.0;
            let mut ss = 0.0;
            for c in &codes {
                sm += c.mu[j];
                ss += c.log_sigma[j].exp();
            }
            assert!((mu[j] - sm / 7.0).abs() < 1e-12);
            assert!((sigma[j] - ss / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aae_reference_decodes_a_training_code() {
        let (model, ds) = setup(DgmKind::Aae, 5);
        let codes = model.encode(&ds).unwrap();
        let r = group_reference(&model, &ds, 2).unwrap();
        assert!(codes.iter().any(|c| c.mu == r.z));
    }

    #[test]
    fn reference_group_scores_zero_and_ranks_last() {
        let (model, ds) = setup(DgmKind::Vae, 5);
        let r = group_reference(&model, &ds, 3).unwrap();
        let mut groups = ds.groups().to_vec();
        groups.push(r.group.clone());
        let with_ref = GroupDataset::new(groups, None).unwrap();
        let t = score(&r, &with_ref).unwrap();
        assert_eq!(t.score(5), 0.0);
        assert_eq!(*t.order().last().unwrap(), 5);
        let mut want: Vec<(f64, usize)> = (0..6)
            .map(|m| (recon_loss(&r.group, with_ref.group(m)).unwrap(), m))
            .collect();
        want.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        assert_eq!(t.order(), want.iter().map(|w| w.1).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn untrained_model_is_rejected() {
        let (mut model, ds) = setup(DgmKind::Vae, 3);
        model.history.clear();
        assert!(matches!(group_reference(&model, &ds, 0), Err(GadError::UntrainedModel)));
    }

    #[test]
    fn averaged_draws_score_mean_distance() {
        let (mut model, ds) = setup(DgmKind::Vae, 4);
        model.config.n_reference_draws = 3;
        let refs = group_references(&model, &ds, 9).unwrap();
        assert_eq!(refs.len(), 3);
        let t = score_many(&refs, &ds).unwrap();
        for m in 0..4 {
            let want: f64 = refs.iter().map(|r| recon_loss(&r.group, ds.group(m)).unwrap()).sum::<f64>() / 3.0;
            assert!((t.score(m) - want).abs() < 1e-12);
        }
    }
}
