//! VAE and AAE models, their minibatch objectives and the training loop.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{decoder, discriminator, Encoder, Mlp};
use crate::dataset::{flatten_group, GroupDataset};
use crate::error::{GadError, Result};
use crate::numerics::{adam_step, AdamConfig, Graph, ParamSet, Tensor, TensorContainer, Var};
use crate::rng::{self, BoxMuller, GadRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgmKind {
    Vae,
    Aae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(rename = "dgm_kind")]
    pub kind: DgmKind,
    pub latent_size: usize,
    pub hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kl_weight: f64,
    /// Weight of the generator term in the AAE autoencoder update.
    pub adv_weight: f64,
    /// Minimise `mean log D(z)` as written instead of `−mean log D(z)`.
    pub literal_generator_loss: bool,
    pub n_reference_draws: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: DgmKind::Vae,
            latent_size: 64,
            hidden: vec![512, 128],
            disc_hidden: vec![64, 16],
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            kl_weight: 1.0,
            adv_weight: 1.0,
            literal_generator_loss: false,
            n_reference_draws: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GadError::InvalidConfig(m.into()));
        if self.latent_size == 0 {
            return bad("latent_size must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden sizes must be non-empty and positive");
        }
        if self.disc_hidden.contains(&0) {
            return bad("discriminator hidden sizes must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.kl_weight >= 0.0) || !(self.adv_weight >= 0.0) {
            return bad("learning_rate must be > 0 and loss weights >= 0");
        }
        if self.n_reference_draws == 0 {
            return bad("n_reference_draws must be >= 1");
        }
        Ok(())
    }
}

/// Per-dimension min-max bounds mapping data into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Normalizer {
    pub fn fit(ds: &GroupDataset) -> Self {
        let v = ds.dim();
        let mut lower = vec![f64::INFINITY; v];
        let mut upper = vec![f64::NEG_INFINITY; v];
        for p in ds.points() {
            for j in 0..v {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        Self { lower, upper }
    }

    fn span(&self, j: usize) -> f64 {
        let s = self.upper[j] - self.lower[j];
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Normalises a flattened group in place.
    pub fn forward(&self, flat: &mut [f64]) {
        let v = self.lower.len();
        for (i, x) in flat.iter_mut().enumerate() {
            let j = i % v;
            *x = (*x - self.lower[j]) / self.span(j);
        }
    }

    pub fn inverse(&self, flat: &mut [f64]) {
        let v = self.lower.len();
        for (i, x) in flat.iter_mut().enumerate() {
            let j = i % v;
            *x = self.lower[j] + *x * self.span(j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub recon: f64,
    /// KL term for the VAE, `L_G` for the AAE.
    pub kl_or_adv: f64,
    pub total: f64,
    /// `L_D`, AAE only.
    pub discriminator: Option<f64>,
}

/// A trained (or freshly initialised) VAE or AAE.
#[derive(Debug, Clone, PartialEq)]
pub struct DgmModel {
    pub config: TrainConfig,
    pub n_points: usize,
    pub dim: usize,
    pub normalizer: Normalizer,
    pub params: ParamSet,
    pub encoder: Encoder,
    pub decoder: Mlp,
    pub disc_params: ParamSet,
    pub discriminator: Option<Mlp>,
    pub history: Vec<EpochLoss>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: TrainConfig,
    n_points: usize,
    dim: usize,
    normalizer: Normalizer,
    encoder: Encoder,
    decoder: Mlp,
    discriminator: Option<Mlp>,
    history: Vec<EpochLoss>,
    steps: (u64, u64),
}

impl DgmModel {
    pub fn init(n_points: usize, dim: usize, normalizer: Normalizer, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let input = n_points * dim;
        let mut rng = rng::seeded(config.seed, rng::stream::TRAIN_INIT);
        let mut params = ParamSet::new();
        let stochastic = config.kind == DgmKind::Vae;
        let encoder = Encoder::new(&mut params, input, &config.hidden, config.latent_size, stochastic, &mut rng)?;
        let dec = decoder(&mut params, config.latent_size, &config.hidden, input, &mut rng)?;
        let mut disc_params = ParamSet::new();
        let disc = match config.kind {
            DgmKind::Aae => Some(discriminator(&mut disc_params, config.latent_size, &config.disc_hidden, &mut rng)?),
            DgmKind::Vae => None,
        };
        Ok(Self {
            config: config.clone(),
            n_points,
            dim,
            normalizer,
            params,
            encoder,
            decoder: dec,
            disc_params,
            discriminator: disc,
            history: Vec::new(),
        })
    }

    pub fn input_size(&self) -> usize {
        self.n_points * self.dim
    }

    pub fn is_trained(&self) -> bool {
        !self.history.is_empty()
    }

    /// Normalised, flattened rows for groups `idx`.
    pub fn batch(&self, ds: &GroupDataset, idx: &[usize]) -> Result<Tensor> {
        let width = self.input_size();
        let mut data = Vec::with_capacity(idx.len() * width);
        for &m in idx {
            let g = ds.group(m);
            if g.n_points() != self.n_points || g.dim() != self.dim {
                return Err(GadError::ShapeMismatch(format!(
                    "group {m} is {}x{}, model expects {}x{}",
                    g.n_points(),
                    g.dim(),
                    self.n_points,
                    self.dim
                )));
            }
            let mut flat = flatten_group(g);
            self.normalizer.forward(&mut flat);
            data.extend(flat);
        }
        Tensor::new(idx.len(), width, data)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.to_container()?.save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_container(&TensorContainer::load(path)?)
    }

    pub fn to_container(&self) -> Result<TensorContainer> {
        let ck = Checkpoint {
            config: self.config.clone(),
            n_points: self.n_points,
            dim: self.dim,
            normalizer: self.normalizer.clone(),
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
            discriminator: self.discriminator.clone(),
            history: self.history.clone(),
            steps: (self.params.step(), self.disc_params.step()),
        };
        let json = serde_json::to_string(&ck).map_err(|e| GadError::Serde(e.to_string()))?;
        let mut c = TensorContainer::new(json);
        for (name, t) in self.params.named() {
            c.push(format!("ae/{name}"), t.clone());
        }
        for (name, t) in self.disc_params.named() {
            c.push(format!("disc/{name}"), t.clone());
        }
        Ok(c)
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(&c.metadata).map_err(|e| GadError::Serde(e.to_string()))?;
        let mut model = Self::init(ck.n_points, ck.dim, ck.normalizer, &ck.config)?;
        if model.encoder != ck.encoder || model.decoder != ck.decoder || model.discriminator != ck.discriminator {
            return Err(GadError::Serde("checkpoint architecture does not match its config".into()));
        }
        model.params.load_named(|n| c.get(&format!("ae/{n}")))?;
        model.disc_params.load_named(|n| c.get(&format!("disc/{n}")))?;
        model.history = ck.history;
        Ok(model)
    }

    /// Writes `epoch,recon,kl_or_adv,total`.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,recon,kl_or_adv,total")?;
        for e in &self.history {
            writeln!(w, "{},{},{},{}", e.epoch, e.recon, e.kl_or_adv, e.total)?;
        }
        Ok(())
    }
}

fn normal_tensor(rows: usize, cols: usize, rng: &mut GadRng, bm: &mut BoxMuller) -> Tensor {
    let mut data = vec![0.0; rows * cols];
    bm.fill(rng, &mut data);
    Tensor::new(rows, cols, data).expect("sized buffer")
}

/// Terms of one minibatch objective, recorded on a graph.
pub struct Objective {
    pub graph: Graph,
    pub loss: Var,
    pub recon: f64,
    pub regularizer: f64,
}

/// Sum of squared errors averaged over the rows.
fn batch_recon(g: &mut Graph, x: Var, x_hat: Var, rows: usize) -> Result<Var> {
    let d = g.sub(x_hat, x)?;
    let sq = g.square(d);
    let s = g.sum(sq);
    Ok(g.scale(s, 1.0 / rows as f64))
}

/// VAE minibatch loss `mean_m [‖x − x̂‖² + w·KL]` with fixed reparameterisation noise.
pub fn vae_objective(model: &DgmModel, params: &ParamSet, x: &Tensor, noise: &Tensor) -> Result<Objective> {
    let rows = x.rows();
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let (mu, ls) = model.encoder.forward(&mut g, params, xv)?;
    let ls = ls.ok_or(GadError::UntrainedModel)?;
    let z = g.reparam_sample(mu, ls, noise.clone())?;
    let x_hat = model.decoder.forward(&mut g, params, z)?;
    let recon = batch_recon(&mut g, xv, x_hat, rows)?;

    // ½ Σ (e^{2ls} + μ² − 1 − 2ls)
    let ls2 = g.scale(ls, 2.0);
    let var = g.exp(ls2);
    let mu2 = g.square(mu);
    let a = g.add(var, mu2)?;
    let b = g.sub(a, ls2)?;
    let c = g.add_scalar(b, -1.0);
    let s = g.sum(c);
    let kl = g.scale(s, 0.5 / rows as f64);
    let weighted = g.scale(kl, model.config.kl_weight);
    let loss = g.add(recon, weighted)?;
    let (r, k) = (g.value(recon).item(), g.value(kl).item());
    Ok(Objective { graph: g, loss, recon: r, regularizer: k })
}

/// Discriminator loss `L_D` on codes `z` from the encoder and prior draws `prior`.
pub fn discriminator_objective(model: &DgmModel, disc_params: &ParamSet, z: &Tensor, prior: &Tensor) -> Result<Objective> {
    let disc = model.discriminator.as_ref().ok_or(GadError::UntrainedModel)?;
    let rows = z.rows();
    let mut g = Graph::new();
    let zr = g.constant(prior.clone());
    let zf = g.constant(z.clone());
    let real_logit = disc.forward(&mut g, disc_params, zr)?;
    let fake_logit = disc.forward(&mut g, disc_params, zf)?;
    let log_real = g.log_sigmoid(real_logit);
    let neg_fake = g.scale(fake_logit, -1.0);
    // log(1 − σ(a)) = log σ(−a)
    let log_not_fake = g.log_sigmoid(neg_fake);
    let a = g.sum(log_real);
    let b = g.sum(log_not_fake);
    let s = g.add(a, b)?;
    let loss = g.scale(s, -1.0 / rows as f64);
    let v = g.value(loss).item();
    Ok(Objective { graph: g, loss, recon: 0.0, regularizer: v })
}

/// AAE autoencoder loss: reconstruction plus the weighted generator term,
/// differentiated with respect to the autoencoder parameters only.
///
/// `regularizer` reports `L_G = mean log D(z)`.
pub fn generator_objective(model: &DgmModel, params: &ParamSet, disc_params: &ParamSet, x: &Tensor) -> Result<Objective> {
    let disc = model.discriminator.as_ref().ok_or(GadError::UntrainedModel)?;
    let rows = x.rows();
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let (z, _) = model.encoder.forward(&mut g, params, xv)?;
    let x_hat = model.decoder.forward(&mut g, params, z)?;
    let recon = batch_recon(&mut g, xv, x_hat, rows)?;
    let logit = disc.forward_frozen(&mut g, disc_params, z)?;
    let log_d = g.log_sigmoid(logit);
    let s = g.sum(log_d);
    let l_g = g.scale(s, 1.0 / rows as f64);
    let sign = if model.config.literal_generator_loss { 1.0 } else { -1.0 };
    let adv = g.scale(l_g, sign * model.config.adv_weight);
    let loss = g.add(recon, adv)?;
    let (r, lg) = (g.value(recon).item(), g.value(l_g).item());
    Ok(Objective { graph: g, loss, recon: r, regularizer: lg })
}

fn check_finite(values: &[f64], epoch: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GadError::NonConvergent { epoch })
    }
}

/// Trains a fresh model on `ds` (labels are ignored).
pub fn train(ds: &GroupDataset, cfg: &TrainConfig) -> Result<DgmModel> {
    cfg.validate()?;
    ds.validate()?;
    let n_points = ds.common_group_size()?;
    let mut model = DgmModel::init(n_points, ds.dim(), Normalizer::fit(ds), cfg)?;
    let adam = AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut batch_rng = rng::seeded(cfg.seed, rng::stream::TRAIN_BATCHES);
    let mut noise_rng = rng::seeded(cfg.seed, rng::stream::TRAIN_NOISE);
    let mut bm = BoxMuller::new();
    let k = cfg.latent_size;
    let mut order: Vec<usize> = (0..ds.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut batch_rng);
        let (mut recon_sum, mut reg_sum, mut total_sum, mut disc_sum) = (0.0, 0.0, 0.0, 0.0);
        for idx in order.chunks(cfg.batch_size) {
            let x = model.batch(ds, idx)?;
            let rows = idx.len() as f64;
            match cfg.kind {
                DgmKind::Vae => {
                    let noise = normal_tensor(idx.len(), k, &mut noise_rng, &mut bm);
                    let mut obj = vae_objective(&model, &model.params, &x, &noise)?;
                    let total = obj.graph.value(obj.loss).item();
                    let grads = obj.graph.backward(obj.loss)?;
                    let aligned = model.params.align(&grads);
                    adam_step(&mut model.params, &aligned, &adam)?;
                    recon_sum += obj.recon * rows;
                    reg_sum += obj.regularizer * rows;
                    total_sum += total * rows;
                }
                DgmKind::Aae => {
                    let (z, _) = model.encoder.eval(&model.params, &x)?;
                    let prior = normal_tensor(idx.len(), k, &mut noise_rng, &mut bm);
                    let mut d_obj = discriminator_objective(&model, &model.disc_params, &z, &prior)?;
                    let d_grads = d_obj.graph.backward(d_obj.loss)?;
                    let aligned = model.disc_params.align(&d_grads);
                    adam_step(&mut model.disc_params, &aligned, &adam)?;
                    disc_sum += d_obj.regularizer * rows;

                    let mut g_obj = generator_objective(&model, &model.params, &model.disc_params, &x)?;
                    let total = g_obj.graph.value(g_obj.loss).item();
                    let grads = g_obj.graph.backward(g_obj.loss)?;
                    let aligned = model.params.align(&grads);
                    adam_step(&mut model.params, &aligned, &adam)?;
                    recon_sum += g_obj.recon * rows;
                    reg_sum += g_obj.regularizer * rows;
                    total_sum += total * rows;
                }
            }
        }
        let m = ds.len() as f64;
        let entry = EpochLoss {
            epoch,
            recon: recon_sum / m,
            kl_or_adv: reg_sum / m,
            total: total_sum / m,
            discriminator: (cfg.kind == DgmKind::Aae).then_some(disc_sum / m),
        };
        check_finite(&[entry.recon, entry.kl_or_adv, entry.total, entry.discriminator.unwrap_or(0.0)], epoch)?;
        log::debug!(
            "epoch {epoch}: recon {:.6} reg {:.6} total {:.6}",
            entry.recon,
            entry.kl_or_adv,
            entry.total
        );
        model.history.push(entry);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Group;
    use crate::dgm::reference::{group_reference, score};
    use crate::synthetic::{generate, SyntheticConfig};

    fn tiny_cfg(kind: DgmKind) -> TrainConfig {
        TrainConfig {
            kind,
            latent_size: 3,
            hidden: vec![5, 4],
            disc_hidden: vec![4],
            epochs: 3,
            batch_size: 4,
            ..Default::default()
        }
    }

    fn tiny_ds(seed: u64) -> GroupDataset {
        generate(&SyntheticConfig {
            n_regular: 9,
            n_anomalous: 1,
            points_per_group: 3,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    /// Largest relative gap between analytic and central-difference gradients.
    fn fd_gap(params: &ParamSet, analytic: &[Tensor], f: impl Fn(&ParamSet) -> f64) -> f64 {
        let h = 1e-5;
        let mut worst = 0.0f64;
        for (pi, grad) in analytic.iter().enumerate() {
            for e in 0..grad.len() {
                let mut plus = params.clone();
                plus.values_mut()[pi].data_mut()[e] += h;
                let mut minus = params.clone();
                minus.values_mut()[pi].data_mut()[e] -= h;
                let num = (f(&plus) - f(&minus)) / (2.0 * h);
                let a = grad.data()[e];
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn vae_gradients_match_finite_differences() {
        let ds = tiny_ds(1);
        let model = DgmModel::init(3, 2, Normalizer::fit(&ds), &tiny_cfg(DgmKind::Vae)).unwrap();
        let x = model.batch(&ds, &[0, 1, 2, 3]).unwrap();
        let noise = normal_tensor(4, 3, &mut rng::seeded(1, 0), &mut BoxMuller::new());
        let mut obj = vae_objective(&model, &model.params, &x, &noise).unwrap();
        let grads = model.params.align(&obj.graph.backward(obj.loss).unwrap());
        let gap = fd_gap(&model.params, &grads, |p| {
            let o = vae_objective(&model, p, &x, &noise).unwrap();
            o.graph.value(o.loss).item()
        });
        assert!(gap < 1e-4, "{gap}");
    }

    #[test]
    fn aae_gradients_match_finite_differences() {
        let ds = tiny_ds(2);
        let model = DgmModel::init(3, 2, Normalizer::fit(&ds), &tiny_cfg(DgmKind::Aae)).unwrap();
        let x = model.batch(&ds, &[4, 5, 6]).unwrap();
        let (z, _) = model.encoder.eval(&model.params, &x).unwrap();
        let prior = normal_tensor(3, 3, &mut rng::seeded(2, 0), &mut BoxMuller::new());

        let mut d = discriminator_objective(&model, &model.disc_params, &z, &prior).unwrap();
        let dg = model.disc_params.align(&d.graph.backward(d.loss).unwrap());
        let gap = fd_gap(&model.disc_params, &dg, |p| {
            let o = discriminator_objective(&model, p, &z, &prior).unwrap();
            o.graph.value(o.loss).item()
        });
        assert!(gap < 1e-4, "discriminator {gap}");

        let mut g = generator_objective(&model, &model.params, &model.disc_params, &x).unwrap();
        let gg = model.params.align(&g.graph.backward(g.loss).unwrap());
        let gap = fd_gap(&model.params, &gg, |p| {
            let o = generator_objective(&model, p, &model.disc_params, &x).unwrap();
            o.graph.value(o.loss).item()
        });
        assert!(gap < 1e-4, "generator {gap}");
    }

    #[test]
    fn generator_step_raises_discriminator_output() {
        let ds = tiny_ds(3);
        let mut cfg = tiny_cfg(DgmKind::Aae);
        cfg.adv_weight = 1.0;
        let mut model = DgmModel::init(3, 2, Normalizer::fit(&ds), &cfg).unwrap();
        let x = model.batch(&ds, &[0, 1, 2, 3, 4]).unwrap();
        let disc = model.discriminator.clone().unwrap();
        let mean_d = |m: &DgmModel| {
            let (z, _) = m.encoder.eval(&m.params, &x).unwrap();
            let logits = disc.eval(&m.disc_params, &z).unwrap();
            logits.data().iter().map(|&a| crate::numerics::ops::sigmoid_scalar(a)).sum::<f64>()
        };
        let before = mean_d(&model);
        // adversarial term only
        model.config.adv_weight = 1e3;
        for _ in 0..20 {
            let mut o = generator_objective(&model, &model.params, &model.disc_params, &x).unwrap();
            let grads = model.params.align(&o.graph.backward(o.loss).unwrap());
            adam_step(&mut model.params, &grads, &AdamConfig { lr: 1e-2, ..Default::default() }).unwrap();
        }
        assert!(mean_d(&model) > before);
    }

    #[test]
    fn overfits_identical_groups() {
        let base = tiny_ds(4).group(0).clone();
        let ds = GroupDataset::new(vec![base; 8], None).unwrap();
        let cfg = TrainConfig {
            latent_size: 2,
            hidden: vec![8],
            epochs: 400,
            batch_size: 8,
            learning_rate: 1e-2,
            kl_weight: 1e-3,
            ..Default::default()
        };
        let model = train(&ds, &cfg).unwrap();
        let first = model.history.first().unwrap().recon;
        let last = model.history.last().unwrap().recon;
        assert!(last < 0.01 * first, "{first} -> {last}");
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_ds(5);
        for kind in [DgmKind::Vae, DgmKind::Aae] {
            let a = train(&ds, &tiny_cfg(kind)).unwrap();
            let b = train(&ds, &tiny_cfg(kind)).unwrap();
            assert_eq!(a.params.values(), b.params.values());
            assert_eq!(a.history, b.history);
            assert_eq!(a.history.len(), 3);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = tiny_ds(6);
        let cfg = TrainConfig { epochs: 0, ..tiny_cfg(DgmKind::Vae) };
        assert!(matches!(train(&ds, &cfg), Err(GadError::InvalidConfig(_))));
        let mut groups = ds.groups().to_vec();
        groups[0] = Group::zeros(4, 2);
        let uneven = GroupDataset::new(groups, None).unwrap();
        assert!(matches!(
            train(&uneven, &tiny_cfg(DgmKind::Vae)),
            Err(GadError::UnequalGroupSizes { .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = tiny_ds(7);
        for kind in [DgmKind::Vae, DgmKind::Aae] {
            let model = train(&ds, &tiny_cfg(kind)).unwrap();
            let back = DgmModel::from_container(&model.to_container().unwrap()).unwrap();
            assert_eq!(back.params.values(), model.params.values());
            assert_eq!(back.disc_params.values(), model.disc_params.values());
            let r1 = group_reference(&model, &ds, 1).unwrap();
            let r2 = group_reference(&back, &ds, 1).unwrap();
            assert_eq!(score(&r1, &ds).unwrap(), score(&r2, &ds).unwrap());
        }
    }

    #[test]
    fn normalizer_round_trips() {
        let ds = tiny_ds(8);
        let n = Normalizer::fit(&ds);
        let mut flat = crate::dataset::flatten_group(ds.group(2));
        let orig = flat.clone();
        n.forward(&mut flat);
        assert!(flat.iter().all(|&v| (0.0..=1.0).contains(&v)));
        n.inverse(&mut flat);
        for (a, b) in flat.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn history_csv_has_header_and_rows() {
        let model = train(&tiny_ds(9), &tiny_cfg(DgmKind::Vae)).unwrap();
        let mut buf = Vec::new();
        model.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epoch,recon,kl_or_adv,total");
        assert_eq!(text.lines().count(), 4);
    }
}
