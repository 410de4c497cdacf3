//! Dense encoder, decoder and discriminator networks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::numerics::{ops, Graph, ParamSet, Tensor, Var};
use crate::rng::GadRng;

pub const ELU_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Elu,
    Sigmoid,
}

/// Fully connected stack. Layer parameters live in a [`ParamSet`] and are
/// referred to by index, so a cloned set stays usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    /// `(weight, bias)` indices into the owning parameter set.
    layers: Vec<(usize, usize)>,
}

fn glorot(rows: usize, cols: usize, rng: &mut GadRng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(rows, cols, data).expect("sized buffer")
}

fn apply(g: &mut Graph, x: Var, act: Activation) -> Var {
    match act {
        Activation::Identity => x,
        Activation::Elu => g.elu(x, ELU_ALPHA),
        Activation::Sigmoid => g.sigmoid(x),
    }
}

fn apply_value(x: Tensor, act: Activation) -> Tensor {
    match act {
        Activation::Identity => x,
        Activation::Elu => ops::elu(&x, ELU_ALPHA),
        Activation::Sigmoid => ops::sigmoid(&x),
    }
}

impl Mlp {
    /// Adds Glorot-uniform weights and zero biases named `{prefix}.{layer}.w/b`.
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut GadRng,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(GadError::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let wi = params.add(format!("{prefix}.{i}.w"), glorot(w[0], w[1], rng));
                let bi = params.add(format!("{prefix}.{i}.b"), Tensor::zeros(1, w[1]));
                (wi.index(), bi.index())
            })
            .collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            layers,
        })
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn act(&self, i: usize) -> Activation {
        if i + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Records the forward pass on `g`.
    pub fn forward(&self, g: &mut Graph, params: &ParamSet, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let wv = g.param(params, params.id_at(w));
            let bv = g.param(params, params.id_at(b));
            h = g.dense(h, wv, bv)?;
            h = apply(g, h, self.act(i));
        }
        Ok(h)
    }

    /// Forward pass with the weights entered as constants, so gradients flow
    /// to the input but not to this network.
    pub fn forward_frozen(&self, g: &mut Graph, params: &ParamSet, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let wv = g.constant(params.get(params.id_at(w)).clone());
            let bv = g.constant(params.get(params.id_at(b)).clone());
            h = g.dense(h, wv, bv)?;
            h = apply(g, h, self.act(i));
        }
        Ok(h)
    }

    /// Forward pass on plain values.
    pub fn eval(&self, params: &ParamSet, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = ops::dense(&h, params.get(params.id_at(w)), params.get(params.id_at(b)))?;
            h = apply_value(h, self.act(i));
        }
        Ok(h)
    }
}

/// Encoder trunk with a mean head and, for the VAE, a log-σ head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub trunk: Mlp,
    pub mu: Mlp,
    pub log_sigma: Option<Mlp>,
}

impl Encoder {
    pub fn new(params: &mut ParamSet, input: usize, hidden: &[usize], latent: usize, stochastic: bool, rng: &mut GadRng) -> Result<Self> {
        if hidden.is_empty() {
            return Err(GadError::InvalidConfig("encoder needs a hidden layer".into()));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        let trunk = Mlp::new(params, "enc", &sizes, Activation::Elu, Activation::Elu, rng)?;
        let top = *hidden.last().unwrap();
        let mu = Mlp::new(params, "enc.mu", &[top, latent], Activation::Identity, Activation::Identity, rng)?;
        let log_sigma = if stochastic {
            Some(Mlp::new(params, "enc.log_sigma", &[top, latent], Activation::Identity, Activation::Identity, rng)?)
        } else {
            None
        };
        Ok(Self { trunk, mu, log_sigma })
    }

    pub fn latent_size(&self) -> usize {
        self.mu.output_size()
    }

    /// Returns `(mu, log_sigma)`; `log_sigma` is absent for a deterministic encoder.
    pub fn forward(&self, g: &mut Graph, params: &ParamSet, x: Var) -> Result<(Var, Option<Var>)> {
        let h = self.trunk.forward(g, params, x)?;
        let mu = self.mu.forward(g, params, h)?;
        let ls = match &self.log_sigma {
            Some(head) => Some(head.forward(g, params, h)?),
            None => None,
        };
        Ok((mu, ls))
    }

    pub fn eval(&self, params: &ParamSet, x: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        let h = self.trunk.eval(params, x)?;
        let mu = self.mu.eval(params, &h)?;
        let ls = match &self.log_sigma {
            Some(head) => Some(head.eval(params, &h)?),
            None => None,
        };
        Ok((mu, ls))
    }
}

/// Decoder mirroring the encoder trunk, with sigmoid output.
pub fn decoder(params: &mut ParamSet, latent: usize, hidden: &[usize], output: usize, rng: &mut GadRng) -> Result<Mlp> {
    let mut sizes = vec![latent];
    sizes.extend(hidden.iter().rev());
    sizes.push(output);
    Mlp::new(params, "dec", &sizes, Activation::Elu, Activation::Sigmoid, rng)
}

/// Discriminator producing one logit per row; `D(z) = sigmoid(logit)`.
pub fn discriminator(params: &mut ParamSet, latent: usize, hidden: &[usize], rng: &mut GadRng) -> Result<Mlp> {
    let mut sizes = vec![latent];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    Mlp::new(params, "disc", &sizes, Activation::Elu, Activation::Identity, rng)
}
