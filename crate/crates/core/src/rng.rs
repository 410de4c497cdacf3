//! Seeded random streams.
//!
//! Every stochastic stage draws from its own ChaCha stream derived from the
//! run seed, so adding draws to one stage never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type GadRng = ChaCha8Rng;

/// Stream identifiers, one per consumer.
pub mod stream {
    pub const SYNTHETIC: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const TRAIN_INIT: u64 = 3;
    pub const TRAIN_BATCHES: u64 = 4;
    pub const TRAIN_NOISE: u64 = 5;
    pub const REFERENCE: u64 = 6;
    pub const MGM: u64 = 7;
    pub const KMEANS: u64 = 8;
    pub const BANDWIDTH: u64 = 9;
    pub const EMBEDDING: u64 = 10;
}

pub fn seeded(seed: u64, stream: u64) -> GadRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draws by the Box–Muller transform.
#[derive(Debug, Clone, Default)]
pub struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.sample(rng);
        }
    }
}
