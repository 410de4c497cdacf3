//! Deep generative group models: VAE and AAE over flattened groups.

pub mod losses;
pub mod model;
pub mod reference;
pub mod train;

pub use losses::{aae_losses, kl_term, recon_loss, vae_loss, EncoderOutput};
pub use reference::{group_reference, group_references, score, score_many, GroupReference};
pub use train::{train, DgmKind, DgmModel, EpochLoss, Normalizer, TrainConfig};
