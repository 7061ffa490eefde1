//! Differentiable substrate and the two recurrent models built on it.
//!
//! Everything runs in `f64` on the CPU through a small tape ([`graph`]).
//! Models are immutable once trained; training owns a private parameter
//! store and is single-threaded, so a fixed seed reproduces bit-identical
//! parameters.

mod classifier;
pub mod gradcheck;
pub mod graph;
pub mod layers;
mod model_io;
pub mod ops;
pub mod optim;
mod params;
mod vae;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use classifier::{train_classifier, ClassifierDims, ClassifierModel, ClassifierReport};
pub use model_io::{read_model_file, write_model_file, ModelHeader, ModelKind, MODEL_FORMAT_VERSION};
pub use params::ParamStore;
pub use vae::{loss_graph, reparameterize, train_vae, LossNodes, LossWeights, VaeDims, VaeLoss, VaeModel, VaeReport};

/// Optimisation settings shared by both models. The loss weights only
/// apply to the VAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub clip_norm: f64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            clip_norm: 5.0,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument("learning_rate must be positive".into()));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Argument("clip_norm must be positive".into()));
        }
        self.weights.validate()
    }
}

/// Initialisation and data-order streams derived from one seed.
pub(crate) fn rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let init = ChaCha8Rng::seed_from_u64(seed);
    let mut train = ChaCha8Rng::seed_from_u64(seed);
    train.set_stream(1);
    (init, train)
}
