//! Network assembly and persistence.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{Checkpoint, ADAM_MAGIC, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{fingerprint_id, ModelConfig};
pub(crate) use config::MODEL_KEYS;
pub use network::{
    encoder_forward, encoder_params, init_model, model_forward, param_count, param_specs, predict_probs, ModelOutput,
};
