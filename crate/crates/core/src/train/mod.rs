//! Optimizer, training loop and evaluation.

mod adam;
mod config;
mod eval;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState, Moments};
pub use config::TrainConfig;
pub use eval::{evaluate, score_predictions};
pub use trainer::{render_trace, train, Progress, TrainOutcome};
