//! SA2-Net: scale-aware attention segmentation on a small reverse-mode
//! autodiff tensor library.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense N×C×H×W tensors, the recording [`tensor::Tape`] and
//!   the differentiable kernels (convolutions, resize, layer norm, ...).
//! * [`blocks`]: parameter store and the attention blocks (local scale
//!   attention, cross-scale attention, MLP block, up-attention decoder step).
//! * [`model`]: encoder, full network assembly and checkpoint persistence.
//! * [`loss`]: weighted BCE / IoU training losses and Dice / IoU metrics.
//! * [`data`]: synthetic cell images, augmentation, PGM I/O, k-fold splits.
//! * [`train`]: Adam, training and evaluation loops.
//! * [`gradcheck`]: the finite-difference verification suite.

pub mod blocks;
pub mod data;
mod error;
pub mod gradcheck;
pub mod kv;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
