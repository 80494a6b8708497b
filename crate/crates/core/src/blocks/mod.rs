//! Attention blocks of the network, written as forward functions over a
//! [`Graph`]. Each block also declares the parameters it reads.

mod attention;
mod aua;
mod lsa;
mod mlp;
mod params;
mod sa2;

pub use attention::{global_scale_attention, global_scale_attention_params};
pub use aua::{aua_forward, aua_params, conv_block};
pub use lsa::{lsa_forward, lsa_params, LsaConfig};
pub use mlp::{mlp_block, mlp_params};
pub use params::{init_params, Grads, Graph, Init, ParamSpec, ParamStore};
pub use sa2::{sa2_forward, sa2_params};

use crate::tensor::Var;

/// Number of encoder stages (and decoder steps). Fixed by the architecture.
pub const STAGES: usize = 4;

/// Per-stage feature maps, stage 1 at the highest resolution.
pub type Stages = [Var; STAGES];
