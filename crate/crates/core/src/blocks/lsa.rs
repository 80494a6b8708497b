use super::{Graph, ParamSpec};
use crate::tensor::{Float, Var};
use crate::{Error, Result};

/// Largest accepted depthwise kernel size.
pub const MAX_KERNEL: usize = 31;

/// Local scale attention layout: channel groups and one depthwise kernel size per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LsaConfig {
    channels: usize,
    groups: usize,
    kernel_sizes: Vec<usize>,
}

impl Default for LsaConfig {
    fn default() -> Self {
        LsaConfig { channels: 64, groups: 4, kernel_sizes: vec![1, 3, 5, 7] }
    }
}

impl LsaConfig {
    pub fn new(channels: usize, groups: usize, kernel_sizes: Vec<usize>) -> Result<Self> {
        if groups == 0 || channels == 0 || channels % groups != 0 {
            return Err(Error::Config(format!("{channels} channels cannot be split into {groups} equal groups")));
        }
        if kernel_sizes.len() != groups {
            return Err(Error::Config(format!("{} kernel sizes given for {groups} groups", kernel_sizes.len())));
        }
        if let Some(k) = kernel_sizes.iter().find(|&&k| k % 2 == 0 || k > MAX_KERNEL) {
            return Err(Error::Config(format!("LSA kernel size {k} must be odd and at most {MAX_KERNEL}")));
        }
        Ok(LsaConfig { channels, groups, kernel_sizes })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn kernel_sizes(&self) -> &[usize] {
        &self.kernel_sizes
    }

    pub fn group_width(&self) -> usize {
        self.channels / self.groups
    }
}

pub fn lsa_params(prefix: &str, cfg: &LsaConfig) -> Vec<ParamSpec> {
    let gw = cfg.group_width();
    let mut specs = Vec::new();
    for (g, &k) in cfg.kernel_sizes.iter().enumerate() {
        specs.extend(ParamSpec::dwconv(&format!("{prefix}.g{g}.value"), gw, k));
        specs.extend(ParamSpec::dwconv(&format!("{prefix}.g{g}.gate"), gw, k));
    }
    specs.extend(ParamSpec::conv(&format!("{prefix}.fuse"), cfg.channels, cfg.channels, 1));
    specs
}

/// Splits channels into groups; each group is the product of a depthwise
/// path and a sigmoid-gated depthwise path with the group's kernel size.
/// The attended groups are concatenated and fused by a 1×1 convolution.
pub fn lsa_forward<T: Float>(g: &mut Graph<'_, T>, prefix: &str, x: Var, cfg: &LsaConfig) -> Result<Var> {
    let c = g.value(x).shape().nchw("lsa")?.1;
    if c != cfg.channels {
        return Err(Error::dim("lsa", format!("axis 1: expected {} channels, got {c}", cfg.channels)));
    }
    let parts = g.tape.split_c(x, &vec![cfg.group_width(); cfg.groups])?;
    let mut attended = Vec::with_capacity(parts.len());
    for (i, part) in parts.into_iter().enumerate() {
        let value = g.dwconv(&format!("{prefix}.g{i}.value"), part)?;
        let gate = g.dwconv(&format!("{prefix}.g{i}.gate"), part)?;
        let gate = g.tape.sigmoid(gate)?;
        attended.push(g.tape.mul(value, gate)?);
    }
    let cat = g.tape.concat_c(&attended)?;
    g.conv(&format!("{prefix}.fuse"), cat, 1, 0)
}
