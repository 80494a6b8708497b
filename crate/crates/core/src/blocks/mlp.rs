use super::{Graph, ParamSpec};
use crate::tensor::{Float, Var};
use crate::Result;

pub fn mlp_params(prefix: &str, channels: usize) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    specs.extend(ParamSpec::layernorm(&format!("{prefix}.ln"), channels));
    specs.extend(ParamSpec::dwconv(&format!("{prefix}.dw"), channels, 3));
    specs.extend(ParamSpec::conv(&format!("{prefix}.fc1"), channels, channels, 1));
    specs.extend(ParamSpec::conv(&format!("{prefix}.fc2"), channels, channels, 1));
    specs
}

/// `out = fc2(GeLU(fc1(DW(LN(x)) + LN(x)))) + x`, with a single LN evaluation.
pub fn mlp_block<T: Float>(g: &mut Graph<'_, T>, prefix: &str, x: Var) -> Result<Var> {
    let normed = g.layernorm(&format!("{prefix}.ln"), x)?;
    let positional = g.dwconv(&format!("{prefix}.dw"), normed)?;
    let mixed = g.tape.add(positional, normed)?;
    let hidden = g.conv(&format!("{prefix}.fc1"), mixed, 1, 0)?;
    let hidden = g.tape.gelu(hidden)?;
    let branch = g.conv(&format!("{prefix}.fc2"), hidden, 1, 0)?;
    g.tape.add(branch, x)
}
