use super::{Graph, ParamSpec};
use crate::tensor::{Float, Var};
use crate::{Error, Result};

pub fn aua_params(prefix: &str, channels: usize, deepest: bool) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    if deepest {
        specs.extend(ParamSpec::conv(&format!("{prefix}.block.conv"), channels, channels, 3));
    } else {
        specs.extend(ParamSpec::conv(&format!("{prefix}.gate"), channels, channels, 1));
        specs.extend(ParamSpec::conv(&format!("{prefix}.block.conv"), channels, 2 * channels, 3));
    }
    specs.extend(ParamSpec::layernorm(&format!("{prefix}.block.ln"), channels));
    specs
}

/// 3×3 convolution → channel LayerNorm → GeLU.
pub fn conv_block<T: Float>(g: &mut Graph<'_, T>, prefix: &str, x: Var) -> Result<Var> {
    let y = g.conv(&format!("{prefix}.conv"), x, 1, 1)?;
    let y = g.layernorm(&format!("{prefix}.ln"), y)?;
    g.tape.gelu(y)
}

/// Adaptive up-attention decoder step.
///
/// Without a deeper stage the output is `block(O)`. Otherwise the deeper
/// decoded map is upsampled ×2 to `U`, gates the current features through
/// `G = σ(conv1×1(U))`, and `block(concat(G ⊙ O, U))` is returned.
pub fn aua_forward<T: Float>(g: &mut Graph<'_, T>, prefix: &str, current: Var, deeper: Option<Var>) -> Result<Var> {
    let block = format!("{prefix}.block");
    let Some(deeper) = deeper else {
        return conv_block(g, &block, current);
    };
    let (n, c, h, w) = g.value(current).shape().nchw("aua")?;
    let (dn, dc, dh, dw) = g.value(deeper).shape().nchw("aua")?;
    if (dn, dc) != (n, c) || dh * 2 != h || dw * 2 != w {
        return Err(Error::dim(
            "aua",
            format!("deeper stage {dn}×{dc}×{dh}×{dw} is not half the resolution of {n}×{c}×{h}×{w}"),
        ));
    }
    let up = g.tape.bilinear_resize(deeper, h, w)?;
    let gate = g.conv(&format!("{prefix}.gate"), up, 1, 0)?;
    let gate = g.tape.sigmoid(gate)?;
    let gated = g.tape.mul(gate, current)?;
    let fused = g.tape.concat_c(&[gated, up])?;
    conv_block(g, &block, fused)
}
