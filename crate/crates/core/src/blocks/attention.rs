use super::{Graph, ParamSpec, Stages, STAGES};
use crate::tensor::Float;
use crate::{Error, Result};

pub fn global_scale_attention_params(prefix: &str, channels: usize) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    specs.extend(ParamSpec::conv(&format!("{prefix}.scale"), STAGES, STAGES * channels, 1));
    specs.extend(ParamSpec::conv(&format!("{prefix}.global"), channels, STAGES * channels, 1));
    specs
}

/// Cross-scale attention over the locally attended stage features.
///
/// All stages are resized to stage-1 resolution and concatenated into `Q`.
/// One 1×1 convolution of `Q` yields the four single-channel scale weights
/// `w_i`, a second one (through GeLU) the global map `Ŵ`. Both are resized
/// back to each stage and applied as `F̄_i = w_i ⊙ (F̂_i ⊙ Ŵ_i)`.
pub fn global_scale_attention<T: Float>(g: &mut Graph<'_, T>, prefix: &str, attended: &Stages) -> Result<Stages> {
    let (n, c, h1, w1) = g.value(attended[0]).shape().nchw("global_scale_attention")?;
    let mut sizes = [(h1, w1); STAGES];
    for (i, &v) in attended.iter().enumerate().skip(1) {
        let (ni, ci, hi, wi) = g.value(v).shape().nchw("global_scale_attention")?;
        let (eh, ew) = (h1 >> i, w1 >> i);
        if (ni, ci) != (n, c) || (hi, wi) != (eh, ew) {
            return Err(Error::dim(
                "global_scale_attention",
                format!("stage {} is {ni}×{ci}×{hi}×{wi}, expected {n}×{c}×{eh}×{ew}", i + 1),
            ));
        }
        sizes[i] = (hi, wi);
    }
    let mut full = Vec::with_capacity(STAGES);
    full.push(attended[0]);
    for &v in &attended[1..] {
        full.push(g.tape.bilinear_resize(v, h1, w1)?);
    }
    let q = g.tape.concat_c(&full)?;
    let scale_maps = g.conv(&format!("{prefix}.scale"), q, 1, 0)?;
    let global = g.conv(&format!("{prefix}.global"), q, 1, 0)?;
    let global = g.tape.gelu(global)?;

    let mut out = attended.to_owned();
    for (i, (&(h, w), slot)) in sizes.iter().zip(out.iter_mut()).enumerate() {
        let wi = g.tape.slice_c(scale_maps, i, 1)?;
        let (wi, gi) = if i == 0 {
            (wi, global)
        } else {
            (g.tape.bilinear_resize(wi, h, w)?, g.tape.bilinear_resize(global, h, w)?)
        };
        let weighted = g.tape.mul(attended[i], gi)?;
        *slot = g.tape.mul(weighted, wi)?;
    }
    Ok(out)
}
