use super::{global_scale_attention, global_scale_attention_params, lsa_forward, lsa_params, mlp_block, mlp_params};
use super::{Graph, LsaConfig, ParamSpec, Stages};
use crate::tensor::Float;
use crate::Result;

pub fn sa2_params(cfg: &LsaConfig) -> Vec<ParamSpec> {
    let c = cfg.channels();
    let mut specs = Vec::new();
    for i in 1..=4 {
        specs.extend(lsa_params(&format!("sa2.lsa{i}"), cfg));
    }
    specs.extend(global_scale_attention_params("sa2.gsa", c));
    for i in 1..=4 {
        specs.extend(mlp_params(&format!("sa2.mlp{i}"), c));
        specs.extend(ParamSpec::conv(&format!("sa2.out{i}"), c, c, 1));
    }
    specs
}

/// Scale-aware attention: per-stage local attention, cross-scale weighting,
/// a residual from the stage input, then the MLP block and a 1×1 projection.
pub fn sa2_forward<T: Float>(g: &mut Graph<'_, T>, features: &Stages, cfg: &LsaConfig) -> Result<Stages> {
    let mut attended = *features;
    for (i, slot) in attended.iter_mut().enumerate() {
        *slot = lsa_forward(g, &format!("sa2.lsa{}", i + 1), features[i], cfg)?;
    }
    let scaled = global_scale_attention(g, "sa2.gsa", &attended)?;
    let mut out = *features;
    for (i, slot) in out.iter_mut().enumerate() {
        let residual = g.tape.add(features[i], scaled[i])?;
        let refined = mlp_block(g, &format!("sa2.mlp{}", i + 1), residual)?;
        *slot = g.conv(&format!("sa2.out{}", i + 1), refined, 1, 0)?;
    }
    Ok(out)
}
