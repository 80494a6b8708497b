use super::ModelConfig;
use crate::blocks::{aua_forward, aua_params, init_params, sa2_forward, sa2_params, Graph, ParamSpec, ParamStore, Stages, STAGES};
use crate::tensor::kernels::pointwise::sigmoid;
use crate::tensor::{Float, Tensor, Var};
use crate::{Error, Result};

/// Deep-supervision logits `S^1..S^4`, each `N×1×H×W` at input resolution.
/// `S^1` (index 0) is the inference output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOutput {
    pub logits: [Var; STAGES],
}

pub fn encoder_params(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    let mut cin = cfg.in_channels;
    for (i, &w) in cfg.encoder_widths.iter().enumerate() {
        let s = i + 1;
        specs.extend(ParamSpec::conv(&format!("enc{s}.down"), w, cin, 3));
        specs.extend(ParamSpec::layernorm(&format!("enc{s}.ln1"), w));
        specs.extend(ParamSpec::conv(&format!("enc{s}.conv"), w, w, 3));
        specs.extend(ParamSpec::layernorm(&format!("enc{s}.ln2"), w));
        specs.extend(ParamSpec::conv(&format!("enc{s}.proj"), cfg.channels, w, 1));
        cin = w;
    }
    specs
}

/// Every parameter of the network, in a fixed declaration order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let c = cfg.channels;
    let mut specs = encoder_params(cfg);
    if cfg.sa2 {
        specs.extend(sa2_params(&cfg.lsa));
    }
    for s in (1..=STAGES).rev() {
        specs.extend(aua_params(&format!("dec{s}"), c, s == STAGES));
    }
    for s in 1..=STAGES {
        specs.extend(ParamSpec::conv(&format!("head{s}"), 1, c, 1));
    }
    specs
}

/// Closed-form parameter count; see the README for the derivation.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let c = cfg.channels;
    let mut total = 0;
    let mut cin = cfg.in_channels;
    for &w in &cfg.encoder_widths {
        total += 9 * w * cin + w + 2 * w + 9 * w * w + w + 2 * w + c * w + c;
        cin = w;
    }
    if cfg.sa2 {
        let gw = cfg.lsa.group_width();
        let lsa: usize = cfg.lsa.kernel_sizes().iter().map(|k| 2 * (gw * k * k + gw)).sum::<usize>() + c * c + c;
        let gsa = 4 * 4 * c + 4 + c * 4 * c + c;
        let mlp = 2 * c + 9 * c + c + 2 * (c * c + c);
        let out = c * c + c;
        total += 4 * (lsa + mlp + out) + gsa;
    }
    let deepest = 9 * c * c + c + 2 * c;
    let step = c * c + c + 9 * 2 * c * c + c + 2 * c;
    total += deepest + 3 * step;
    total + 4 * (c + 1)
}

/// Fresh parameters for `cfg`, drawn from `cfg.seed`.
pub fn init_model<T: Float>(cfg: &ModelConfig) -> Result<ParamStore<T>> {
    cfg.validate()?;
    init_params(&param_specs(cfg), cfg.seed)
}

/// Four stages at 1/2 … 1/16 resolution, each
/// `[3×3/2 conv → LN → GeLU → 3×3 conv → LN → GeLU]` followed by a 1×1
/// projection to the shared width.
pub fn encoder_forward<T: Float>(g: &mut Graph<'_, T>, cfg: &ModelConfig, image: Var) -> Result<Stages> {
    let (_, c, h, w) = g.value(image).shape().nchw("encoder")?;
    if h % 16 != 0 || w % 16 != 0 {
        return Err(Error::Config(format!("input {h}×{w} is not divisible by 16")));
    }
    if c != cfg.in_channels || (h, w) != cfg.input_size {
        return Err(Error::dim(
            "encoder",
            format!("image has {c} channels at {h}×{w}, model expects {} at {:?}", cfg.in_channels, cfg.input_size),
        ));
    }
    let mut x = image;
    let mut stages = [image; STAGES];
    for (i, slot) in stages.iter_mut().enumerate() {
        let s = i + 1;
        x = g.conv(&format!("enc{s}.down"), x, 2, 1)?;
        x = g.layernorm(&format!("enc{s}.ln1"), x)?;
        x = g.tape.gelu(x)?;
        x = g.conv(&format!("enc{s}.conv"), x, 1, 1)?;
        x = g.layernorm(&format!("enc{s}.ln2"), x)?;
        x = g.tape.gelu(x)?;
        *slot = g.conv(&format!("enc{s}.proj"), x, 1, 0)?;
    }
    Ok(stages)
}

/// Full network: encoder, scale-aware attention, the up-attention decoder
/// chain from the deepest stage upward, and one 1×1 logit head per decoder
/// output resized to input resolution.
pub fn model_forward<T: Float>(g: &mut Graph<'_, T>, cfg: &ModelConfig, image: Var) -> Result<ModelOutput> {
    let features = encoder_forward(g, cfg, image)?;
    let attended = if cfg.sa2 { sa2_forward(g, &features, &cfg.lsa)? } else { features };
    let mut decoded = attended;
    let mut deeper = None;
    for i in (0..STAGES).rev() {
        let p = aua_forward(g, &format!("dec{}", i + 1), attended[i], deeper)?;
        decoded[i] = p;
        deeper = Some(p);
    }
    let (h, w) = cfg.input_size;
    let mut logits = decoded;
    for (i, slot) in logits.iter_mut().enumerate() {
        let s = g.conv(&format!("head{}", i + 1), decoded[i], 1, 0)?;
        *slot = g.tape.bilinear_resize(s, h, w)?;
    }
    Ok(ModelOutput { logits })
}

/// Foreground probabilities `σ(S^1)` for a batch, `N×1×H×W`.
pub fn predict_probs<T: Float>(params: &ParamStore<T>, cfg: &ModelConfig, images: &Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Graph::inference(params);
    let x = g.input(images.clone());
    let out = model_forward(&mut g, cfg, x)?;
    Ok(g.value(out.logits[0]).map(sigmoid))
}
