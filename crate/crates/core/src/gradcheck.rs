//! Finite-difference checks of every differentiable op and block in 64-bit.
//!
//! Each case declares named input tensors and a forward function. The
//! scalar under test is `Σ out ⊙ R` for a fixed random `R`, so every output
//! element contributes. Analytic gradients come from one backward pass;
//! numeric ones from central differences on a sample of entries per tensor.

use crate::blocks::{
    aua_forward, aua_params, global_scale_attention, global_scale_attention_params, init_params, lsa_forward,
    lsa_params, mlp_block, mlp_params, sa2_forward, sa2_params, Graph, LsaConfig, ParamSpec, ParamStore, Stages,
};
use crate::loss::total_loss;
use crate::model::{encoder_forward, model_forward, param_specs, ModelConfig};
use crate::tensor::{default_step, Rng, Tensor, Var};
use crate::{Error, Result};

/// Seeds each case is run with.
pub const SEEDS: u64 = 5;
/// Default acceptance threshold.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Threshold for the complete network.
pub const MODEL_TOL: f64 = 2e-3;
/// Entries probed per tensor and seed.
const PROBES: usize = 6;

/// Outcome of one case over all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub module: &'static str,
    pub max_err: f64,
    pub tol: f64,
    pub seeds: u64,
    pub probes: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_err < self.tol
    }
}

/// `|a − n| / max(1, |a|, |n|)`: absolute for small gradients, relative for large ones.
pub fn grad_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

type Forward = fn(&mut Graph<'_, f64>) -> Result<Var>;

struct Case {
    name: &'static str,
    module: &'static str,
    tol: f64,
    inputs: fn() -> Vec<ParamSpec>,
    forward: Forward,
}

fn input(name: &str, dims: &[usize]) -> ParamSpec {
    ParamSpec { name: name.into(), dims: dims.to_vec(), init: crate::blocks::Init::HeNormal { fan_in: 2 } }
}

fn x4(c: usize, h: usize) -> Vec<ParamSpec> {
    vec![input("x", &[2, c, h, h])]
}

const C: usize = 8;

fn lsa_cfg() -> LsaConfig {
    LsaConfig::new(C, 4, vec![1, 3, 5, 7]).expect("valid layout")
}

fn stage_inputs() -> Vec<ParamSpec> {
    (0..4).map(|i| input(&format!("f{}", i + 1), &[1, C, 16 >> i, 16 >> i])).collect()
}

fn stages(g: &mut Graph<'_, f64>) -> Result<Stages> {
    Ok([g.param("f1")?, g.param("f2")?, g.param("f3")?, g.param("f4")?])
}

fn sum_stages(g: &mut Graph<'_, f64>, s: Stages) -> Result<Var> {
    // Resize to a common size so all stages contribute to one output tensor.
    let (_, _, h, w) = g.value(s[0]).shape().nchw("gradcheck")?;
    let mut acc = s[0];
    for &v in &s[1..] {
        let up = g.tape.bilinear_resize(v, h, w)?;
        acc = g.tape.add(acc, up)?;
    }
    Ok(acc)
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        channels: C,
        lsa: lsa_cfg(),
        input_size: (32, 32),
        encoder_widths: [4, 6, 8, 8],
        ..ModelConfig::default()
    }
}

fn with(mut a: Vec<ParamSpec>, b: impl IntoIterator<Item = ParamSpec>) -> Vec<ParamSpec> {
    a.extend(b);
    a
}

fn binary_target(g: &Graph<'_, f64>, v: Var) -> Tensor<f64> {
    // Deterministic pseudo-random mask of the output's shape.
    let t = g.value(v);
    let data = (0..t.numel()).map(|i| f64::from((i * 7 + i / 5) % 3 == 0)).collect();
    Tensor::from_shape(t.shape().clone(), data).expect("same shape")
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "conv2d",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || with(x4(3, 6), ParamSpec::conv("c", 4, 3, 3)),
            forward: |g| {
                let x = g.param("x")?;
                g.conv("c", x, 1, 1)
            },
        },
        Case {
            name: "conv2d_stride2",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || with(x4(3, 6), ParamSpec::conv("c", 4, 3, 3)),
            forward: |g| {
                let x = g.param("x")?;
                g.conv("c", x, 2, 1)
            },
        },
        Case {
            name: "conv2d_1x1",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || with(x4(3, 5), ParamSpec::conv("c", 4, 3, 1)),
            forward: |g| {
                let x = g.param("x")?;
                g.conv("c", x, 1, 0)
            },
        },
        Case {
            name: "dwconv2d",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || with(x4(3, 6), ParamSpec::dwconv("d", 3, 5)),
            forward: |g| {
                let x = g.param("x")?;
                g.dwconv("d", x)
            },
        },
        Case {
            name: "bilinear_up",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || x4(2, 4),
            forward: |g| {
                let x = g.param("x")?;
                g.tape.bilinear_resize(x, 8, 7)
            },
        },
        Case {
            name: "bilinear_down",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || x4(2, 8),
            forward: |g| {
                let x = g.param("x")?;
                g.tape.bilinear_resize(x, 3, 5)
            },
        },
        Case {
            name: "layernorm_c",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || with(x4(5, 3), ParamSpec::layernorm("ln", 5)),
            forward: |g| {
                let x = g.param("x")?;
                g.layernorm("ln", x)
            },
        },
        Case {
            name: "gelu",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || x4(2, 4),
            forward: |g| {
                let x = g.param("x")?;
                g.tape.gelu(x)
            },
        },
        Case {
            name: "sigmoid",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || x4(2, 4),
            forward: |g| {
                let x = g.param("x")?;
                g.tape.sigmoid(x)
            },
        },
        Case {
            name: "avgpool2d",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || x4(2, 7),
            forward: |g| {
                let x = g.param("x")?;
                g.tape.avgpool2d(x, 5, 1, 2)
            },
        },
        Case {
            name: "concat_split",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || vec![input("a", &[2, 2, 3, 3]), input("b", &[2, 3, 3, 3])],
            forward: |g| {
                let (a, b) = (g.param("a")?, g.param("b")?);
                let cat = g.tape.concat_c(&[a, b])?;
                let parts = g.tape.split_c(cat, &[1, 4])?;
                let sq = g.tape.mul(parts[1], parts[1])?;
                let head = g.tape.slice_c(sq, 0, 1)?;
                g.tape.add(parts[0], head)
            },
        },
        Case {
            name: "broadcast_arith",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || vec![input("a", &[2, 3, 4, 4]), input("b", &[2, 1, 4, 4]), input("c", &[1, 3, 1, 1])],
            forward: |g| {
                let (a, b, c) = (g.param("a")?, g.param("b")?, g.param("c")?);
                let p = g.tape.mul(a, b)?;
                let q = g.tape.sub(p, c)?;
                let r = g.tape.add(q, a)?;
                g.tape.scale(r, 0.75)
            },
        },
        Case {
            name: "sum_mean",
            module: "tensor",
            tol: DEFAULT_TOL,
            inputs: || x4(2, 3),
            forward: |g| {
                let x = g.param("x")?;
                let sq = g.tape.mul(x, x)?;
                let s = g.tape.sum(sq)?;
                let m = g.tape.mean(x)?;
                g.tape.mul(s, m)
            },
        },
        Case {
            name: "lsa_forward",
            module: "blocks",
            tol: DEFAULT_TOL,
            inputs: || with(x4(C, 6), lsa_params("lsa", &lsa_cfg())),
            forward: |g| {
                let x = g.param("x")?;
                lsa_forward(g, "lsa", x, &lsa_cfg())
            },
        },
        Case {
            name: "global_scale_attention",
            module: "blocks",
            tol: DEFAULT_TOL,
            inputs: || with(stage_inputs(), global_scale_attention_params("gsa", C)),
            forward: |g| {
                let s = stages(g)?;
                let out = global_scale_attention(g, "gsa", &s)?;
                sum_stages(g, out)
            },
        },
        Case {
            name: "mlp_block",
            module: "blocks",
            tol: DEFAULT_TOL,
            inputs: || with(x4(C, 5), mlp_params("mlp", C)),
            forward: |g| {
                let x = g.param("x")?;
                mlp_block(g, "mlp", x)
            },
        },
        Case {
            name: "aua_forward",
            module: "blocks",
            tol: DEFAULT_TOL,
            inputs: || {
                with(vec![input("cur", &[2, C, 6, 6]), input("deep", &[2, C, 3, 3])], aua_params("aua", C, false))
            },
            forward: |g| {
                let (cur, deep) = (g.param("cur")?, g.param("deep")?);
                aua_forward(g, "aua", cur, Some(deep))
            },
        },
        Case {
            name: "aua_deepest",
            module: "blocks",
            tol: DEFAULT_TOL,
            inputs: || with(x4(C, 4), aua_params("aua", C, true)),
            forward: |g| {
                let x = g.param("x")?;
                aua_forward(g, "aua", x, None)
            },
        },
        Case {
            name: "sa2_forward",
            module: "blocks",
            tol: DEFAULT_TOL,
            inputs: || with(stage_inputs(), sa2_params(&lsa_cfg())),
            forward: |g| {
                let s = stages(g)?;
                let out = sa2_forward(g, &s, &lsa_cfg())?;
                sum_stages(g, out)
            },
        },
        Case {
            name: "weighted_bce",
            module: "loss",
            tol: DEFAULT_TOL,
            inputs: || vec![input("z", &[1, 1, 4, 4]), input("w", &[1, 1, 4, 4])],
            forward: |g| {
                let z = g.param("z")?;
                let y = binary_target(g, z);
                let w = g.params().get("w").expect("declared").map(|v| 1.0 + v.abs());
                g.tape.weighted_bce(z, &y, &w)
            },
        },
        Case {
            name: "weighted_iou",
            module: "loss",
            tol: DEFAULT_TOL,
            inputs: || vec![input("z", &[1, 1, 4, 4]), input("w", &[1, 1, 4, 4])],
            forward: |g| {
                let z = g.param("z")?;
                let y = binary_target(g, z);
                let w = g.params().get("w").expect("declared").map(|v| 1.0 + v.abs());
                g.tape.weighted_iou(z, &y, &w)
            },
        },
        Case {
            name: "total_loss",
            module: "loss",
            tol: DEFAULT_TOL,
            inputs: || (1..=4).map(|i| input(&format!("s{i}"), &[2, 1, 16, 16])).collect(),
            forward: |g| {
                let heads = [g.param("s1")?, g.param("s2")?, g.param("s3")?, g.param("s4")?];
                let y = binary_target(g, heads[0]);
                total_loss(&mut g.tape, &heads, &y)
            },
        },
        Case {
            name: "encoder",
            module: "model",
            tol: DEFAULT_TOL,
            inputs: || with(vec![input("image", &[1, 1, 32, 32])], crate::model::encoder_params(&tiny_model())),
            forward: |g| {
                let x = g.param("image")?;
                let s = encoder_forward(g, &tiny_model(), x)?;
                sum_stages(g, s)
            },
        },
        Case {
            name: "full_model",
            module: "model",
            tol: MODEL_TOL,
            inputs: || with(vec![input("image", &[1, 1, 32, 32])], param_specs(&tiny_model())),
            forward: |g| {
                let x = g.param("image")?;
                let out = model_forward(g, &tiny_model(), x)?;
                let y = binary_target(g, out.logits[0]);
                total_loss(&mut g.tape, &out.logits, &y)
            },
        },
    ]
}

/// Module names accepted by [`run_suite`].
pub const MODULES: &[&str] = &["tensor", "blocks", "loss", "model"];

/// Names of all cases, in run order.
pub fn case_names() -> Vec<(&'static str, &'static str)> {
    cases().iter().map(|c| (c.module, c.name)).collect()
}

/// Shifts LayerNorm-free inputs away from zero-variance corner cases and
/// perturbs constant initializers so bias/gamma gradients are generic.
fn randomized_store(specs: &[ParamSpec], seed: u64) -> Result<ParamStore<f64>> {
    let mut store = init_params::<f64>(specs, seed)?;
    let mut rng = Rng::new(seed).derive(0x6772_6164);
    for (_, t) in store.iter_mut() {
        for v in t.data_mut() {
            *v += 0.1 * rng.normal();
        }
    }
    Ok(store)
}

fn projected(store: &ParamStore<f64>, forward: Forward, proj: &Tensor<f64>) -> Result<f64> {
    let mut g = Graph::inference(store);
    let out = forward(&mut g)?;
    Ok(g.value(out).data().iter().zip(proj.data()).map(|(a, b)| a * b).sum())
}

fn run_case(case: &Case) -> Result<f64> {
    let specs = (case.inputs)();
    let mut worst = 0.0f64;
    for seed in 0..SEEDS {
        let store = randomized_store(&specs, seed)?;
        let mut rng = Rng::new(seed).derive(0x7072_6f6a);
        let (grads, proj) = {
            let mut g = Graph::new(&store);
            let out = (case.forward)(&mut g)?;
            let shape = g.value(out).shape().clone();
            let proj = Tensor::from_shape(shape, (0..g.value(out).numel()).map(|_| rng.normal()).collect())?;
            let r = g.input(proj.clone());
            let prod = g.tape.mul(out, r)?;
            let loss = g.tape.sum(prod)?;
            g.backward(loss)?;
            (g.grads(), proj)
        };
        let mut probe = store.clone();
        for (name, t) in store.iter() {
            let Some(analytic) = grads.get(name) else {
                // Inputs used only as constants (e.g. loss weights) carry no gradient.
                continue;
            };
            for _ in 0..PROBES.min(t.numel()) {
                let i = rng.below(t.numel());
                let x0 = t.data()[i];
                let h = default_step(x0);
                probe.get_mut(name).expect("cloned").data_mut()[i] = x0 + h;
                let up = projected(&probe, case.forward, &proj)?;
                probe.get_mut(name).expect("cloned").data_mut()[i] = x0 - h;
                let down = projected(&probe, case.forward, &proj)?;
                probe.get_mut(name).expect("cloned").data_mut()[i] = x0;
                let numeric = (up - down) / (2.0 * h);
                worst = worst.max(grad_error(analytic.data()[i], numeric));
            }
        }
    }
    Ok(worst)
}

/// Runs every case of `module` (all when `None`). `tol` overrides the
/// per-case thresholds.
pub fn run_suite(module: Option<&str>, tol: Option<f64>) -> Result<Vec<CheckResult>> {
    if let Some(m) = module {
        if !MODULES.contains(&m) {
            return Err(Error::Config(format!("unknown module `{m}`; expected one of {}", MODULES.join(", "))));
        }
    }
    cases()
        .iter()
        .filter(|c| module.is_none_or(|m| m == c.module))
        .map(|c| {
            Ok(CheckResult {
                name: c.name,
                module: c.module,
                max_err: run_case(c)?,
                tol: tol.unwrap_or(c.tol),
                seeds: SEEDS,
                probes: PROBES,
            })
        })
        .collect()
}

/// Fixed-width table of results.
pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = format!("{:<8} {:<24} {:>12} {:>10}  status\n", "module", "case", "max_err", "tol");
    for r in results {
        out += &format!(
            "{:<8} {:<24} {:>12.3e} {:>10.1e}  {}\n",
            r.module,
            r.name,
            r.max_err,
            r.tol,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_metric() {
        assert_eq!(grad_error(0.0, 1e-4), 1e-4);
        assert_eq!(grad_error(100.0, 101.0), 1.0 / 101.0);
    }

    #[test]
    fn unknown_module_rejected() {
        assert!(run_suite(Some("optim"), None).is_err());
    }

    #[test]
    fn tensor_cases_pass() {
        for r in run_suite(Some("tensor"), None).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }
}
