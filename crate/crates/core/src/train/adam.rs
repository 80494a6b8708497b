use indexmap::IndexMap;

use crate::blocks::{Grads, ParamStore};
use crate::tensor::{Float, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

/// Optimizer state. Moments start at zero and are created on first update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    /// Number of completed updates.
    pub step: u64,
    pub moments: IndexMap<String, Moments<T>>,
}

impl<T> Default for AdamState<T> {
    fn default() -> Self {
        AdamState { step: 0, moments: IndexMap::new() }
    }
}

impl<T: Float> AdamState<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.step == other.step
            && self.moments.len() == other.moments.len()
            && self.moments.iter().zip(&other.moments).all(|((ka, a), (kb, b))| {
                ka == kb && a.m.bit_eq(&b.m) && a.v.bit_eq(&b.v)
            })
    }
}

/// One bias-corrected Adam update of every parameter, then clears `grads`.
///
/// Every parameter must have a gradient of matching shape; this is checked
/// before anything is modified.
pub fn adam_step<T: Float>(
    params: &mut ParamStore<T>,
    grads: &mut Grads<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    for (name, p) in params.iter() {
        match grads.get(name) {
            None => return Err(Error::MissingGradient(name.to_string())),
            Some(g) if g.shape() != p.shape() => {
                return Err(Error::dim("adam_step", format!("gradient of `{name}` is {:?}, parameter is {:?}", g.shape(), p.shape())))
            }
            Some(_) => {}
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (one, lr, eps) = (T::one(), T::of(cfg.lr), T::of(cfg.eps));
    let bc1 = T::of(1.0 - cfg.beta1.powf(t));
    let bc2 = T::of(1.0 - cfg.beta2.powf(t));
    for (name, p) in params.iter_mut() {
        let g = &grads[name];
        let mo = state
            .moments
            .entry(name.to_string())
            .or_insert_with(|| Moments { m: p.zeros_like(), v: p.zeros_like() });
        let (m, v) = (mo.m.data_mut(), mo.v.data_mut());
        for (i, (theta, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    grads.clear();
    Ok(())
}
