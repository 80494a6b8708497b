//! Layer normalization across the channel axis at every (n, y, x) position.

use crate::tensor::Float;

pub const LN_EPS: f64 = 1e-5;

/// Saved statistics for the backward pass.
#[derive(Debug, Clone)]
pub struct LnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

pub fn layernorm_forward<T: Float>(
    x: &[T],
    n: usize,
    c: usize,
    plane: usize,
    gamma: &[T],
    beta: &[T],
) -> (Vec<T>, LnCache<T>) {
    let eps = T::of(LN_EPS);
    let inv_c = T::one() / T::of(c as f64);
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); n * plane];
    let mut mean = vec![T::zero(); plane];
    let mut var = vec![T::zero(); plane];
    for ni in 0..n {
        let base = ni * c * plane;
        mean.fill(T::zero());
        var.fill(T::zero());
        for ci in 0..c {
            for (m, &v) in mean.iter_mut().zip(&x[base + ci * plane..base + (ci + 1) * plane]) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_c);
        for ci in 0..c {
            let row = &x[base + ci * plane..base + (ci + 1) * plane];
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let istd = &mut inv_std[ni * plane..(ni + 1) * plane];
        for (i, &s) in istd.iter_mut().zip(&var) {
            *i = T::one() / (s * inv_c + eps).sqrt();
        }
        for ci in 0..c {
            let r = base + ci * plane..base + (ci + 1) * plane;
            let (g, b) = (gamma[ci], beta[ci]);
            for (((o, xh), &v), (&m, &is)) in out[r.clone()]
                .iter_mut()
                .zip(&mut xhat[r.clone()])
                .zip(&x[r])
                .zip(mean.iter().zip(istd.iter()))
            {
                *xh = (v - m) * is;
                *o = *xh * g + b;
            }
        }
    }
    (out, LnCache { xhat, inv_std })
}

/// Accumulates input/affine gradients.
#[allow(clippy::too_many_arguments)]
pub fn layernorm_backward<T: Float>(
    cache: &LnCache<T>,
    n: usize,
    c: usize,
    plane: usize,
    gamma: &[T],
    dout: &[T],
    dx: Option<&mut [T]>,
    mut dgamma: Option<&mut [T]>,
    mut dbeta: Option<&mut [T]>,
) {
    for ni in 0..n {
        let base = ni * c * plane;
        for ci in 0..c {
            let r = base + ci * plane..base + (ci + 1) * plane;
            if let Some(dg) = dgamma.as_deref_mut() {
                dg[ci] += dout[r.clone()].iter().zip(&cache.xhat[r.clone()]).map(|(&g, &xh)| g * xh).sum::<T>();
            }
            if let Some(db) = dbeta.as_deref_mut() {
                db[ci] += dout[r].iter().copied().sum::<T>();
            }
        }
    }
    let Some(dx) = dx else { return };
    let inv_c = T::one() / T::of(c as f64);
    let mut sum_g = vec![T::zero(); plane];
    let mut sum_gx = vec![T::zero(); plane];
    for ni in 0..n {
        let base = ni * c * plane;
        sum_g.fill(T::zero());
        sum_gx.fill(T::zero());
        for ci in 0..c {
            let r = base + ci * plane..base + (ci + 1) * plane;
            let gm = gamma[ci];
            for ((sg, sgx), (&g, &xh)) in sum_g.iter_mut().zip(sum_gx.iter_mut()).zip(dout[r.clone()].iter().zip(&cache.xhat[r])) {
                let dxh = g * gm;
                *sg += dxh;
                *sgx += dxh * xh;
            }
        }
        let istd = &cache.inv_std[ni * plane..(ni + 1) * plane];
        for ci in 0..c {
            let r = base + ci * plane..base + (ci + 1) * plane;
            let gm = gamma[ci];
            for (p, ((d, &g), &xh)) in dx[r.clone()].iter_mut().zip(&dout[r.clone()]).zip(&cache.xhat[r]).enumerate() {
                let dxh = g * gm;
                *d += istd[p] * (dxh - inv_c * sum_g[p] - xh * inv_c * sum_gx[p]);
            }
        }
    }
}
