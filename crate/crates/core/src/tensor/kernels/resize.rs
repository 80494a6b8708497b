//! Bilinear resize with half-pixel centers (`align_corners = false`).

use crate::tensor::Float;

/// Per-output-coordinate source taps along one axis: (low index, high index, high weight).
pub fn axis_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

pub fn resize_forward<T: Float>(x: &[T], planes: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
    if (h, w) == (oh, ow) {
        return x.to_vec();
    }
    let ty = axis_taps(h, oh);
    let tx = axis_taps(w, ow);
    let mut out = vec![T::zero(); planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
            let (ly, hy) = (T::of(ly), T::of(1.0 - ly));
            for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                let (lx, hx) = (T::of(lx), T::of(1.0 - lx));
                dst[oy * ow + ox] = hy * (hx * src[y0 * w + x0] + lx * src[y0 * w + x1])
                    + ly * (hx * src[y1 * w + x0] + lx * src[y1 * w + x1]);
            }
        }
    }
    out
}

/// Accumulates the adjoint of [`resize_forward`] into `dx`.
pub fn resize_backward<T: Float>(dout: &[T], planes: usize, h: usize, w: usize, oh: usize, ow: usize, dx: &mut [T]) {
    if (h, w) == (oh, ow) {
        for (d, &g) in dx.iter_mut().zip(dout) {
            *d += g;
        }
        return;
    }
    let ty = axis_taps(h, oh);
    let tx = axis_taps(w, ow);
    for p in 0..planes {
        let gs = &dout[p * oh * ow..(p + 1) * oh * ow];
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
            let (ly, hy) = (T::of(ly), T::of(1.0 - ly));
            for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                let (lx, hx) = (T::of(lx), T::of(1.0 - lx));
                let g = gs[oy * ow + ox];
                dst[y0 * w + x0] += hy * hx * g;
                dst[y0 * w + x1] += hy * lx * g;
                dst[y1 * w + x0] += ly * hx * g;
                dst[y1 * w + x1] += ly * lx * g;
            }
        }
    }
}
