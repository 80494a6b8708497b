//! Fused pixel-weighted segmentation losses over logits.
//!
//! Both losses are normalized per sample (leading axis) and then averaged
//! over the batch.

use super::pointwise::sigmoid;
use crate::tensor::Float;

pub const IOU_SMOOTH: f64 = 1.0;

/// `max(z,0) − z·y + log(1 + e^{−|z|})`, the stable form of BCE-with-logits.
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub fn weighted_bce_forward<T: Float>(z: &[T], y: &[T], w: &[T], batch: usize) -> f64 {
    let per = z.len() / batch;
    let mut total = 0.0;
    for n in 0..batch {
        let r = n * per..(n + 1) * per;
        let (mut num, mut den) = (0.0, 0.0);
        for ((&zi, &yi), &wi) in z[r.clone()].iter().zip(&y[r.clone()]).zip(&w[r]) {
            num += wi.as_f64() * bce_with_logits(zi.as_f64(), yi.as_f64());
            den += wi.as_f64();
        }
        total += num / den;
    }
    total / batch as f64
}

pub fn weighted_bce_backward<T: Float>(z: &[T], y: &[T], w: &[T], batch: usize, upstream: T, dz: &mut [T]) {
    let per = z.len() / batch;
    for n in 0..batch {
        let r = n * per..(n + 1) * per;
        let den: f64 = w[r.clone()].iter().map(|v| v.as_f64()).sum();
        let scale = upstream / T::of(den * batch as f64);
        for (((d, &zi), &yi), &wi) in dz[r.clone()].iter_mut().zip(&z[r.clone()]).zip(&y[r.clone()]).zip(&w[r]) {
            *d += scale * wi * (sigmoid(zi) - yi);
        }
    }
}

fn iou_sums<T: Float>(z: &[T], y: &[T], w: &[T]) -> (f64, f64) {
    let (mut inter, mut union) = (0.0, 0.0);
    for ((&zi, &yi), &wi) in z.iter().zip(y).zip(w) {
        let p = sigmoid(zi.as_f64());
        let (yi, wi) = (yi.as_f64(), wi.as_f64());
        inter += wi * p * yi;
        union += wi * (p + yi - p * yi);
    }
    (inter, union)
}

pub fn weighted_iou_forward<T: Float>(z: &[T], y: &[T], w: &[T], batch: usize) -> f64 {
    let per = z.len() / batch;
    let mut total = 0.0;
    for n in 0..batch {
        let r = n * per..(n + 1) * per;
        let (inter, union) = iou_sums(&z[r.clone()], &y[r.clone()], &w[r]);
        total += 1.0 - (inter + IOU_SMOOTH) / (union + IOU_SMOOTH);
    }
    total / batch as f64
}

pub fn weighted_iou_backward<T: Float>(z: &[T], y: &[T], w: &[T], batch: usize, upstream: T, dz: &mut [T]) {
    let per = z.len() / batch;
    let up = upstream.as_f64() / batch as f64;
    for n in 0..batch {
        let r = n * per..(n + 1) * per;
        let (inter, union) = iou_sums(&z[r.clone()], &y[r.clone()], &w[r.clone()]);
        let (i, u) = (inter + IOU_SMOOTH, union + IOU_SMOOTH);
        for (((d, &zi), &yi), &wi) in dz[r.clone()].iter_mut().zip(&z[r.clone()]).zip(&y[r.clone()]).zip(&w[r]) {
            let p = sigmoid(zi.as_f64());
            let (yi, wi) = (yi.as_f64(), wi.as_f64());
            let dratio = (wi * yi * u - i * wi * (1.0 - yi)) / (u * u);
            *d += T::of(-up * dratio * p * (1.0 - p));
        }
    }
}
