//! Average pooling whose divisor counts only in-bounds elements.

use super::out_extent;
use crate::tensor::{Float, Shape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeom {
    pub planes: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl PoolGeom {
    pub fn new(shape: &Shape, k: usize, stride: usize, pad: usize) -> Result<Self> {
        let (n, c, h, w) = shape.nchw("avgpool2d")?;
        if k == 0 || stride == 0 {
            return Err(Error::geometry("avgpool2d", "kernel and stride must be positive"));
        }
        if pad > k / 2 {
            return Err(Error::geometry("avgpool2d", format!("pad {pad} exceeds half the kernel {k}")));
        }
        let ho = out_extent("avgpool2d", "height", h, k, stride, pad)?;
        let wo = out_extent("avgpool2d", "width", w, k, stride, pad)?;
        Ok(PoolGeom { planes: n * c, h, w, k, stride, pad, ho, wo })
    }

    /// Clipped input window `[lo, hi)` for output index `o` along an axis of `extent`.
    fn window(&self, o: usize, extent: usize) -> (usize, usize) {
        let start = (o * self.stride) as isize - self.pad as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + self.k as isize) as usize).min(extent);
        (lo, hi)
    }
}

pub fn avgpool_forward<T: Float>(g: &PoolGeom, x: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); g.planes * g.ho * g.wo];
    for p in 0..g.planes {
        let src = &x[p * g.h * g.w..(p + 1) * g.h * g.w];
        for oy in 0..g.ho {
            let (y0, y1) = g.window(oy, g.h);
            for ox in 0..g.wo {
                let (x0, x1) = g.window(ox, g.w);
                let mut acc = T::zero();
                for y in y0..y1 {
                    for v in &src[y * g.w + x0..y * g.w + x1] {
                        acc += *v;
                    }
                }
                let count = (y1 - y0) * (x1 - x0);
                out[(p * g.ho + oy) * g.wo + ox] = acc / T::of(count as f64);
            }
        }
    }
    out
}

pub fn avgpool_backward<T: Float>(g: &PoolGeom, dout: &[T], dx: &mut [T]) {
    for p in 0..g.planes {
        let dst = &mut dx[p * g.h * g.w..(p + 1) * g.h * g.w];
        for oy in 0..g.ho {
            let (y0, y1) = g.window(oy, g.h);
            for ox in 0..g.wo {
                let (x0, x1) = g.window(ox, g.w);
                let count = (y1 - y0) * (x1 - x0);
                let share = dout[(p * g.ho + oy) * g.wo + ox] / T::of(count as f64);
                for y in y0..y1 {
                    for d in &mut dst[y * g.w + x0..y * g.w + x1] {
                        *d += share;
                    }
                }
            }
        }
    }
}
