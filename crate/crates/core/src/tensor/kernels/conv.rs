//! Dense and depthwise 2-D cross-correlation.

use super::out_extent;
use crate::tensor::{Float, Tensor};
use crate::{Error, Result};

/// Validated geometry of a dense convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn new<T: Float>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&Tensor<T>>, stride: usize, pad: usize) -> Result<Self> {
        let (n, cin, h, w) = x.shape().nchw("conv2d")?;
        let (cout, wcin, kh, kw) = weight.shape().nchw("conv2d")?;
        if wcin != cin {
            return Err(Error::dim("conv2d", format!("axis 1 (input channels): input has {cin}, weight expects {wcin}")));
        }
        if kh != kw {
            return Err(Error::dim("conv2d", format!("axis 2/3 (kernel): non-square kernel {kh}×{kw}")));
        }
        if kh % 2 == 0 {
            return Err(Error::geometry("conv2d", format!("kernel size {kh} is even")));
        }
        if stride == 0 {
            return Err(Error::geometry("conv2d", "stride must be positive"));
        }
        if let Some(b) = bias {
            if b.dims() != [cout] {
                return Err(Error::dim("conv2d", format!("axis 0 (bias): expected [{cout}], got {:?}", b.shape())));
            }
        }
        let ho = out_extent("conv2d", "height", h, kh, stride, pad)?;
        let wo = out_extent("conv2d", "width", w, kw, stride, pad)?;
        Ok(ConvGeom { n, cin, h, w, cout, k: kh, stride, pad, ho, wo })
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    fn patch_rows(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }
}

/// Unfolds one sample (`cin×h×w`) into a `(cin·k·k) × (ho·wo)` patch matrix.
fn im2col<T: Float>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let plane = g.out_plane();
    for ci in 0..g.cin {
        let src = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let drow = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let srow = &src[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize { T::zero() } else { srow[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch-matrix gradients back onto the image.
fn col2im<T: Float>(g: &ConvGeom, cols: &[T], dx: &mut [T]) {
    let plane = g.out_plane();
    for ci in 0..g.cin {
        let dst = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let drow = &mut dst[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            drow[ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward<T: Float>(g: &ConvGeom, x: &[T], weight: &[T], bias: Option<&[T]>) -> Vec<T> {
    let plane = g.out_plane();
    let krows = g.patch_rows();
    let mut out = vec![T::zero(); g.n * g.cout * plane];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); krows * plane] };
    for n in 0..g.n {
        let xs = &x[n * g.cin * g.h * g.w..(n + 1) * g.cin * g.h * g.w];
        let os = &mut out[n * g.cout * plane..(n + 1) * g.cout * plane];
        if let Some(b) = bias {
            for (co, row) in os.chunks_exact_mut(plane).enumerate() {
                row.fill(b[co]);
            }
        }
        let patches: &[T] = if g.is_pointwise() {
            xs
        } else {
            im2col(g, xs, &mut cols);
            &cols
        };
        T::gemm(g.cout, krows, plane, T::one(), (weight, krows, 1), (patches, plane, 1), T::one(), (os, plane, 1));
    }
    out
}

/// Gradients of a dense convolution. Each `d*` buffer, when given, is
/// accumulated into (not overwritten).
pub fn conv2d_backward<T: Float>(
    g: &ConvGeom,
    x: &[T],
    weight: &[T],
    dout: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let plane = g.out_plane();
    let krows = g.patch_rows();
    let need_cols = !g.is_pointwise();
    let mut cols = if need_cols { vec![T::zero(); krows * plane] } else { Vec::new() };
    let mut dcols = if need_cols && dx.is_some() { vec![T::zero(); krows * plane] } else { Vec::new() };
    let in_sz = g.cin * g.h * g.w;
    for n in 0..g.n {
        let xs = &x[n * in_sz..(n + 1) * in_sz];
        let gs = &dout[n * g.cout * plane..(n + 1) * g.cout * plane];
        if let Some(db) = db.as_deref_mut() {
            for (co, row) in gs.chunks_exact(plane).enumerate() {
                db[co] += row.iter().copied().sum::<T>();
            }
        }
        if let Some(dw) = dw.as_deref_mut() {
            let patches: &[T] = if need_cols {
                im2col(g, xs, &mut cols);
                &cols
            } else {
                xs
            };
            // dW (cout×krows) += dOut (cout×plane) · patchesᵀ (plane×krows)
            T::gemm(g.cout, plane, krows, T::one(), (gs, plane, 1), (patches, 1, plane), T::one(), (dw, krows, 1));
        }
        if let Some(dx) = dx.as_deref_mut() {
            let dxs = &mut dx[n * in_sz..(n + 1) * in_sz];
            if need_cols {
                // dPatches (krows×plane) = Wᵀ (krows×cout) · dOut (cout×plane)
                T::gemm(krows, g.cout, plane, T::one(), (weight, 1, krows), (gs, plane, 1), T::zero(), (&mut dcols, plane, 1));
                col2im(g, &dcols, dxs);
            } else {
                T::gemm(krows, g.cout, plane, T::one(), (weight, 1, krows), (gs, plane, 1), T::one(), (dxs, plane, 1));
            }
        }
    }
}

/// Validated geometry of a same-resolution depthwise convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DwGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub pad: usize,
}

impl DwGeom {
    pub fn new<T: Float>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&Tensor<T>>, pad: usize) -> Result<Self> {
        let (n, c, h, w) = x.shape().nchw("dwconv2d")?;
        let (wc, one, kh, kw) = weight.shape().nchw("dwconv2d")?;
        if wc != c {
            return Err(Error::dim("dwconv2d", format!("axis 0 (channels): input has {c}, weight has {wc}")));
        }
        if one != 1 {
            return Err(Error::dim("dwconv2d", format!("axis 1: depthwise weight must have 1 input channel, got {one}")));
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::geometry("dwconv2d", format!("kernel must be square and odd, got {kh}×{kw}")));
        }
        if pad != (kh - 1) / 2 {
            return Err(Error::geometry("dwconv2d", format!("pad {pad} does not preserve resolution for kernel {kh}")));
        }
        if let Some(b) = bias {
            if b.dims() != [c] {
                return Err(Error::dim("dwconv2d", format!("axis 0 (bias): expected [{c}], got {:?}", b.shape())));
            }
        }
        Ok(DwGeom { n, c, h, w, k: kh, pad })
    }
}

/// Output range `[lo, hi)` along one axis whose input tap for kernel offset
/// `kk` lies inside the image; `None` when the tap always falls in padding.
fn valid_range(extent: usize, kk: usize, pad: usize) -> Option<(usize, usize)> {
    let shift = kk as isize - pad as isize;
    let lo = (-shift).max(0);
    let hi = (extent as isize - shift).min(extent as isize);
    (lo < hi).then_some((lo as usize, hi as usize))
}

pub fn dwconv2d_forward<T: Float>(g: &DwGeom, x: &[T], weight: &[T], bias: Option<&[T]>) -> Vec<T> {
    let plane = g.h * g.w;
    let mut out = vec![T::zero(); g.n * g.c * plane];
    for n in 0..g.n {
        for c in 0..g.c {
            let base = (n * g.c + c) * plane;
            let src = &x[base..base + plane];
            let dst = &mut out[base..base + plane];
            if let Some(b) = bias {
                dst.fill(b[c]);
            }
            let kern = &weight[c * g.k * g.k..(c + 1) * g.k * g.k];
            for ky in 0..g.k {
                let Some((y0, y1)) = valid_range(g.h, ky, g.pad) else { continue };
                for kx in 0..g.k {
                    let wv = kern[ky * g.k + kx];
                    let Some((x0, x1)) = valid_range(g.w, kx, g.pad) else { continue };
                    for y in y0..y1 {
                        let iy = y + ky - g.pad;
                        let drow = &mut dst[y * g.w + x0..y * g.w + x1];
                        let srow = &src[iy * g.w + x0 + kx - g.pad..iy * g.w + x1 + kx - g.pad];
                        for (d, &s) in drow.iter_mut().zip(srow) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn dwconv2d_backward<T: Float>(
    g: &DwGeom,
    x: &[T],
    weight: &[T],
    dout: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let plane = g.h * g.w;
    for n in 0..g.n {
        for c in 0..g.c {
            let base = (n * g.c + c) * plane;
            let src = &x[base..base + plane];
            let gs = &dout[base..base + plane];
            if let Some(db) = db.as_deref_mut() {
                db[c] += gs.iter().copied().sum::<T>();
            }
            for ky in 0..g.k {
                let Some((y0, y1)) = valid_range(g.h, ky, g.pad) else { continue };
                for kx in 0..g.k {
                    let Some((x0, x1)) = valid_range(g.w, kx, g.pad) else { continue };
                    let widx = c * g.k * g.k + ky * g.k + kx;
                    let wv = weight[widx];
                    let mut acc = T::zero();
                    for y in y0..y1 {
                        let iy = y + ky - g.pad;
                        let grow = &gs[y * g.w + x0..y * g.w + x1];
                        let soff = iy * g.w + x0 + kx - g.pad;
                        if dw.is_some() {
                            let srow = &src[soff..soff + (x1 - x0)];
                            for (&gv, &s) in grow.iter().zip(srow) {
                                acc += gv * s;
                            }
                        }
                        if let Some(dx) = dx.as_deref_mut() {
                            let drow = &mut dx[base + soff..base + soff + (x1 - x0)];
                            for (d, &gv) in drow.iter_mut().zip(grow) {
                                *d += wv * gv;
                            }
                        }
                    }
                    if let Some(dw) = dw.as_deref_mut() {
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
}
