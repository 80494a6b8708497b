//! Recording tape for reverse-mode differentiation.

use super::kernels::conv::{self, ConvGeom, DwGeom};
use super::kernels::loss;
use super::kernels::norm::{self, LnCache};
use super::kernels::pointwise::{self, broadcast_map};
use super::kernels::pool::{self, PoolGeom};
use super::kernels::resize;
use super::{Float, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    DwConv2d { x: Var, w: Var, b: Option<Var>, geom: DwGeom },
    Resize { x: Var, h: usize, w: usize },
    LayerNorm { x: Var, gamma: Var, beta: Var, cache: LnCache<T> },
    Gelu { x: Var },
    Sigmoid { x: Var },
    AvgPool { x: Var, geom: PoolGeom },
    Concat { xs: Vec<Var> },
    Slice { x: Var, start: usize },
    Binary { kind: BinOp, a: Var, b: Var, map: Option<Vec<usize>> },
    Scale { x: Var, s: T },
    Sum { x: Var },
    Mean { x: Var },
    WeightedBce { z: Var, target: Tensor<T>, weight: Tensor<T> },
    WeightedIou { z: Var, target: Tensor<T>, weight: Tensor<T> },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Conv2d { x, w, b, .. } | Op::DwConv2d { x, w, b, .. } => {
                let mut v = vec![*x, *w];
                v.extend(b);
                v
            }
            Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::Concat { xs } => xs.clone(),
            Op::Binary { a, b, .. } => vec![*a, *b],
            Op::Resize { x, .. }
            | Op::Gelu { x }
            | Op::Sigmoid { x }
            | Op::AvgPool { x, .. }
            | Op::Slice { x, .. }
            | Op::Scale { x, .. }
            | Op::Sum { x }
            | Op::Mean { x }
            | Op::WeightedBce { z: x, .. }
            | Op::WeightedIou { z: x, .. } => vec![*x],
        }
    }
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    /// Accumulated gradient; only kept for leaves.
    grad: Option<Vec<T>>,
}

/// Ordered record of operations. Every node is appended after its inputs,
/// so reverse insertion order is a valid reverse topological order.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Float> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf whose gradient is tracked.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let inputs = op.inputs();
        if cfg!(debug_assertions) && inputs.iter().all(|v| self.nodes[v.0].value.is_finite()) {
            debug_assert!(value.is_finite(), "non-finite output from finite inputs in {op:?}");
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> Result<&Node<T>> {
        self.nodes.get(v.0).ok_or_else(|| Error::Contract(format!("variable {} is not on this tape", v.0)))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a tracked leaf, present only after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let node = &self.nodes[v.0];
        node.grad.as_ref().map(|g| Tensor::from_shape(node.value.shape().clone(), g.clone()).expect("grad shape"))
    }

    /// Drops all accumulated leaf gradients.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xv = &self.node(x)?.value;
        let wv = &self.node(w)?.value;
        let bv = match b {
            Some(b) => Some(&self.node(b)?.value),
            None => None,
        };
        let geom = ConvGeom::new(xv, wv, bv, stride, pad)?;
        let out = conv::conv2d_forward(&geom, xv.data(), wv.data(), bv.map(|t| t.data()));
        let value = Tensor::new([geom.n, geom.cout, geom.ho, geom.wo], out)?;
        Ok(self.push(value, Op::Conv2d { x, w, b, geom }))
    }

    /// Depthwise convolution; `pad` must equal `(k − 1) / 2`.
    pub fn dwconv2d(&mut self, x: Var, w: Var, b: Option<Var>, pad: usize) -> Result<Var> {
        let xv = &self.node(x)?.value;
        let wv = &self.node(w)?.value;
        let bv = match b {
            Some(b) => Some(&self.node(b)?.value),
            None => None,
        };
        let geom = DwGeom::new(xv, wv, bv, pad)?;
        let out = conv::dwconv2d_forward(&geom, xv.data(), wv.data(), bv.map(|t| t.data()));
        let value = Tensor::from_shape(xv.shape().clone(), out)?;
        Ok(self.push(value, Op::DwConv2d { x, w, b, geom }))
    }

    pub fn bilinear_resize(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let xv = &self.node(x)?.value;
        let (n, c, h, w) = xv.shape().nchw("bilinear_resize")?;
        if out_h == 0 || out_w == 0 {
            return Err(Error::dim("bilinear_resize", format!("target size {out_h}×{out_w} must be positive")));
        }
        let out = resize::resize_forward(xv.data(), n * c, h, w, out_h, out_w);
        let value = Tensor::new([n, c, out_h, out_w], out)?;
        Ok(self.push(value, Op::Resize { x, h, w }))
    }

    pub fn layernorm_c(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let xv = &self.node(x)?.value;
        let (n, c, h, w) = xv.shape().nchw("layernorm_c")?;
        let g = &self.node(gamma)?.value;
        let b = &self.node(beta)?.value;
        if g.dims() != [c] || b.dims() != [c] {
            return Err(Error::dim(
                "layernorm_c",
                format!("axis 0 (affine): expected [{c}], got gamma {:?} beta {:?}", g.shape(), b.shape()),
            ));
        }
        let (out, cache) = norm::layernorm_forward(xv.data(), n, c, h * w, g.data(), b.data());
        let value = Tensor::from_shape(xv.shape().clone(), out)?;
        Ok(self.push(value, Op::LayerNorm { x, gamma, beta, cache }))
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let value = self.node(x)?.value.map(pointwise::gelu);
        Ok(self.push(value, Op::Gelu { x }))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.node(x)?.value.map(pointwise::sigmoid);
        Ok(self.push(value, Op::Sigmoid { x }))
    }

    pub fn avgpool2d(&mut self, x: Var, k: usize, stride: usize, pad: usize) -> Result<Var> {
        let xv = &self.node(x)?.value;
        let geom = PoolGeom::new(xv.shape(), k, stride, pad)?;
        let out = pool::avgpool_forward(&geom, xv.data());
        let (n, c, _, _) = xv.shape().nchw("avgpool2d")?;
        let value = Tensor::new([n, c, geom.ho, geom.wo], out)?;
        Ok(self.push(value, Op::AvgPool { x, geom }))
    }

    /// Concatenates along the channel axis.
    pub fn concat_c(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| Error::Contract("concat_c of zero tensors".into()))?;
        let (n, _, h, w) = self.node(*first)?.value.shape().nchw("concat_c")?;
        let mut total_c = 0;
        for (i, v) in xs.iter().enumerate() {
            let (ni, ci, hi, wi) = self.node(*v)?.value.shape().nchw("concat_c")?;
            if (ni, hi, wi) != (n, h, w) {
                let axis = if ni != n { 0 } else if hi != h { 2 } else { 3 };
                return Err(Error::dim(
                    "concat_c",
                    format!("axis {axis}: input {i} is {ni}×{ci}×{hi}×{wi}, expected N,H,W = {n},{h},{w}"),
                ));
            }
            total_c += ci;
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * total_c * plane);
        for ni in 0..n {
            for v in xs {
                let t = &self.nodes[v.0].value;
                let c = t.dims()[1];
                out.extend_from_slice(&t.data()[ni * c * plane..(ni + 1) * c * plane]);
            }
        }
        let value = Tensor::new([n, total_c, h, w], out)?;
        Ok(self.push(value, Op::Concat { xs: xs.to_vec() }))
    }

    /// Channels `[start, start + len)`.
    pub fn slice_c(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = &self.node(x)?.value;
        let (n, c, h, w) = xv.shape().nchw("slice_c")?;
        if len == 0 || start + len > c {
            return Err(Error::dim("slice_c", format!("axis 1: channels {start}..{} out of 0..{c}", start + len)));
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * len * plane);
        for ni in 0..n {
            out.extend_from_slice(&xv.data()[(ni * c + start) * plane..(ni * c + start + len) * plane]);
        }
        let value = Tensor::new([n, len, h, w], out)?;
        Ok(self.push(value, Op::Slice { x, start }))
    }

    /// Splits along channels into consecutive slices of the given sizes.
    pub fn split_c(&mut self, x: Var, sizes: &[usize]) -> Result<Vec<Var>> {
        let c = self.node(x)?.value.shape().nchw("split_c")?.1;
        let total: usize = sizes.iter().sum();
        if total != c {
            return Err(Error::dim("split_c", format!("axis 1: sizes {sizes:?} sum to {total}, tensor has {c} channels")));
        }
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &s in sizes {
            out.push(self.slice_c(x, start, s)?);
            start += s;
        }
        Ok(out)
    }

    fn binary(&mut self, kind: BinOp, a: Var, b: Var) -> Result<Var> {
        let name = match kind {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
        };
        let av = &self.node(a)?.value;
        let bv = &self.node(b)?.value;
        let map = broadcast_map(name, av.dims(), bv.dims())?;
        let f = |x: T, y: T| match kind {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
        };
        let out: Vec<T> = match &map {
            None => av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect(),
            Some(m) => av.data().iter().zip(m).map(|(&x, &j)| f(x, bv.data()[j])).collect(),
        };
        let value = Tensor::from_shape(av.shape().clone(), out)?;
        Ok(self.push(value, Op::Binary { kind, a, b, map }))
    }

    /// `a + b`; `b` may broadcast along singleton axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinOp::Mul, a, b)
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        let value = self.node(x)?.value.map(|v| v * s);
        Ok(self.push(value, Op::Scale { x, s }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.node(x)?.value.data().iter().copied().sum::<T>();
        Ok(self.push(Tensor::scalar(s), Op::Sum { x }))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = &self.node(x)?.value;
        let s = v.data().iter().copied().sum::<T>() / T::of(v.numel() as f64);
        Ok(self.push(Tensor::scalar(s), Op::Mean { x }))
    }

    fn check_loss_inputs(&self, op: &'static str, z: Var, target: &Tensor<T>, weight: &Tensor<T>) -> Result<usize> {
        let zv = &self.node(z)?.value;
        if zv.shape() != target.shape() || zv.shape() != weight.shape() {
            return Err(Error::dim(
                op,
                format!("logits {:?}, target {:?}, weights {:?} must match", zv.shape(), target.shape(), weight.shape()),
            ));
        }
        Ok(zv.dims().first().copied().unwrap_or(1))
    }

    /// Pixel-weighted binary cross-entropy on logits, normalized by the weight
    /// sum per sample and averaged over the leading (batch) axis.
    pub fn weighted_bce(&mut self, z: Var, target: &Tensor<T>, weight: &Tensor<T>) -> Result<Var> {
        let batch = self.check_loss_inputs("weighted_bce", z, target, weight)?;
        let l = loss::weighted_bce_forward(self.nodes[z.0].value.data(), target.data(), weight.data(), batch);
        let op = Op::WeightedBce { z, target: target.clone(), weight: weight.clone() };
        Ok(self.push(Tensor::scalar(T::of(l)), op))
    }

    /// Pixel-weighted soft IoU loss on logits, `1 − (I + 1)/(U + 1)` per
    /// sample, averaged over the leading (batch) axis.
    pub fn weighted_iou(&mut self, z: Var, target: &Tensor<T>, weight: &Tensor<T>) -> Result<Var> {
        let batch = self.check_loss_inputs("weighted_iou", z, target, weight)?;
        let l = loss::weighted_iou_forward(self.nodes[z.0].value.data(), target.data(), weight.data(), batch);
        let op = Op::WeightedIou { z, target: target.clone(), weight: weight.clone() };
        Ok(self.push(Tensor::scalar(T::of(l)), op))
    }

    /// Back-propagates from a scalar. Gradients of tracked leaves are added
    /// to whatever a previous call left there.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let numel = self.node(loss)?.value.numel();
        if numel != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.backward_node(i, &g, &mut grads);
        }
        for (i, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn backward_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| &nodes[v.0].value;
        let wants = |v: Var| nodes[v.0].requires_grad;
        // Detached buffer for `v`, present only when `v` needs a gradient.
        fn slot<'a, T: Float>(grads: &'a mut [Option<Vec<T>>], nodes: &[Node<T>], v: Var) -> Option<&'a mut Vec<T>> {
            if !nodes[v.0].requires_grad {
                return None;
            }
            Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); nodes[v.0].value.numel()]))
        }
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                // Separate buffers avoid aliasing when one var feeds several slots.
                let mut dx = wants(*x).then(|| vec![T::zero(); val(*x).numel()]);
                let mut dw = wants(*w).then(|| vec![T::zero(); val(*w).numel()]);
                let mut db = b.filter(|b| wants(*b)).map(|b| vec![T::zero(); val(b).numel()]);
                conv::conv2d_backward(geom, val(*x).data(), val(*w).data(), g, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                add_into(grads, nodes, *x, dx);
                add_into(grads, nodes, *w, dw);
                if let Some(b) = b {
                    add_into(grads, nodes, *b, db);
                }
            }
            Op::DwConv2d { x, w, b, geom } => {
                let mut dx = wants(*x).then(|| vec![T::zero(); val(*x).numel()]);
                let mut dw = wants(*w).then(|| vec![T::zero(); val(*w).numel()]);
                let mut db = b.filter(|b| wants(*b)).map(|b| vec![T::zero(); val(b).numel()]);
                conv::dwconv2d_backward(geom, val(*x).data(), val(*w).data(), g, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                add_into(grads, nodes, *x, dx);
                add_into(grads, nodes, *w, dw);
                if let Some(b) = b {
                    add_into(grads, nodes, *b, db);
                }
            }
            Op::Resize { x, h, w } => {
                let d = nodes[i].value.dims();
                let (planes, oh, ow) = (d[0] * d[1], d[2], d[3]);
                if let Some(dx) = slot(grads, nodes, *x) {
                    resize::resize_backward(g, planes, *h, *w, oh, ow, dx);
                }
            }
            Op::LayerNorm { x, gamma, beta, cache } => {
                let (n, c, h, w) = val(*x).shape().nchw("layernorm_c").expect("validated");
                let mut dx = wants(*x).then(|| vec![T::zero(); val(*x).numel()]);
                let mut dg = wants(*gamma).then(|| vec![T::zero(); c]);
                let mut db = wants(*beta).then(|| vec![T::zero(); c]);
                norm::layernorm_backward(cache, n, c, h * w, val(*gamma).data(), g, dx.as_deref_mut(), dg.as_deref_mut(), db.as_deref_mut());
                add_into(grads, nodes, *x, dx);
                add_into(grads, nodes, *gamma, dg);
                add_into(grads, nodes, *beta, db);
            }
            Op::Gelu { x } => {
                let xs = val(*x).data();
                if let Some(dx) = slot(grads, nodes, *x) {
                    for ((d, &gv), &xv) in dx.iter_mut().zip(g).zip(xs) {
                        *d += gv * pointwise::gelu_grad(xv);
                    }
                }
            }
            Op::Sigmoid { x } => {
                let ys = nodes[i].value.data();
                if let Some(dx) = slot(grads, nodes, *x) {
                    for ((d, &gv), &y) in dx.iter_mut().zip(g).zip(ys) {
                        *d += gv * y * (T::one() - y);
                    }
                }
            }
            Op::AvgPool { x, geom } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    pool::avgpool_backward(geom, g, dx);
                }
            }
            Op::Concat { xs } => {
                let d = nodes[i].value.dims();
                let (n, total_c, plane) = (d[0], d[1], d[2] * d[3]);
                let mut offset = 0;
                for v in xs {
                    let c = val(*v).dims()[1];
                    if let Some(dx) = slot(grads, nodes, *v) {
                        for ni in 0..n {
                            let src = &g[(ni * total_c + offset) * plane..(ni * total_c + offset + c) * plane];
                            for (dv, &gv) in dx[ni * c * plane..(ni + 1) * c * plane].iter_mut().zip(src) {
                                *dv += gv;
                            }
                        }
                    }
                    offset += c;
                }
            }
            Op::Slice { x, start } => {
                let d = nodes[i].value.dims();
                let (n, len, plane) = (d[0], d[1], d[2] * d[3]);
                let c = val(*x).dims()[1];
                if let Some(dx) = slot(grads, nodes, *x) {
                    for ni in 0..n {
                        let dst = &mut dx[(ni * c + start) * plane..(ni * c + start + len) * plane];
                        for (dv, &gv) in dst.iter_mut().zip(&g[ni * len * plane..(ni + 1) * len * plane]) {
                            *dv += gv;
                        }
                    }
                }
            }
            Op::Binary { kind, a, b, map } => {
                let (av, bv) = (val(*a).data(), val(*b).data());
                let bidx = |j: usize| map.as_ref().map_or(j, |m| m[j]);
                let mut da = wants(*a).then(|| vec![T::zero(); av.len()]);
                let mut db = wants(*b).then(|| vec![T::zero(); bv.len()]);
                for (j, &gv) in g.iter().enumerate() {
                    let k = bidx(j);
                    let (ga, gb) = match kind {
                        BinOp::Add => (gv, gv),
                        BinOp::Sub => (gv, -gv),
                        BinOp::Mul => (gv * bv[k], gv * av[j]),
                    };
                    if let Some(da) = da.as_mut() {
                        da[j] += ga;
                    }
                    if let Some(db) = db.as_mut() {
                        db[k] += gb;
                    }
                }
                add_into(grads, nodes, *a, da);
                add_into(grads, nodes, *b, db);
            }
            Op::Scale { x, s } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    for (d, &gv) in dx.iter_mut().zip(g) {
                        *d += gv * *s;
                    }
                }
            }
            Op::Sum { x } => {
                if let Some(dx) = slot(grads, nodes, *x) {
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean { x } => {
                let share = g[0] / T::of(val(*x).numel() as f64);
                if let Some(dx) = slot(grads, nodes, *x) {
                    dx.iter_mut().for_each(|d| *d += share);
                }
            }
            Op::WeightedBce { z, target, weight } => {
                let batch = target.dims().first().copied().unwrap_or(1);
                let zs = val(*z).data();
                if let Some(dz) = slot(grads, nodes, *z) {
                    loss::weighted_bce_backward(zs, target.data(), weight.data(), batch, g[0], dz);
                }
            }
            Op::WeightedIou { z, target, weight } => {
                let batch = target.dims().first().copied().unwrap_or(1);
                let zs = val(*z).data();
                if let Some(dz) = slot(grads, nodes, *z) {
                    loss::weighted_iou_backward(zs, target.data(), weight.data(), batch, g[0], dz);
                }
            }
        }
    }
}

fn add_into<T: Float>(grads: &mut [Option<Vec<T>>], nodes: &[Node<T>], v: Var, contrib: Option<Vec<T>>) {
    let Some(c) = contrib else { return };
    if !nodes[v.0].requires_grad {
        return;
    }
    match &mut grads[v.0] {
        Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, &b)| *a += b),
        slot @ None => *slot = Some(c),
    }
}
