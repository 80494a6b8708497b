//! Elementwise activations and singleton-axis broadcasting.

use crate::tensor::Float;
use crate::{Error, Result};

/// GeLU, tanh approximation.
pub fn gelu<T: Float>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    half * x * (T::one() + (c * (x + T::of(0.044715) * x * x * x)).tanh())
}

pub fn gelu_grad<T: Float>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let half = T::of(0.5);
    let a = T::of(0.044715);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::of(3.0) * a * x * x)
}

/// Logistic sigmoid, evaluated without overflow for large |x|.
pub fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// For every flat index of `a_dims`, the flat index of the broadcast operand.
///
/// `b_dims` must have the same rank with every axis equal to 1 or to the
/// matching axis of `a_dims`. Returns `None` for equal shapes.
pub fn broadcast_map(op: &'static str, a_dims: &[usize], b_dims: &[usize]) -> Result<Option<Vec<usize>>> {
    if a_dims == b_dims {
        return Ok(None);
    }
    if a_dims.len() != b_dims.len() {
        return Err(Error::dim(op, format!("rank mismatch: {a_dims:?} vs {b_dims:?}")));
    }
    for (axis, (&da, &db)) in a_dims.iter().zip(b_dims).enumerate() {
        if db != da && db != 1 {
            return Err(Error::dim(op, format!("axis {axis}: {db} does not broadcast to {da}")));
        }
    }
    let rank = a_dims.len();
    let mut b_strides = vec![0usize; rank];
    let mut acc = 1;
    for axis in (0..rank).rev() {
        b_strides[axis] = if b_dims[axis] == 1 { 0 } else { acc };
        acc *= b_dims[axis];
    }
    let total: usize = a_dims.iter().product();
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; rank];
    for _ in 0..total {
        map.push(idx.iter().zip(&b_strides).map(|(i, s)| i * s).sum());
        for axis in (0..rank).rev() {
            idx[axis] += 1;
            if idx[axis] < a_dims[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    Ok(Some(map))
}
