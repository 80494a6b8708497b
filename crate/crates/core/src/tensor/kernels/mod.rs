//! Forward and backward kernels on raw row-major buffers.
//!
//! The [`Tape`](crate::tensor::Tape) validates shapes and dispatches here;
//! a few callers (the loss weight map, evaluation) also use the forward
//! kernels directly on detached tensors.

pub mod conv;
pub mod loss;
pub mod norm;
pub mod pointwise;
pub mod pool;
pub mod resize;

use crate::{Error, Result};

/// Output extent of a sliding window along one axis.
///
/// Uses floor division, but only when the discarded trailing positions are
/// padding; a window layout that would silently skip real input is a
/// geometry error.
pub fn out_extent(op: &'static str, axis: &str, input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < k {
        return Err(Error::geometry(op, format!("{axis}: padded extent {padded} smaller than kernel {k}")));
    }
    let span = padded - k;
    let rem = span % stride;
    if rem > pad {
        return Err(Error::geometry(
            op,
            format!("{axis}: ({input} + 2·{pad} − {k}) not divisible by stride {stride}; {rem} input positions would be dropped"),
        ));
    }
    Ok(span / stride + 1)
}
