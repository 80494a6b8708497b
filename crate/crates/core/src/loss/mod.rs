//! Training losses and evaluation metrics.

mod metrics;
mod report;

pub use metrics::{dice_score, ensemble_mean, iou_score, overlap_counts, threshold_mask};
pub use report::{EvalReport, SampleScore};

use crate::tensor::kernels::pool::{avgpool_forward, PoolGeom};
use crate::tensor::{Float, Tape, Tensor, Var};
use crate::{Error, Result};

/// Side of the pooling window used for boundary emphasis.
pub const WEIGHT_WINDOW: usize = 15;
/// Extra weight at a pixel whose neighbourhood disagrees completely with it.
pub const WEIGHT_GAIN: f64 = 5.0;

pub(crate) fn ensure_binary<T: Float>(what: &str, t: &Tensor<T>) -> Result<()> {
    match t.data().iter().position(|&v| v != T::zero() && v != T::one()) {
        Some(i) => Err(Error::Validation(format!("{what} is not binary: value {} at index {i}", t.data()[i]))),
        None => Ok(()),
    }
}

/// Boundary-emphasis pixel weights `1 + 5·|avgpool15(gt) − gt|`.
///
/// Computed on plain tensors, outside any tape, so the loss never
/// differentiates through it.
pub fn weight_map<T: Float>(gt: &Tensor<T>) -> Result<Tensor<T>> {
    ensure_binary("ground truth", gt)?;
    let geom = PoolGeom::new(gt.shape(), WEIGHT_WINDOW, 1, WEIGHT_WINDOW / 2)?;
    let pooled = avgpool_forward(&geom, gt.data());
    let gain = T::of(WEIGHT_GAIN);
    let data = pooled.iter().zip(gt.data()).map(|(&p, &y)| T::one() + gain * (p - y).abs()).collect();
    Tensor::from_shape(gt.shape().clone(), data)
}

/// `weighted_bce + weighted_iou` on one logit map.
pub fn head_loss<T: Float>(tape: &mut Tape<T>, logits: Var, gt: &Tensor<T>, weights: &Tensor<T>) -> Result<Var> {
    let bce = tape.weighted_bce(logits, gt, weights)?;
    let iou = tape.weighted_iou(logits, gt, weights)?;
    tape.add(bce, iou)
}

/// Deep-supervision loss: the sum of [`head_loss`] over `heads`, all with
/// unit weight and one shared weight map.
pub fn total_loss<T: Float>(tape: &mut Tape<T>, heads: &[Var], gt: &Tensor<T>) -> Result<Var> {
    let weights = weight_map(gt)?;
    let mut total: Option<Var> = None;
    for &h in heads {
        let l = head_loss(tape, h, gt, &weights)?;
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l)?,
        });
    }
    total.ok_or_else(|| Error::Contract("total_loss over zero heads".into()))
}
