use crate::data::Sample;
use crate::loss::{dice_score, ensemble_mean, iou_score, threshold_mask, EvalReport, SampleScore};
use crate::model::{predict_probs, Checkpoint};
use crate::tensor::{Float, Tensor};
use crate::{Error, Result};

/// Scores probability maps against ground-truth masks at `threshold`.
pub fn score_predictions<T: Float>(
    ids: &[u64],
    probs: &[Tensor<T>],
    masks: &[Tensor<T>],
    threshold: f64,
) -> Result<EvalReport> {
    if ids.len() != probs.len() || ids.len() != masks.len() {
        return Err(Error::Contract(format!(
            "{} ids, {} predictions and {} masks",
            ids.len(),
            probs.len(),
            masks.len()
        )));
    }
    let samples = ids
        .iter()
        .zip(probs.iter().zip(masks))
        .map(|(&id, (p, gt))| {
            let pred = threshold_mask(p, threshold);
            Ok(SampleScore { id, dice: dice_score(&pred, gt)?, iou: iou_score(&pred, gt)? })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport { threshold, samples })
}

/// Foreground probabilities of every checkpoint, averaged, thresholded and
/// scored per sample. Checkpoints must share one architecture; this is
/// checked before any inference runs.
pub fn evaluate<T: Float>(checkpoints: &[Checkpoint<T>], dataset: &[Sample<T>], threshold: f64) -> Result<EvalReport> {
    let first = checkpoints.first().ok_or_else(|| Error::Contract("evaluation needs at least one checkpoint".into()))?;
    for ck in &checkpoints[1..] {
        ck.ensure_compatible(&first.config)?;
    }
    let mut probs = Vec::with_capacity(dataset.len());
    for s in dataset {
        let image = s.image.clone().reshape(std::iter::once(1).chain(s.image.dims().iter().copied()).collect::<Vec<_>>())?;
        let maps = checkpoints
            .iter()
            .map(|ck| predict_probs(&ck.params, &ck.config, &image)?.reshape(s.mask.dims().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        probs.push(ensemble_mean(&maps)?);
    }
    let ids: Vec<u64> = dataset.iter().map(|s| s.id).collect();
    let masks: Vec<Tensor<T>> = dataset.iter().map(|s| s.mask.clone()).collect();
    score_predictions(&ids, &probs, &masks, threshold)
}
