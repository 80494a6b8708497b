use super::{adam_step, AdamState, TrainConfig};
use crate::blocks::{Graph, ParamStore, STAGES};
use crate::data::{augment, Sample};
use crate::loss::total_loss;
use crate::model::{init_model, model_forward, Checkpoint, ModelConfig};
use crate::tensor::{Float, Rng, Tensor};
use crate::{Error, Result};

/// State visible to the per-step callback of [`train`].
pub struct Progress<'a, T> {
    /// 1-based index of the update just applied.
    pub step: usize,
    pub loss: f64,
    pub params: &'a ParamStore<T>,
    pub adam: &'a AdamState<T>,
    /// True when `checkpoint_every` divides `step`.
    pub checkpoint_due: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub checkpoint: Checkpoint<T>,
    /// Loss before each update; entry `i` belongs to step `i + 1`.
    pub trace: Vec<f64>,
}

/// Loss trace as `step<TAB>loss` lines.
pub fn render_trace(trace: &[f64]) -> String {
    trace.iter().enumerate().map(|(i, l)| format!("{}\t{l}\n", i + 1)).collect()
}

const AUGMENT_STREAM: u64 = 0xA5A5_0000_0000_0000;

fn batch_tensors<T: Float>(samples: &[&Sample<T>]) -> Result<(Tensor<T>, Tensor<T>)> {
    let images: Vec<&Tensor<T>> = samples.iter().map(|s| &s.image).collect();
    let masks: Vec<&Tensor<T>> = samples.iter().map(|s| &s.mask).collect();
    Ok((Tensor::stack(&images)?, Tensor::stack(&masks)?))
}

/// Trains a fresh model on `dataset` with Adam.
///
/// Each epoch visits the samples in a seeded random order, in batches of
/// `batch_size` (the last batch of an epoch may be smaller). A non-finite
/// loss aborts with [`Error::Divergence`] before the update is applied.
pub fn train<T: Float>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    dataset: &[Sample<T>],
    mut on_step: impl FnMut(&Progress<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    train_cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("training needs at least one sample".into()));
    }
    let mut params = init_model::<T>(model_cfg)?;
    let mut state = AdamState::new();
    let adam = train_cfg.adam();
    let heads = if train_cfg.deep_supervision { STAGES } else { 1 };
    let root = Rng::new(train_cfg.seed);
    let mut trace = Vec::with_capacity(train_cfg.steps);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0;
    for step in 1..=train_cfg.steps {
        if cursor >= order.len() {
            order = (0..dataset.len()).collect();
            root.derive(epoch).shuffle(&mut order);
            epoch += 1;
            cursor = 0;
        }
        let end = (cursor + train_cfg.batch_size).min(order.len());
        let mut batch = Vec::with_capacity(end - cursor);
        for (slot, &i) in order[cursor..end].iter().enumerate() {
            let sample = &dataset[i];
            if train_cfg.augment {
                let stream = AUGMENT_STREAM ^ ((step as u64) << 16 | slot as u64);
                batch.push(augment(sample, &mut root.derive(stream))?.0);
            } else {
                batch.push(sample.clone());
            }
        }
        cursor = end;
        let (images, masks) = batch_tensors(&batch.iter().collect::<Vec<_>>())?;

        let mut grads = {
            let mut g = Graph::new(&params);
            let x = g.input(images);
            let out = model_forward(&mut g, model_cfg, x)?;
            let loss = total_loss(&mut g.tape, &out.logits[..heads], &masks)?;
            let value = g.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(Error::Divergence { step });
            }
            trace.push(value);
            g.backward(loss)?;
            g.grads()
        };
        adam_step(&mut params, &mut grads, &mut state, &adam)?;
        let checkpoint_due = train_cfg.checkpoint_every > 0 && step % train_cfg.checkpoint_every == 0;
        on_step(&Progress { step, loss: trace[step - 1], params: &params, adam: &state, checkpoint_due })?;
    }
    let checkpoint = Checkpoint::new(ModelConfig { seed: 0, ..model_cfg.clone() }, params, Some(state));
    Ok(TrainOutcome { checkpoint, trace })
}
