use crate::tensor::Rng;
use crate::{Error, Result};

/// Train/validation indices of one cross-validation fold, each sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded `k`-fold partition of `0..n`. Validation sets are disjoint, cover
/// every index, and differ in size by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k == 0 || k > n {
        return Err(Error::Contract(format!("cannot split {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    Ok((0..k)
        .map(|i| {
            let (lo, hi) = (i * n / k, (i + 1) * n / k);
            let mut val = order[lo..hi].to_vec();
            let mut train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            val.sort_unstable();
            train.sort_unstable();
            Fold { train, val }
        })
        .collect())
}
