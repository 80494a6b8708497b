use super::ensure_binary;
use crate::tensor::{Float, Tensor};
use crate::{Error, Result};

/// `(|P ∩ G|, |P|, |G|)` for two binary masks.
pub fn overlap_counts<T: Float>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<(usize, usize, usize)> {
    if pred.shape() != gt.shape() {
        return Err(Error::dim("overlap", format!("prediction {:?} vs ground truth {:?}", pred.shape(), gt.shape())));
    }
    ensure_binary("prediction", pred)?;
    ensure_binary("ground truth", gt)?;
    let (mut inter, mut p, mut g) = (0, 0, 0);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let (a, b) = (a == T::one(), b == T::one());
        inter += usize::from(a && b);
        p += usize::from(a);
        g += usize::from(b);
    }
    Ok((inter, p, g))
}

/// `2|P∩G| / (|P| + |G|)`; two empty masks score 1.
pub fn dice_score<T: Float>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<f64> {
    let (inter, p, g) = overlap_counts(pred, gt)?;
    Ok(if p + g == 0 { 1.0 } else { 2.0 * inter as f64 / (p + g) as f64 })
}

/// `|P∩G| / |P∪G|`; two empty masks score 1.
pub fn iou_score<T: Float>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<f64> {
    let (inter, p, g) = overlap_counts(pred, gt)?;
    let union = p + g - inter;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Elementwise arithmetic mean of probability maps.
///
/// Kept as an `f64` running mean, so `k` identical maps reproduce the input
/// bit for bit in either precision.
pub fn ensemble_mean<T: Float>(maps: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = maps.first().ok_or_else(|| Error::Contract("ensemble of zero prediction maps".into()))?;
    let mut acc: Vec<f64> = first.data().iter().map(|v| v.as_f64()).collect();
    for (j, m) in maps.iter().enumerate().skip(1) {
        if m.shape() != first.shape() {
            return Err(Error::dim("ensemble_mean", format!("{:?} vs {:?}", m.shape(), first.shape())));
        }
        let count = (j + 1) as f64;
        for (a, &v) in acc.iter_mut().zip(m.data()) {
            *a += (v.as_f64() - *a) / count;
        }
    }
    Tensor::from_shape(first.shape().clone(), acc.into_iter().map(T::of).collect())
}

/// 1 where `prob ≥ t`, else 0.
pub fn threshold_mask<T: Float>(prob: &Tensor<T>, t: f64) -> Tensor<T> {
    prob.map(|p| if p.as_f64() >= t { T::one() } else { T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(bits: &[u8]) -> Tensor<f64> {
        Tensor::new([1, bits.len()], bits.iter().map(|&b| f64::from(b)).collect()).unwrap()
    }

    #[test]
    fn counting_example() {
        let pred = mask(&[1, 0, 0, 0]);
        let gt = mask(&[1, 1, 0, 0]);
        assert!((dice_score(&pred, &gt).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((iou_score(&pred, &gt).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_pair_is_perfect() {
        let e = mask(&[0, 0, 0]);
        assert_eq!(dice_score(&e, &e).unwrap(), 1.0);
        assert_eq!(iou_score(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn non_binary_rejected() {
        let a = Tensor::<f64>::new([2], vec![0.0, 0.3]).unwrap();
        assert!(matches!(dice_score(&a, &a), Err(Error::Validation(_))));
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let a = Tensor::<f64>::new([1], vec![0.2]).unwrap();
        let b = Tensor::<f64>::new([1], vec![0.8]).unwrap();
        let m = ensemble_mean(&[a, b]).unwrap();
        assert_eq!(m.data(), &[0.5]);
        assert_eq!(threshold_mask(&m, 0.5).data(), &[1.0]);
        assert!(ensemble_mean::<f64>(&[]).is_err());
    }
}
