use proptest::prelude::*;
use sa2net::loss::{
    dice_score, ensemble_mean, head_loss, iou_score, overlap_counts, threshold_mask, total_loss, weight_map, EvalReport,
    SampleScore,
};
use sa2net::tensor::{finite_diff_grad, Rng, Tape, Tensor};
use sa2net::Error;

fn mask(dims: &[usize], seed: u64, p: f64) -> Tensor<f64> {
    let mut rng = Rng::new(seed);
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| if rng.uniform(0.0, 1.0) < p { 1.0 } else { 0.0 }).collect()).unwrap()
}

fn normal(dims: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = Rng::new(seed);
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| rng.normal()).collect()).unwrap()
}

fn eval_loss(logits: &Tensor<f64>, gt: &Tensor<f64>, which: &str) -> f64 {
    let w = weight_map(gt).unwrap();
    let mut tape = Tape::new();
    let z = tape.constant(logits.clone());
    let l = match which {
        "bce" => tape.weighted_bce(z, gt, &w).unwrap(),
        "iou" => tape.weighted_iou(z, gt, &w).unwrap(),
        _ => head_loss(&mut tape, z, gt, &w).unwrap(),
    };
    tape.value(l).item()
}

#[test]
fn zero_logits_cost_ln2() {
    for seed in 0..4 {
        let gt = mask(&[2, 1, 6, 6], seed, 0.4);
        let l = eval_loss(&Tensor::zeros([2, 1, 6, 6]).unwrap(), &gt, "bce");
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }
}

#[test]
fn saturated_logits_are_stable() {
    let gt = mask(&[1, 1, 8, 8], 9, 0.5);
    let z = gt.map(|y| if y == 1.0 { 30.0 } else { -30.0 });
    let bce = eval_loss(&z, &gt, "bce");
    assert!(bce.is_finite() && bce < 1e-9);
    assert!(eval_loss(&z, &gt, "iou") < 1e-6);
    let wrong = z.map(|v| -v);
    assert!(eval_loss(&wrong, &gt, "bce").is_finite());
}

#[test]
fn empty_mask_with_confident_background_is_free() {
    let gt = Tensor::zeros([1, 1, 8, 8]).unwrap();
    let z = Tensor::full([1, 1, 8, 8], -30.0).unwrap();
    assert!(eval_loss(&z, &gt, "iou") < 1e-6);
}

#[test]
fn loss_gradients_match_finite_differences() {
    let gt = mask(&[1, 1, 4, 4], 3, 0.5);
    let z = normal(&[1, 1, 4, 4], 4);
    for which in ["bce", "iou"] {
        let w = weight_map(&gt).unwrap();
        let mut tape = Tape::new();
        let v = tape.leaf(z.clone());
        let l = if which == "bce" { tape.weighted_bce(v, &gt, &w) } else { tape.weighted_iou(v, &gt, &w) }.unwrap();
        tape.backward(l).unwrap();
        let numeric = finite_diff_grad(|p| eval_loss(p, &gt, which), &z);
        assert!(tape.grad(v).unwrap().max_abs_diff(&numeric) < 1e-5, "{which}");
    }
}

#[test]
fn total_loss_closed_form_for_zero_logits() {
    let (h, w) = (6usize, 10usize);
    let gt = Tensor::<f64>::zeros([2, 1, h, w]).unwrap();
    let mut tape = Tape::<f64>::new();
    let heads: Vec<_> = (0..4).map(|_| tape.constant(Tensor::zeros([2, 1, h, w]).unwrap())).collect();
    let l = total_loss(&mut tape, &heads, &gt).unwrap();
    // unit weights everywhere; half probability over an empty mask
    let union = 0.5 * (h * w) as f64;
    let expected = 4.0 * (std::f64::consts::LN_2 + 1.0 - 1.0 / (union + 1.0));
    assert!((tape.value(l).item() - expected).abs() < 1e-12);
}

#[test]
fn total_loss_bounds() {
    let gt = mask(&[2, 1, 16, 16], 5, 0.3);
    let perfect = gt.map(|y| if y == 1.0 { 30.0 } else { -30.0 });
    let mut tape = Tape::new();
    let heads: Vec<_> = (0..4).map(|_| tape.constant(perfect.clone())).collect();
    let l = total_loss(&mut tape, &heads, &gt).unwrap();
    assert!(tape.value(l).item() < 1e-5);

    let mut tape = Tape::new();
    let heads: Vec<_> = (0..4).map(|i| tape.constant(normal(&[2, 1, 16, 16], 10 + i))).collect();
    let all = total_loss(&mut tape, &heads, &gt).unwrap();
    let first = total_loss(&mut tape, &heads[..1], &gt).unwrap();
    assert!(tape.value(all).item() >= tape.value(first).item());
    assert!(matches!(total_loss(&mut tape, &[], &gt), Err(Error::Contract(_))));
}

#[test]
fn weight_map_does_not_see_logits() {
    // The gradient through the tape equals finite differences of a loss
    // whose weights are fixed by the ground truth alone.
    let gt = mask(&[1, 1, 16, 16], 6, 0.4);
    let z = normal(&[1, 1, 16, 16], 7);
    let mut tape = Tape::new();
    let v = tape.leaf(z.clone());
    let l = total_loss(&mut tape, &[v], &gt).unwrap();
    tape.backward(l).unwrap();
    let numeric = finite_diff_grad(|p| eval_loss(p, &gt, "both"), &z);
    assert!(tape.grad(v).unwrap().max_abs_diff(&numeric) < 1e-6);
    assert_eq!(tape.value(l).item(), eval_loss(&z, &gt, "both"));
}

#[test]
fn weight_map_examples() {
    let gt = mask(&[2, 1, 20, 20], 8, 0.5);
    let w = weight_map(&gt).unwrap();
    assert!(w.data().iter().all(|&v| (1.0..=6.0).contains(&v)));
    assert!(matches!(weight_map(&gt.map(|v| v * 0.5)), Err(Error::Validation(_))));
}

#[test]
fn metric_examples() {
    let mut pred = Tensor::<f64>::zeros([1, 4, 4]).unwrap();
    let mut gt = pred.clone();
    pred.data_mut()[5] = 1.0;
    gt.data_mut()[5] = 1.0;
    gt.data_mut()[6] = 1.0;
    assert_eq!(overlap_counts(&pred, &gt).unwrap(), (1, 1, 2));
    assert_eq!(dice_score(&pred, &gt).unwrap(), 2.0 / 3.0);
    assert_eq!(iou_score(&pred, &gt).unwrap(), 0.5);
    assert_eq!(dice_score(&gt, &gt).unwrap(), 1.0);
    assert_eq!(iou_score(&gt, &gt).unwrap(), 1.0);
    let empty = Tensor::<f64>::zeros([1, 4, 4]).unwrap();
    assert_eq!(dice_score(&empty, &empty).unwrap(), 1.0);
    assert_eq!(iou_score(&empty, &empty).unwrap(), 1.0);
    assert_eq!(dice_score(&empty, &gt).unwrap(), 0.0);
    assert!(matches!(dice_score(&gt.map(|v| v * 0.3), &gt), Err(Error::Validation(_))));
    assert!(iou_score(&Tensor::<f64>::zeros([1, 4, 5]).unwrap(), &gt).is_err());
}

#[test]
fn ensemble_and_threshold() {
    let a = Tensor::<f64>::full([1, 2, 2], 0.2).unwrap();
    let b = Tensor::<f64>::full([1, 2, 2], 0.8).unwrap();
    let m = ensemble_mean(&[a.clone(), b]).unwrap();
    assert!(m.data().iter().all(|&v| v == 0.5));
    assert!(threshold_mask(&m, 0.5).data().iter().all(|&v| v == 1.0));
    assert!(threshold_mask(&a, 0.5).data().iter().all(|&v| v == 0.0));
    assert!(matches!(ensemble_mean::<f64>(&[]), Err(Error::Contract(_))));
    let p = normal(&[1, 3, 3], 1).map(|v| 1.0 / (1.0 + (-v).exp()));
    for k in 1..8 {
        assert!(ensemble_mean(&vec![p.clone(); k]).unwrap().bit_eq(&p));
        let p32 = p.cast::<f32>();
        assert!(ensemble_mean(&vec![p32.clone(); k]).unwrap().bit_eq(&p32));
    }
}

#[test]
fn ensemble_is_order_independent_to_rounding() {
    let maps: Vec<Tensor<f64>> = (0..5).map(|i| normal(&[1, 6, 6], 20 + i).map(|v| 1.0 / (1.0 + (-v).exp()))).collect();
    let mean = ensemble_mean(&maps).unwrap();
    for i in 0..36 {
        let reversed: f64 = maps.iter().rev().map(|m| m.data()[i]).sum::<f64>() / 5.0;
        assert!((mean.data()[i] - reversed).abs() < 1e-12);
    }
}

#[test]
fn report_statistics_and_formats() {
    let samples = vec![
        SampleScore { id: 0, dice: 1.0, iou: 1.0 },
        SampleScore { id: 1, dice: 0.5, iou: 1.0 / 3.0 },
        SampleScore { id: 2, dice: 0.8, iou: 2.0 / 3.0 },
    ];
    let r = EvalReport { threshold: 0.5, samples };
    let d = [1.0, 0.5, 0.8];
    let mean = d.iter().sum::<f64>() / 3.0;
    let std = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0).sqrt();
    assert!((r.mean_dice() - mean).abs() < 1e-12);
    assert!((r.std_dice() - std).abs() < 1e-12);
    let text = r.to_lines();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1].split('\t').collect::<Vec<_>>()[0], "1");
    assert!(r.to_table().contains("threshold"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dice_iou_identity(seed in any::<u64>(), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let a = mask(&[1, 16, 16], seed, p);
        let b = mask(&[1, 16, 16], seed ^ 0x55, q);
        let (d, i) = (dice_score(&a, &b).unwrap(), iou_score(&a, &b).unwrap());
        prop_assert!((d - 2.0 * i / (1.0 + i)).abs() < 1e-12);
        prop_assert!(d >= i && (0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&i));
    }

    #[test]
    fn loss_terms_nonnegative(seed in any::<u64>(), p in 0.0f64..1.0) {
        let gt = mask(&[1, 1, 8, 8], seed, p);
        let z = normal(&[1, 1, 8, 8], seed ^ 1).map(|v| v * 4.0);
        prop_assert!(eval_loss(&z, &gt, "bce") >= 0.0);
        prop_assert!(eval_loss(&z, &gt, "iou") >= 0.0);
    }

    #[test]
    fn batch_order_does_not_change_loss(seed in any::<u64>()) {
        let gts: Vec<Tensor<f64>> = (0..3).map(|i| mask(&[1, 1, 8, 8], seed + i, 0.4)).collect();
        let zs: Vec<Tensor<f64>> = (0..3).map(|i| normal(&[1, 1, 8, 8], seed ^ (i + 7))).collect();
        let batch = |order: [usize; 3]| {
            let gt = Tensor::stack(&order.map(|i| &gts[i])).unwrap().reshape([3, 1, 8, 8]).unwrap();
            let z = Tensor::stack(&order.map(|i| &zs[i])).unwrap().reshape([3, 1, 8, 8]).unwrap();
            let mut tape = Tape::new();
            let v = tape.constant(z);
            let l = total_loss(&mut tape, &[v, v], &gt).unwrap();
            tape.value(l).item()
        };
        let (a, b) = (batch([0, 1, 2]), batch([2, 0, 1]));
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn weights_are_at_least_one(seed in any::<u64>(), p in 0.0f64..1.0) {
        let w = weight_map(&mask(&[1, 1, 12, 9], seed, p)).unwrap();
        prop_assert!(w.data().iter().all(|&v| v >= 1.0 && v.is_finite()));
    }
}
