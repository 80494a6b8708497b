use super::Tensor;

/// Default central-difference step for a coordinate with value `x`.
pub fn default_step(x: f64) -> f64 {
    1e-4 * x.abs().max(1.0)
}

/// Central-difference gradient of a scalar function, with the default
/// per-element step `1e-4·max(1, |x|)`.
pub fn finite_diff_grad(f: impl FnMut(&Tensor<f64>) -> f64, x: &Tensor<f64>) -> Tensor<f64> {
    finite_diff_grad_with(f, x, None)
}

/// Central-difference gradient; `step` overrides the default per-element step.
pub fn finite_diff_grad_with(mut f: impl FnMut(&Tensor<f64>) -> f64, x: &Tensor<f64>, step: Option<f64>) -> Tensor<f64> {
    let mut probe = x.clone();
    let mut grad = x.zeros_like();
    for i in 0..x.numel() {
        let x0 = x.data()[i];
        let h = step.unwrap_or_else(|| default_step(x0));
        probe.data_mut()[i] = x0 + h;
        let fp = f(&probe);
        probe.data_mut()[i] = x0 - h;
        let fm = f(&probe);
        probe.data_mut()[i] = x0;
        grad.data_mut()[i] = (fp - fm) / (2.0 * h);
    }
    grad
}
