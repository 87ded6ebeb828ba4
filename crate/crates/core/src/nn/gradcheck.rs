//! Central finite differences for checking hand-written backward passes.

use super::Tensor;

/// Numerical gradient of the scalar `f` at `x` by central differences.
pub fn numeric_gradient(f: &mut dyn FnMut(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for i in 0..x.data().len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (fp - fm) / (2.0 * h);
    }
    out
}

/// Normwise relative error `max|a - n| / max(max|a|, max|n|)`; 0 when both
/// gradients vanish.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let scale = analytic.max_abs().max(numeric.max_abs());
    if scale == 0.0 {
        0.0
    } else {
        analytic.max_abs_diff(numeric) / scale
    }
}

/// `sum(weights * y)`: a scalar probe that turns a tensor-valued map into a loss
/// whose upstream gradient is `weights`.
pub fn projection(weights: &Tensor, y: &Tensor) -> f64 {
    weights.data().iter().zip(y.data()).map(|(a, b)| a * b).sum()
}
