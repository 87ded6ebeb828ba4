use super::{Param, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments. Moment buffers are created lazily on
/// the first step and matched to parameters by position.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<(Tensor, Tensor)>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update using each parameter's accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| {
                    let (r, c) = p.value.shape();
                    (Tensor::zeros(r, c), Tensor::zeros(r, c))
                })
                .collect();
        }
        assert_eq!(self.moments.len(), params.len(), "parameter list changed between steps");
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (p, (m, v)) in params.iter_mut().zip(&mut self.moments) {
            let g = p.grad.data();
            let m = m.data_mut();
            let v = v.data_mut();
            let w = p.value.data_mut();
            for i in 0..w.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                w[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Updates a single parameter tensor in isolation; handy for tests.
pub fn adam_step(param: &mut Param, state: &mut AdamState) {
    state.step(&mut [param]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Param {
        Param::new(Tensor::filled(1, 1, v))
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut p = scalar(0.7);
        let mut s = AdamState::new(AdamConfig::default());
        for _ in 0..10 {
            adam_step(&mut p, &mut s);
        }
        assert_eq!(p.value.get(0, 0), 0.7);
    }

    #[test]
    fn first_step_is_signed_lr() {
        for g in [3.0, -0.02] {
            let mut p = scalar(1.0);
            p.grad.set(0, 0, g);
            let mut s = AdamState::new(AdamConfig::default());
            adam_step(&mut p, &mut s);
            // closed form: -lr * g / (|g| + eps)
            let expect = 1.0 - 1e-3 * g / (g.abs() + 1e-8);
            assert!((p.value.get(0, 0) - expect).abs() < 1e-15);
            assert!(((1.0 - p.value.get(0, 0)) / g.signum() - 1e-3).abs() < 1e-3 * 1e-6);
        }
    }

    #[test]
    fn quadratic_descends_monotonically() {
        // independent recurrence for f(w) = w^2
        let (mut w_ref, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut p = scalar(1.0);
        let mut s = AdamState::new(AdamConfig::default());
        let mut prev = 1.0;
        for t in 1..=100 {
            let g = 2.0 * w_ref;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w_ref -= 1e-3 * mh / (vh.sqrt() + 1e-8);

            let w = p.value.get(0, 0);
            p.grad.set(0, 0, 2.0 * w);
            adam_step(&mut p, &mut s);
            let now = p.value.get(0, 0);
            assert!(now < prev && now > 0.0);
            assert!((now - w_ref).abs() < 1e-14);
            prev = now;
        }
    }
}
