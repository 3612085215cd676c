use crate::error::{Error, Result};
use crate::numerics::array::Array;
use crate::numerics::rng::RngState;

/// A trainable tensor with its gradient accumulator and Adam moment buffers.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Array,
    pub grad: Array,
    pub adam_m: Array,
    pub adam_v: Array,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Array) -> Parameter {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            value,
            grad: Array::zeros(&shape),
            adam_m: Array::zeros(&shape),
            adam_v: Array::zeros(&shape),
            step_count: 0,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Parameter {
        Parameter::new(name, Array::zeros(shape))
    }

    /// Kaiming-style fan-in uniform init: U(-b, b) with b = sqrt(3 / fan_in).
    pub fn kaiming(name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut RngState) -> Parameter {
        let bound = (3.0 / fan_in.max(1) as f64).sqrt();
        let value = Array::from_fn(shape, |_| (rng.uniform() * 2.0 - 1.0) * bound);
        Parameter::new(name, value)
    }

    /// Gaussian init with the given standard deviation.
    pub fn gaussian(name: impl Into<String>, shape: &[usize], std: f64, rng: &mut RngState) -> Parameter {
        let value = Array::from_fn(shape, |_| rng.normal() * std);
        Parameter::new(name, value)
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad.values_mut() {
            *g = 0.0;
        }
    }

    pub fn accumulate_grad(&mut self, grad: &Array) -> Result<()> {
        if grad.shape() != self.value.shape() {
            return Err(Error::shape(
                format!("grad of {}", self.name),
                self.value.shape(),
                grad.shape(),
            ));
        }
        for (g, d) in self.grad.values_mut().iter_mut().zip(grad.values()) {
            *g += d;
        }
        Ok(())
    }
}

/// Adam hyperparameters; defaults are the standard ones.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over a set of parameters. Gradients are
/// zeroed after the step.
pub fn adam_step(params: &mut [&mut Parameter], cfg: &AdamConfig) -> Result<()> {
    for p in params.iter_mut() {
        if !p.grad.all_finite() {
            return Err(Error::Diverged(format!(
                "non-finite gradient in parameter {}",
                p.name
            )));
        }
        p.step_count += 1;
        let t = p.step_count as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        let n = p.value.len();
        for i in 0..n {
            let g = p.grad.values()[i];
            let m = cfg.beta1 * p.adam_m.values()[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * p.adam_v.values()[i] + (1.0 - cfg.beta2) * g * g;
            p.adam_m.values_mut()[i] = m;
            p.adam_v.values_mut()[i] = v;
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            p.value.values_mut()[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        p.zero_grad();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_with_unit_grad_moves_by_lr() {
        let mut p = Parameter::new("w", Array::zeros(&[4]));
        for g in p.grad.values_mut() {
            *g = 1.0;
        }
        let lr = 0.05;
        adam_step(&mut [&mut p], &AdamConfig::with_lr(lr)).unwrap();
        for &v in p.value.values() {
            assert!((v + lr).abs() < 1e-6 * lr, "delta {v}");
        }
        // Gradients cleared after the step.
        assert!(p.grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_grad_leaves_parameter_unchanged() {
        let mut p = Parameter::new("w", Array::full(&[3], 2.5));
        adam_step(&mut [&mut p], &AdamConfig::with_lr(0.1)).unwrap();
        assert!(p.value.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn descends_quadratic() {
        // f(w) = w^2 from w = 1; 100 steps at lr 0.1 should land near 0.
        let mut p = Parameter::new("w", Array::scalar(1.0));
        let cfg = AdamConfig::with_lr(0.1);
        for _ in 0..100 {
            let w = p.value.values()[0];
            p.grad.values_mut()[0] = 2.0 * w;
            adam_step(&mut [&mut p], &cfg).unwrap();
        }
        assert!(p.value.values()[0].abs() < 0.1);
    }

    #[test]
    fn non_finite_grad_names_parameter() {
        let mut p = Parameter::new("encoder.mlp.w0", Array::zeros(&[2]));
        p.grad.values_mut()[1] = f64::NAN;
        let err = adam_step(&mut [&mut p], &AdamConfig::with_lr(0.1)).unwrap_err();
        assert!(err.to_string().contains("encoder.mlp.w0"));
    }
}
