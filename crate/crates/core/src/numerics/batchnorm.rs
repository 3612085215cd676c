use crate::error::{Error, Result};
use crate::numerics::adam::Parameter;
use crate::numerics::array::Array;

const BN_EPS: f64 = 1e-5;

/// Per-channel batch normalization over [B, C, T] (or [B, C] as T=1).
/// Training mode standardizes with batch statistics and updates running
/// stats by EMA; inference mode uses the running stats.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: Array,
    pub running_var: Array,
    pub momentum: f64,
}

/// Cache from a training-mode forward pass, consumed by backward.
pub struct BatchNormCache {
    x_hat: Array,
    inv_std: Vec<f64>,
    group: usize,
}

impl BatchNorm1d {
    pub fn new(name: &str, channels: usize, momentum: f64) -> BatchNorm1d {
        BatchNorm1d {
            gamma: Parameter::new(format!("{name}.gamma"), Array::full(&[channels], 1.0)),
            beta: Parameter::zeros(format!("{name}.beta"), &[channels]),
            running_mean: Array::zeros(&[channels]),
            running_var: Array::full(&[channels], 1.0),
            momentum,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    fn check_input(&self, x: &Array) -> Result<(usize, usize, usize)> {
        let (b, c, t) = match x.shape() {
            [b, c] => (*b, *c, 1),
            [b, c, t] => (*b, *c, *t),
            other => {
                return Err(Error::Dimension(format!(
                    "batchnorm1d expects rank 2 or 3 input, got {other:?}"
                )))
            }
        };
        if c != self.channels() {
            return Err(Error::shape("batchnorm1d channels", x.shape(), &[self.channels()]));
        }
        Ok((b, c, t))
    }

    /// Training-mode forward. Batch size must be at least 2.
    pub fn forward_train(&mut self, x: &Array) -> Result<(Array, BatchNormCache)> {
        let (b, c, t) = self.check_input(x)?;
        if b < 2 {
            return Err(Error::Usage(
                "batchnorm1d: training mode requires batch size >= 2".into(),
            ));
        }
        let group = b * t;
        let mut x_hat = Array::zeros(x.shape());
        let mut inv_std = vec![0.0; c];
        let mut y = Array::zeros(x.shape());
        for ci in 0..c {
            let mut mean = 0.0;
            for bi in 0..b {
                for ti in 0..t {
                    mean += get(x, bi, ci, ti, t);
                }
            }
            mean /= group as f64;
            let mut var = 0.0;
            for bi in 0..b {
                for ti in 0..t {
                    let d = get(x, bi, ci, ti, t) - mean;
                    var += d * d;
                }
            }
            var /= group as f64;
            let istd = 1.0 / (var + BN_EPS).sqrt();
            inv_std[ci] = istd;
            let g = self.gamma.value.values()[ci];
            let be = self.beta.value.values()[ci];
            for bi in 0..b {
                for ti in 0..t {
                    let xh = (get(x, bi, ci, ti, t) - mean) * istd;
                    set(&mut x_hat, bi, ci, ti, t, xh);
                    set(&mut y, bi, ci, ti, t, g * xh + be);
                }
            }
            let m = self.momentum;
            self.running_mean.values_mut()[ci] = (1.0 - m) * self.running_mean.values()[ci] + m * mean;
            self.running_var.values_mut()[ci] = (1.0 - m) * self.running_var.values()[ci] + m * var;
        }
        Ok((y, BatchNormCache { x_hat, inv_std, group }))
    }

    /// Inference-mode forward using running statistics.
    pub fn forward_eval(&self, x: &Array) -> Result<Array> {
        let (b, c, t) = self.check_input(x)?;
        let mut y = Array::zeros(x.shape());
        for ci in 0..c {
            let mean = self.running_mean.values()[ci];
            let istd = 1.0 / (self.running_var.values()[ci] + BN_EPS).sqrt();
            let g = self.gamma.value.values()[ci];
            let be = self.beta.value.values()[ci];
            for bi in 0..b {
                for ti in 0..t {
                    let xh = (get(x, bi, ci, ti, t) - mean) * istd;
                    set(&mut y, bi, ci, ti, t, g * xh + be);
                }
            }
        }
        Ok(y)
    }

    /// Backward through a training-mode forward; accumulates dgamma/dbeta.
    pub fn backward(&mut self, cache: &BatchNormCache, dy: &Array) -> Result<Array> {
        let (b, c, t) = self.check_input(dy)?;
        let n = cache.group as f64;
        let mut dx = Array::zeros(dy.shape());
        let mut dgamma = Array::zeros(&[c]);
        let mut dbeta = Array::zeros(&[c]);
        for ci in 0..c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for bi in 0..b {
                for ti in 0..t {
                    let g = get(dy, bi, ci, ti, t);
                    sum_dy += g;
                    sum_dy_xhat += g * get(&cache.x_hat, bi, ci, ti, t);
                }
            }
            dgamma.values_mut()[ci] = sum_dy_xhat;
            dbeta.values_mut()[ci] = sum_dy;
            let gamma = self.gamma.value.values()[ci];
            let istd = cache.inv_std[ci];
            for bi in 0..b {
                for ti in 0..t {
                    let g = get(dy, bi, ci, ti, t);
                    let xh = get(&cache.x_hat, bi, ci, ti, t);
                    let v = gamma * istd * (g - sum_dy / n - xh * sum_dy_xhat / n);
                    set(&mut dx, bi, ci, ti, t, v);
                }
            }
        }
        self.gamma.accumulate_grad(&dgamma)?;
        self.beta.accumulate_grad(&dbeta)?;
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

fn get(a: &Array, b: usize, c: usize, t: usize, t_len: usize) -> f64 {
    if a.shape().len() == 2 {
        a.at2(b, c)
    } else {
        a.values()[(b * a.shape()[1] + c) * t_len + t]
    }
}

fn set(a: &mut Array, b: usize, c: usize, t: usize, t_len: usize, v: f64) {
    if a.shape().len() == 2 {
        a.set2(b, c, v);
    } else {
        let idx = (b * a.shape()[1] + c) * t_len + t;
        a.values_mut()[idx] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_channel_outputs_beta() {
        let mut bn = BatchNorm1d::new("bn", 1, 0.1);
        bn.beta.value.values_mut()[0] = 2.5;
        let x = Array::full(&[4, 1, 3], 7.0);
        let (y, _) = bn.forward_train(&x).unwrap();
        for &v in y.values() {
            assert!((v - 2.5).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn standardized_batch_passes_through() {
        // Already zero-mean unit-variance per channel (population variance).
        let vals = vec![-1.0, 1.0, 1.0, -1.0];
        let x = Array::from_vec(&[2, 2], vals.clone()).unwrap();
        let mut bn = BatchNorm1d::new("bn", 2, 0.1);
        let (y, _) = bn.forward_train(&x).unwrap();
        for (a, b) in y.values().iter().zip(&vals) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn batch_of_one_rejected_in_training() {
        let mut bn = BatchNorm1d::new("bn", 2, 0.1);
        let x = Array::zeros(&[1, 2, 4]);
        assert!(bn.forward_train(&x).is_err());
    }

    #[test]
    fn eval_uses_running_stats() {
        let mut bn = BatchNorm1d::new("bn", 1, 1.0); // momentum 1: running = batch
        let x = Array::from_vec(&[2, 1], vec![0.0, 2.0]).unwrap();
        bn.forward_train(&x).unwrap();
        // Running stats now mean=1, var=1; eval of value 1.0 gives ~0.
        let y = bn.forward_eval(&Array::from_vec(&[1, 1], vec![1.0]).unwrap()).unwrap();
        assert!(y.values()[0].abs() < 1e-6);
    }
}
