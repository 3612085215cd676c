use crate::numerics::array::Array;

/// Elementwise activation functions with hand-derived backward maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    /// softplus(x) = ln(1 + e^x), used by constrained output heads.
    Softplus,
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(alpha) => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Softplus => softplus(x),
        }
    }

    /// d activation / dx given the forward input x.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(alpha) => {
                if x >= 0.0 {
                    1.0
                } else {
                    *alpha
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Softplus => 1.0 / (1.0 + (-x).exp()),
        }
    }

    pub fn forward(&self, x: &Array) -> Array {
        x.map(|v| self.apply(v))
    }

    /// Backward pass; `x` is the forward input.
    pub fn backward(&self, x: &Array, dy: &Array) -> Array {
        debug_assert_eq!(x.shape(), dy.shape());
        Array::from_fn(x.shape(), |i| dy.values()[i] * self.derivative(x.values()[i]))
    }
}

/// Numerically stable ln(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of softplus: ln(e^y - 1) for y > 0, with a floor guard so that
/// zero-valued targets stay finite.
pub fn softplus_inv(y: f64) -> f64 {
    let y = y.max(1e-12);
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}
