use crate::error::{Error, Result};
use crate::numerics::array::Array;

/// Clamp range for probabilities entering a log.
const BCE_CLAMP: (f64, f64) = (1e-7, 1.0 - 1e-7);

fn check_finite(a: &Array, what: &str) -> Result<()> {
    a.ensure_finite(what)
}

/// Mean-reduced cross entropy of logits [B × C] against class indices,
/// stabilized through log-sum-exp.
pub fn cross_entropy_from_logits(logits: &Array, targets: &[usize]) -> Result<f64> {
    check_finite(logits, "cross_entropy logits")?;
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    if b != targets.len() {
        return Err(Error::shape("cross_entropy targets", logits.shape(), &[targets.len()]));
    }
    let mut total = 0.0;
    for (bi, &t) in targets.iter().enumerate() {
        if t >= c {
            return Err(Error::IndexOutOfRange {
                name: "cross_entropy target".into(),
                index: t,
                len: c,
            });
        }
        let row = &logits.values()[bi * c..(bi + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[t];
    }
    Ok(total / b as f64)
}

/// d(mean CE)/d logits = (softmax - onehot) / B.
pub fn cross_entropy_from_logits_backward(logits: &Array, targets: &[usize]) -> Result<Array> {
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    let mut grad = Array::zeros(logits.shape());
    for (bi, &t) in targets.iter().enumerate() {
        let row = &logits.values()[bi * c..(bi + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        for j in 0..c {
            let softmax = (row[j] - max).exp() / denom;
            let delta = if j == t { 1.0 } else { 0.0 };
            grad.values_mut()[bi * c + j] = (softmax - delta) / b as f64;
        }
    }
    Ok(grad)
}

/// Mean-reduced binary cross entropy over probabilities, clamped away from
/// {0, 1} so the logs stay finite.
pub fn binary_cross_entropy(pred: &Array, target: &Array) -> Result<f64> {
    check_finite(pred, "bce pred")?;
    check_finite(target, "bce target")?;
    if pred.shape() != target.shape() {
        return Err(Error::shape("bce", pred.shape(), target.shape()));
    }
    if target.values().iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::Usage("bce targets must lie in [0, 1]".into()));
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    for (&p, &t) in pred.values().iter().zip(target.values()) {
        let p = p.clamp(BCE_CLAMP.0, BCE_CLAMP.1);
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    Ok(total / n)
}

pub fn binary_cross_entropy_backward(pred: &Array, target: &Array) -> Result<Array> {
    let n = pred.len() as f64;
    pred.zip_map(target, |p, t| {
        if p < BCE_CLAMP.0 || p > BCE_CLAMP.1 {
            // Clamped region: the loss is locally constant in p.
            0.0
        } else {
            ((1.0 - t) / (1.0 - p) - t / p) / n
        }
    })
}

/// Mean squared error.
pub fn mse(pred: &Array, target: &Array) -> Result<f64> {
    check_finite(pred, "mse pred")?;
    check_finite(target, "mse target")?;
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse", pred.shape(), target.shape()));
    }
    let n = pred.len() as f64;
    Ok(pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

pub fn mse_backward(pred: &Array, target: &Array) -> Result<Array> {
    let n = pred.len() as f64;
    pred.zip_map(target, |p, t| 2.0 * (p - t) / n)
}

/// Mean absolute error.
pub fn l1(pred: &Array, target: &Array) -> Result<f64> {
    check_finite(pred, "l1 pred")?;
    check_finite(target, "l1 target")?;
    if pred.shape() != target.shape() {
        return Err(Error::shape("l1", pred.shape(), target.shape()));
    }
    let n = pred.len() as f64;
    Ok(pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(&p, &t)| (p - t).abs())
        .sum::<f64>()
        / n)
}

pub fn l1_backward(pred: &Array, target: &Array) -> Result<Array> {
    let n = pred.len() as f64;
    pred.zip_map(target, |p, t| {
        if p > t {
            1.0 / n
        } else if p < t {
            -1.0 / n
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        for c in [2usize, 5, 10] {
            let logits = Array::zeros(&[3, c]);
            let loss = cross_entropy_from_logits(&logits, &[0, 1 % c, 2 % c]).unwrap();
            assert!((loss - (c as f64).ln()).abs() < 1e-12, "C={c}: {loss}");
        }
    }

    #[test]
    fn mse_of_identical_is_zero() {
        let x = Array::from_vec(&[2, 2], vec![1., -2., 3., 4.]).unwrap();
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        assert_eq!(l1(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let p = Array::full(&[4], 0.5);
        let ones = Array::full(&[4], 1.0);
        let zeros = Array::zeros(&[4]);
        assert!((binary_cross_entropy(&p, &ones).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((binary_cross_entropy(&p, &zeros).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_rejected() {
        let bad = Array::from_vec(&[2], vec![1.0, f64::NAN]).unwrap();
        let ok = Array::zeros(&[2]);
        assert!(mse(&bad, &ok).is_err());
        assert!(l1(&bad, &ok).is_err());
        assert!(binary_cross_entropy(&bad, &ok).is_err());
    }

    #[test]
    fn bce_target_range_checked() {
        let p = Array::full(&[2], 0.5);
        let t = Array::from_vec(&[2], vec![0.2, 1.5]).unwrap();
        assert!(binary_cross_entropy(&p, &t).is_err());
    }
}
