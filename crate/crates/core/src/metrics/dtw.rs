//! Multivariate dynamic time warping distance over equal-length series.

use crate::error::{Error, Result};
use crate::numerics::Array;

/// Squared Euclidean per-step cost across channels.
fn step_cost(a: &Array, i: usize, b: &Array, j: usize) -> f64 {
    let d = a.shape()[1];
    let mut acc = 0.0;
    for ch in 0..d {
        let diff = a.at2(i, ch) - b.at2(j, ch);
        acc += diff * diff;
    }
    acc
}

/// O(T²) dynamic program over monotone alignment paths with step set
/// {(1,0), (0,1), (1,1)}.
pub fn mdtwd(xg: &Array, xr: &Array) -> Result<f64> {
    if xg.shape().len() != 2 || xr.shape().len() != 2 {
        return Err(Error::Dimension("mdtwd expects [T × d] series".into()));
    }
    if xg.shape() != xr.shape() {
        return Err(Error::shape("mdtwd series", xg.shape(), xr.shape()));
    }
    let t = xg.shape()[0];
    if t == 0 {
        return Err(Error::Dimension("mdtwd: empty series".into()));
    }
    let mut prev = vec![f64::INFINITY; t + 1];
    let mut cur = vec![f64::INFINITY; t + 1];
    prev[0] = 0.0;
    for i in 1..=t {
        cur[0] = f64::INFINITY;
        for j in 1..=t {
            let cost = step_cost(xg, i - 1, xr, j - 1);
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[t])
}

/// Diagonal-path upper bound: Σ_t d(x_t^g, x_t^r).
pub fn diagonal_cost(xg: &Array, xr: &Array) -> f64 {
    (0..xg.shape()[0]).map(|t| step_cost(xg, t, xr, t)).sum()
}

/// Mean MDTWD over synthetic profiles, each paired with the nearest (by MSE)
/// real series sharing its full context combination. Returns the average and
/// the number of synthetic series skipped for lack of a same-context real.
pub fn mdtwd_avg(pairs: &[(&Array, &Array)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Data("mdtwd_avg over an empty pairing".into()));
    }
    let mut total = 0.0;
    for (syn, real) in pairs {
        total += mdtwd(syn, real)?;
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    /// Exhaustive enumeration over all monotone alignment paths.
    fn brute_force(xg: &Array, xr: &Array) -> f64 {
        fn go(xg: &Array, xr: &Array, i: usize, j: usize) -> f64 {
            let t = xg.shape()[0];
            let cost = {
                let d = xg.shape()[1];
                let mut acc = 0.0;
                for ch in 0..d {
                    let diff = xg.at2(i, ch) - xr.at2(j, ch);
                    acc += diff * diff;
                }
                acc
            };
            if i == t - 1 && j == t - 1 {
                return cost;
            }
            let mut best = f64::INFINITY;
            if i + 1 < t {
                best = best.min(go(xg, xr, i + 1, j));
            }
            if j + 1 < t {
                best = best.min(go(xg, xr, i, j + 1));
            }
            if i + 1 < t && j + 1 < t {
                best = best.min(go(xg, xr, i + 1, j + 1));
            }
            cost + best
        }
        go(xg, xr, 0, 0)
    }

    #[test]
    fn identical_series_distance_zero() {
        let x = Array::from_vec(&[4, 1], vec![1.0, 2.0, 0.5, -1.0]).unwrap();
        assert_eq!(mdtwd(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn two_step_case_matches_enumeration() {
        let x = Array::from_vec(&[2, 1], vec![0.0, 1.0]).unwrap();
        let y = Array::from_vec(&[2, 1], vec![1.0, 0.0]).unwrap();
        let dp = mdtwd(&x, &y).unwrap();
        let oracle = brute_force(&x, &y);
        assert_eq!(dp, oracle);
        // Forced arithmetic: best path cost is 2 (1 + 0 + 1 via warp or 1+1 diag).
        assert!((dp - 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_small_cases_match_brute_force_exactly() {
        let mut rng = RngState::new(99);
        for trial in 0..200 {
            let t = 1 + rng.below(5);
            let d = 1 + rng.below(2);
            let a = Array::from_fn(&[t, d], |_| rng.normal());
            let b = Array::from_fn(&[t, d], |_| rng.normal());
            let dp = mdtwd(&a, &b).unwrap();
            let oracle = brute_force(&a, &b);
            assert!((dp - oracle).abs() < 1e-9, "trial {trial}: {dp} vs {oracle}");
        }
    }

    #[test]
    fn symmetric_and_bounded_by_diagonal() {
        let mut rng = RngState::new(7);
        for _ in 0..50 {
            let a = Array::from_fn(&[6, 2], |_| rng.normal());
            let b = Array::from_fn(&[6, 2], |_| rng.normal());
            let ab = mdtwd(&a, &b).unwrap();
            let ba = mdtwd(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!(ab <= diagonal_cost(&a, &b) + 1e-12);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = Array::zeros(&[4, 1]);
        let b = Array::zeros(&[5, 1]);
        assert!(mdtwd(&a, &b).is_err());
    }

    #[test]
    fn average_over_hand_built_pairs() {
        let a1 = Array::from_vec(&[2, 1], vec![0.0, 1.0]).unwrap();
        let b1 = Array::from_vec(&[2, 1], vec![1.0, 0.0]).unwrap();
        let a2 = Array::from_vec(&[2, 1], vec![2.0, 2.0]).unwrap();
        let b2 = Array::from_vec(&[2, 1], vec![2.0, 2.0]).unwrap();
        let a3 = Array::from_vec(&[2, 1], vec![0.0, 0.0]).unwrap();
        let b3 = Array::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap();
        let expected = (brute_force(&a1, &b1) + brute_force(&a2, &b2) + brute_force(&a3, &b3)) / 3.0;
        let avg = mdtwd_avg(&[(&a1, &b1), (&a2, &b2), (&a3, &b3)]).unwrap();
        assert!((avg - expected).abs() < 1e-12);
        let single = mdtwd_avg(&[(&a1, &b1)]).unwrap();
        assert_eq!(single, mdtwd(&a1, &b1).unwrap());
    }
}
