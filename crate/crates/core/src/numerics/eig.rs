use crate::error::{Error, Result};
use crate::numerics::array::Array;

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of a [n × n] matrix. The input is symmetrized internally; it must
/// already be symmetric within 1e-8.
pub fn symmetric_eig(s: &Array) -> Result<(Vec<f64>, Array)> {
    if s.shape().len() != 2 || s.shape()[0] != s.shape()[1] {
        return Err(Error::Dimension(format!(
            "symmetric_eig expects a square matrix, got {:?}",
            s.shape()
        )));
    }
    let n = s.shape()[0];
    if n == 0 {
        return Err(Error::Dimension("symmetric_eig: empty matrix".into()));
    }
    let scale = s.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (s.at2(i, j) - s.at2(j, i)).abs() > 1e-8 * scale {
                return Err(Error::Usage(format!(
                    "symmetric_eig: matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }

    // Work on the symmetrized copy.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (s.at2(i, j) + s.at2(j, i));
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let off = |a: &[f64]| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += a[i * n + j] * a[i * n + j];
                }
            }
        }
        sum.sqrt()
    };

    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * frob;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_rot = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s_rot * akq;
                    a[k * n + q] = s_rot * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s_rot * aqk;
                    a[q * n + k] = s_rot * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s_rot * vkq;
                    v[k * n + q] = s_rot * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off(&a) > tol {
        return Err(Error::Eig(format!(
            "no convergence after {MAX_SWEEPS} sweeps (off-diagonal {:.3e})",
            off(&a)
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Array::zeros(&[n, n]);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set2(row, new_col, v[row * n + old_col]);
        }
    }
    Ok((eigenvalues, vectors))
}

/// Symmetric square root via eigendecomposition; negative eigenvalues are
/// clamped to zero.
pub fn symmetric_sqrt(s: &Array) -> Result<Array> {
    let n = s.shape()[0];
    let (vals, vecs) = symmetric_eig(s)?;
    let mut out = Array::zeros(&[n, n]);
    for k in 0..n {
        let r = vals[k].max(0.0).sqrt();
        if r == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let v = out.at2(i, j) + r * vecs.at2(i, k) * vecs.at2(j, k);
                out.set2(i, j, v);
            }
        }
    }
    Ok(out)
}
