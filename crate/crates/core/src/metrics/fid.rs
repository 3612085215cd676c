//! Fréchet distance between the Gaussian moment summaries of two embedding
//! sets. The matrix square roots run through the symmetric eigensolver.

use crate::error::{Error, Result};
use crate::numerics::{matmul, symmetric_eig, symmetric_sqrt, Array};

const RIDGE: f64 = 1e-6;

/// Embedding vectors with their mean and (population) covariance.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    pub vectors: Array,
    pub mean: Array,
    pub covariance: Array,
}

impl EmbeddingSet {
    /// Moments of an [n × f] matrix of embedding vectors.
    pub fn from_vectors(vectors: Array) -> Result<EmbeddingSet> {
        if vectors.shape().len() != 2 || vectors.shape()[0] == 0 {
            return Err(Error::Dimension(format!(
                "embedding set expects non-empty [n × f], got {:?}",
                vectors.shape()
            )));
        }
        let (n, f) = (vectors.shape()[0], vectors.shape()[1]);
        let mut mean = Array::zeros(&[f]);
        for i in 0..n {
            for j in 0..f {
                mean.values_mut()[j] += vectors.at2(i, j) / n as f64;
            }
        }
        let mut covariance = Array::zeros(&[f, f]);
        for i in 0..n {
            for a in 0..f {
                let da = vectors.at2(i, a) - mean.values()[a];
                for b in a..f {
                    let db = vectors.at2(i, b) - mean.values()[b];
                    let v = covariance.at2(a, b) + da * db / n as f64;
                    covariance.set2(a, b, v);
                }
            }
        }
        for a in 0..f {
            for b in 0..a {
                let v = covariance.at2(b, a);
                covariance.set2(a, b, v);
            }
        }
        Ok(EmbeddingSet {
            vectors,
            mean,
            covariance,
        })
    }

    /// Builds a set directly from moments (e.g. closed-form test cases).
    pub fn from_moments(mean: Array, covariance: Array) -> EmbeddingSet {
        EmbeddingSet {
            vectors: Array::zeros(&[0, mean.len()]),
            mean,
            covariance,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn ridge(cov: &Array) -> Array {
    let f = cov.shape()[0];
    let mut out = cov.clone();
    for i in 0..f {
        let v = out.at2(i, i) + RIDGE;
        out.set2(i, i, v);
    }
    out
}

/// ‖μ_r − μ_g‖² + tr(Σ_r) + tr(Σ_g) − 2·Σ_k √λ_k, where λ_k are the
/// eigenvalues of Σ_r^{1/2} Σ_g Σ_r^{1/2} (negative eigenvalues clamped).
pub fn context_fid(real: &EmbeddingSet, syn: &EmbeddingSet) -> Result<f64> {
    if real.dim() != syn.dim() {
        return Err(Error::shape("context_fid dims", real.mean.shape(), syn.mean.shape()));
    }
    let f = real.dim();
    let sr = ridge(&real.covariance);
    let sg = ridge(&syn.covariance);
    for (name, cov) in [("real", &sr), ("synthetic", &sg)] {
        let (vals, _) = symmetric_eig(cov)?;
        let scale = vals[0].abs().max(1.0);
        if vals[f - 1] < -1e-8 * scale {
            return Err(Error::Data(format!(
                "{name} covariance is not PSD after ridge (min eigenvalue {:.3e})",
                vals[f - 1]
            )));
        }
    }
    let mean_term: f64 = real
        .mean
        .values()
        .iter()
        .zip(syn.mean.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let trace = |m: &Array| -> f64 { (0..f).map(|i| m.at2(i, i)).sum() };
    let sr_half = symmetric_sqrt(&sr)?;
    let inner = matmul(&matmul(&sr_half, &sg)?, &sr_half)?;
    // Symmetrize against round-off before the eigensolve.
    let mut sym = Array::zeros(&[f, f]);
    for i in 0..f {
        for j in 0..f {
            sym.set2(i, j, 0.5 * (inner.at2(i, j) + inner.at2(j, i)));
        }
    }
    let (vals, _) = symmetric_eig(&sym)?;
    let sqrt_trace: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok(mean_term + trace(&sr) + trace(&sg) - 2.0 * sqrt_trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn identical_sets_score_zero() {
        let mut rng = RngState::new(1);
        let vectors = Array::from_fn(&[40, 6], |_| rng.normal());
        let a = EmbeddingSet::from_vectors(vectors.clone()).unwrap();
        let b = EmbeddingSet::from_vectors(vectors).unwrap();
        let v = context_fid(&a, &b).unwrap();
        assert!(v.abs() < 1e-6, "{v}");
    }

    #[test]
    fn one_dimensional_closed_form() {
        let a = EmbeddingSet::from_moments(Array::scalar(0.0), Array::from_vec(&[1, 1], vec![1.0]).unwrap());
        let b = EmbeddingSet::from_moments(Array::scalar(1.0), Array::from_vec(&[1, 1], vec![1.0]).unwrap());
        let v = context_fid(&a, &b).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn commuting_diagonal_gaussians_match_closed_form() {
        // For diagonal covariances the Fréchet distance decomposes per axis:
        // Σ (μr − μg)² + (√σr − √σg)².
        let mu_r = Array::from_vec(&[2], vec![0.5, -1.0]).unwrap();
        let mu_g = Array::from_vec(&[2], vec![-0.25, 2.0]).unwrap();
        let var_r = [2.0, 0.5];
        let var_g = [1.0, 3.0];
        let cov_r = Array::from_vec(&[2, 2], vec![var_r[0], 0.0, 0.0, var_r[1]]).unwrap();
        let cov_g = Array::from_vec(&[2, 2], vec![var_g[0], 0.0, 0.0, var_g[1]]).unwrap();
        let a = EmbeddingSet::from_moments(mu_r.clone(), cov_r);
        let b = EmbeddingSet::from_moments(mu_g.clone(), cov_g);
        let got = context_fid(&a, &b).unwrap();
        let mut expect = 0.0;
        for i in 0..2 {
            expect += (mu_r.values()[i] - mu_g.values()[i]).powi(2);
            expect += ((var_r[i] + RIDGE).sqrt() - (var_g[i] + RIDGE).sqrt()).powi(2);
        }
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn invariant_under_joint_rotation() {
        let mut rng = RngState::new(5);
        let a_vec = Array::from_fn(&[50, 3], |_| rng.normal() * 1.5);
        let b_vec = Array::from_fn(&[45, 3], |_| rng.normal() + 0.4);
        let base = context_fid(
            &EmbeddingSet::from_vectors(a_vec.clone()).unwrap(),
            &EmbeddingSet::from_vectors(b_vec.clone()).unwrap(),
        )
        .unwrap();
        // An orthogonal rotation from the QR of a random matrix (via Jacobi on MMᵀ).
        let angle: f64 = 0.83;
        let (c, s) = (angle.cos(), angle.sin());
        let rot = Array::from_vec(&[3, 3], vec![c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let rotate = |v: &Array| -> Array {
            matmul(v, &rot).unwrap()
        };
        let rotated = context_fid(
            &EmbeddingSet::from_vectors(rotate(&a_vec)).unwrap(),
            &EmbeddingSet::from_vectors(rotate(&b_vec)).unwrap(),
        )
        .unwrap();
        assert!((base - rotated).abs() < 1e-6, "{base} vs {rotated}");
    }

    #[test]
    fn non_negative_on_random_pairs() {
        let mut rng = RngState::new(9);
        for _ in 0..10 {
            let a = EmbeddingSet::from_vectors(Array::from_fn(&[30, 4], |_| rng.normal())).unwrap();
            let b =
                EmbeddingSet::from_vectors(Array::from_fn(&[28, 4], |_| rng.normal() * 2.0 + 1.0))
                    .unwrap();
            let v = context_fid(&a, &b).unwrap();
            assert!(v >= -1e-9, "{v}");
        }
    }
}
