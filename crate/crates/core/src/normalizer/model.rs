//! The stat-predicting network: per-variable embeddings feeding a shallow
//! MLP whose 4·d outputs regress transformed group statistics. A softplus
//! output head guarantees sigma ≥ 0 and z_max ≥ z_min for any input.

use crate::data::ContextVocabulary;
use crate::error::{Error, Result};
use crate::normalizer::NormStats;
use crate::numerics::activation::{softplus, softplus_inv};
use crate::numerics::{adam_step, AdamConfig, Activation, Array, EmbeddingTable, Mlp, Parameter, RngState};

pub const EMBED_DIM: usize = 8;
const HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct NormalizerHyper {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for NormalizerHyper {
    fn default() -> Self {
        NormalizerHyper {
            steps: 2500,
            lr: 3e-3,
            seed: 0,
        }
    }
}

/// Parametric normalizer predicting (mu, sigma, z_min, z_max) per channel
/// from integer context codes.
#[derive(Debug, Clone)]
pub struct NormalizerModel {
    pub embeddings: Vec<EmbeddingTable>,
    pub mlp: Mlp,
    pub channels: usize,
    pub delta: f64,
    /// Per-output standardization constants of the transformed targets.
    pub target_mean: Array,
    pub target_std: Array,
    pub cardinalities: Vec<usize>,
}

impl NormalizerModel {
    pub fn new(vocabulary: &ContextVocabulary, channels: usize, delta: f64, rng: &mut RngState) -> NormalizerModel {
        Self::with_hidden(vocabulary, channels, delta, HIDDEN, rng)
    }

    pub fn with_hidden(
        vocabulary: &ContextVocabulary,
        channels: usize,
        delta: f64,
        hidden: usize,
        rng: &mut RngState,
    ) -> NormalizerModel {
        let embeddings: Vec<EmbeddingTable> = vocabulary
            .variables()
            .iter()
            .map(|(name, cats)| {
                EmbeddingTable::new(&format!("norm.{name}"), cats.len(), EMBED_DIM, 0.1, rng)
            })
            .collect();
        let input = vocabulary.len() * EMBED_DIM;
        let out = 4 * channels;
        NormalizerModel {
            embeddings,
            mlp: Mlp::new("norm.mlp", &[input, hidden, hidden, out], Activation::LeakyRelu(0.2), rng),
            channels,
            delta,
            target_mean: Array::zeros(&[out]),
            target_std: Array::full(&[out], 1.0),
            cardinalities: vocabulary.cardinalities(),
        }
    }

    fn check_codes(&self, codes: &[usize]) -> Result<()> {
        if codes.len() != self.embeddings.len() {
            return Err(Error::Usage(format!(
                "normalizer expects {} context codes, got {}",
                self.embeddings.len(),
                codes.len()
            )));
        }
        for (i, (&c, emb)) in codes.iter().zip(&self.embeddings).enumerate() {
            if c >= emb.categories() {
                return Err(Error::IndexOutOfRange {
                    name: self.embeddings[i].var_name.clone(),
                    index: c,
                    len: emb.categories(),
                });
            }
        }
        Ok(())
    }

    /// Concatenated embeddings for a batch of code vectors: [B × N·EMBED_DIM].
    fn embed_batch(&self, batch: &[Vec<usize>]) -> Result<Array> {
        let n_vars = self.embeddings.len();
        let width = n_vars * EMBED_DIM;
        let mut out = Array::zeros(&[batch.len(), width]);
        for (bi, codes) in batch.iter().enumerate() {
            self.check_codes(codes)?;
            for (vi, emb) in self.embeddings.iter().enumerate() {
                let row = emb.lookup(codes[vi])?;
                let off = bi * width + vi * EMBED_DIM;
                out.values_mut()[off..off + EMBED_DIM].copy_from_slice(row.values());
            }
        }
        Ok(out)
    }

    /// Raw de-standardized network output for one code vector: [4·d] in the
    /// transformed-target space.
    pub fn forward_destandardized(&self, codes: &[usize]) -> Result<Array> {
        let eps = self.embed_batch(std::slice::from_ref(&codes.to_vec()))?;
        let raw = self.mlp.infer(&eps)?;
        let out = 4 * self.channels;
        Ok(Array::from_fn(&[out], |i| {
            raw.values()[i] * self.target_std.values()[i] + self.target_mean.values()[i]
        }))
    }

    /// Predicted statistics; finite with sigma ≥ 0 and z_max ≥ z_min for any
    /// valid code combination, seen or unseen.
    pub fn predict_stats(&self, codes: &[usize]) -> Result<NormStats> {
        let t = self.forward_destandardized(codes)?;
        let d = self.channels;
        let v = t.values();
        let mu = Array::from_vec(&[d], v[0..d].to_vec())?;
        let sigma = Array::from_fn(&[d], |i| softplus(v[d + i]));
        let z_min = Array::from_vec(&[d], v[2 * d..3 * d].to_vec())?;
        let z_max = Array::from_fn(&[d], |i| v[2 * d + i] + softplus(v[3 * d + i]));
        let stats = NormStats { mu, sigma, z_min, z_max };
        stats.validate()?;
        Ok(stats)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut ps: Vec<&mut Parameter> = self
            .embeddings
            .iter_mut()
            .map(|e| &mut e.table)
            .collect();
        ps.extend(self.mlp.params_mut());
        ps
    }
}

/// Transformed regression target for one stats entry:
/// [mu, softplus_inv(sigma), z_min, softplus_inv(z_max - z_min)] per channel.
fn transform_target(stats: &NormStats) -> Vec<f64> {
    let d = stats.channels();
    let mut t = Vec::with_capacity(4 * d);
    t.extend(stats.mu.values());
    t.extend(stats.sigma.values().iter().map(|&s| softplus_inv(s)));
    t.extend(stats.z_min.values());
    t.extend(
        stats
            .z_max
            .values()
            .iter()
            .zip(stats.z_min.values())
            .map(|(&hi, &lo)| softplus_inv(hi - lo)),
    );
    t
}

/// Trains the normalizer on (context codes, stats) pairs by full-batch Adam
/// over the standardized transformed targets. Returns the per-step loss log.
pub fn train_normalizer(
    model: &mut NormalizerModel,
    pairs: &[(Vec<usize>, NormStats)],
    hyper: &NormalizerHyper,
) -> Result<Vec<f64>> {
    let distinct: std::collections::BTreeSet<&Vec<usize>> = pairs.iter().map(|(c, _)| c).collect();
    if distinct.len() < 2 {
        return Err(Error::Usage(
            "normalizer training needs at least 2 distinct context combinations".into(),
        ));
    }
    let out = 4 * model.channels;
    let n = pairs.len();

    // Standardization constants over the transformed targets.
    let mut targets = Array::zeros(&[n, out]);
    for (i, (_, stats)) in pairs.iter().enumerate() {
        let t = transform_target(stats);
        targets.values_mut()[i * out..(i + 1) * out].copy_from_slice(&t);
    }
    for k in 0..out {
        let mean = (0..n).map(|i| targets.at2(i, k)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (targets.at2(i, k) - mean).powi(2)).sum::<f64>() / n as f64;
        model.target_mean.values_mut()[k] = mean;
        model.target_std.values_mut()[k] = var.sqrt() + model.delta;
    }
    let std_targets = Array::from_fn(&[n, out], |i| {
        let k = i % out;
        (targets.values()[i] - model.target_mean.values()[k]) / model.target_std.values()[k]
    });

    let codes: Vec<Vec<usize>> = pairs.iter().map(|(c, _)| c.clone()).collect();
    let code_indices: Vec<Vec<usize>> = (0..model.embeddings.len())
        .map(|vi| codes.iter().map(|c| c[vi]).collect())
        .collect();
    let cfg = AdamConfig::with_lr(hyper.lr);
    let mut losses = Vec::with_capacity(hyper.steps);
    for step in 0..hyper.steps {
        let eps = model.embed_batch(&codes)?;
        let (pred, cache) = model.mlp.forward(&eps)?;
        let loss = crate::numerics::loss::mse(&pred, &std_targets)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "normalizer loss became non-finite at step {step}"
            )));
        }
        losses.push(loss);
        let dpred = crate::numerics::loss::mse_backward(&pred, &std_targets)?;
        let deps = model.mlp.backward(&cache, &dpred)?;
        for (vi, emb) in model.embeddings.iter_mut().enumerate() {
            let width = deps.shape()[1];
            let mut slice = Array::zeros(&[n, EMBED_DIM]);
            for bi in 0..n {
                let off = bi * width + vi * EMBED_DIM;
                let dst = bi * EMBED_DIM;
                slice.values_mut()[dst..dst + EMBED_DIM]
                    .copy_from_slice(&deps.values()[off..off + EMBED_DIM]);
            }
            emb.backward_batch(&code_indices[vi], &slice)?;
        }
        adam_step(&mut model.params_mut(), &cfg)?;
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FauxSpec;
    use crate::normalizer::{compute_group_stats, DEFAULT_DELTA};

    fn faux_pairs() -> (ContextVocabulary, Vec<(Vec<usize>, NormStats)>) {
        let (ds, _) = crate::data::faux::generate_faux_dataset(&FauxSpec::desk_sparse(), 7).unwrap();
        let stats = compute_group_stats(&ds, DEFAULT_DELTA).unwrap();
        let pairs: Vec<(Vec<usize>, NormStats)> = stats.into_iter().collect();
        (ds.vocabulary, pairs)
    }

    #[test]
    fn zero_initialized_model_predicts_target_mean() {
        let (vocab, pairs) = faux_pairs();
        let mut rng = RngState::new(1);
        let mut model = NormalizerModel::new(&vocab, 1, DEFAULT_DELTA, &mut rng);
        // Zero every parameter: the network output is exactly zero.
        for p in model.params_mut() {
            for v in p.value.values_mut() {
                *v = 0.0;
            }
        }
        // Standardization constants as training would set them.
        let out = 4;
        let n = pairs.len();
        let mut mean = vec![0.0; out];
        for (_, s) in &pairs {
            for (k, v) in transform_target(s).iter().enumerate() {
                mean[k] += v / n as f64;
            }
        }
        let mut var = vec![0.0; out];
        for (_, s) in &pairs {
            for (k, v) in transform_target(s).iter().enumerate() {
                var[k] += (v - mean[k]).powi(2) / n as f64;
            }
        }
        for k in 0..out {
            model.target_mean.values_mut()[k] = mean[k];
            model.target_std.values_mut()[k] = var[k].sqrt() + DEFAULT_DELTA;
        }
        let raw = model.forward_destandardized(&pairs[0].0).unwrap();
        for k in 0..out {
            assert!((raw.values()[k] - mean[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn overfits_single_repeated_combination() {
        let (vocab, pairs) = faux_pairs();
        let single = vec![pairs[0].clone(), pairs[1].clone()];
        let mut rng = RngState::new(2);
        let mut model = NormalizerModel::new(&vocab, 1, DEFAULT_DELTA, &mut rng);
        let hyper = NormalizerHyper {
            steps: 2000,
            lr: 3e-3,
            seed: 2,
        };
        train_normalizer(&mut model, &single, &hyper).unwrap();
        for (codes, truth) in &single {
            let pred = model.predict_stats(codes).unwrap();
            for (p, t) in pred.mu.values().iter().zip(truth.mu.values()) {
                assert!((p - t).abs() / t.abs().max(1e-6) < 0.01, "mu {p} vs {t}");
            }
            for (p, t) in pred.sigma.values().iter().zip(truth.sigma.values()) {
                assert!((p - t).abs() / t.abs().max(1e-6) < 0.01, "sigma {p} vs {t}");
            }
            for (p, t) in pred.z_min.values().iter().zip(truth.z_min.values()) {
                assert!((p - t).abs() / t.abs().max(1e-6) < 0.01, "z_min {p} vs {t}");
            }
            for (p, t) in pred.z_max.values().iter().zip(truth.z_max.values()) {
                assert!((p - t).abs() / t.abs().max(1e-6) < 0.01, "z_max {p} vs {t}");
            }
        }
    }

    #[test]
    fn loss_non_increasing_over_windows() {
        let (vocab, pairs) = faux_pairs();
        let mut rng = RngState::new(3);
        let mut model = NormalizerModel::new(&vocab, 1, DEFAULT_DELTA, &mut rng);
        let hyper = NormalizerHyper {
            steps: 500,
            lr: 3e-3,
            seed: 3,
        };
        let losses = train_normalizer(&mut model, &pairs, &hyper).unwrap();
        let window = 100;
        let avg = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let mut prev = avg(&losses[0..window]);
        for w in 1..(losses.len() / window) {
            let cur = avg(&losses[w * window..(w + 1) * window]);
            assert!(cur <= prev * 1.001, "window {w}: {cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn predictions_deterministic_and_constrained() {
        let (vocab, pairs) = faux_pairs();
        let mut rng = RngState::new(4);
        let model = NormalizerModel::new(&vocab, 1, DEFAULT_DELTA, &mut rng);
        // Untrained model must still satisfy the head constraints on any input.
        for (codes, _) in pairs.iter().take(10) {
            let a = model.predict_stats(codes).unwrap();
            let b = model.predict_stats(codes).unwrap();
            assert_eq!(a, b);
            assert!(a.sigma.values()[0] >= 0.0);
            assert!(a.z_max.values()[0] >= a.z_min.values()[0]);
        }
    }

    #[test]
    fn out_of_vocabulary_code_rejected() {
        let (vocab, _) = faux_pairs();
        let mut rng = RngState::new(5);
        let model = NormalizerModel::new(&vocab, 1, DEFAULT_DELTA, &mut rng);
        let mut codes = vec![0; vocab.len()];
        codes[0] = vocab.cardinality(0); // one past the end
        assert!(model.predict_stats(&codes).is_err());
    }

    #[test]
    fn needs_two_distinct_combinations() {
        let (vocab, pairs) = faux_pairs();
        let mut rng = RngState::new(6);
        let mut model = NormalizerModel::new(&vocab, 1, DEFAULT_DELTA, &mut rng);
        let single = vec![pairs[0].clone(), pairs[0].clone()];
        assert!(train_normalizer(&mut model, &single, &NormalizerHyper::default()).is_err());
    }
}
