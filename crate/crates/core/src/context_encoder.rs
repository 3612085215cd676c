//! Context encoder: per-variable embeddings, a compression MLP producing the
//! conditioning vector h, and auxiliary reconstruction heads whose summed
//! cross entropy forms the context reconstruction loss.

use crate::data::ContextVocabulary;
use crate::error::{Error, Result};
use crate::numerics::loss::{cross_entropy_from_logits, cross_entropy_from_logits_backward};
use crate::numerics::{Activation, Array, EmbeddingTable, Mlp, MlpCache, Parameter, RngState};

pub const DEFAULT_EMBED_DIM: usize = 16;
pub const DEFAULT_H_DIM: usize = 16;
const COMPRESS_HIDDEN: usize = 128;
const HEAD_HIDDEN: usize = 64;

/// The compressed context embedding h.
#[derive(Debug, Clone)]
pub struct ContextEmbedding {
    pub h: Array,
}

/// Per-variable embedding tables, compression MLP, and one reconstruction
/// head per variable.
#[derive(Debug, Clone)]
pub struct ContextEncoderModel {
    pub embeddings: Vec<EmbeddingTable>,
    pub compress: Mlp,
    pub heads: Vec<Mlp>,
    pub embed_dim: usize,
    pub h_dim: usize,
}

/// Cached forward state of the embedding + compression path.
pub struct EncoderCache {
    codes: Vec<Vec<usize>>,
    compress_cache: MlpCache,
    pub h: Array,
}

/// Cached forward state of the reconstruction heads.
pub struct HeadsCache {
    pub logits: Vec<Array>,
    caches: Vec<MlpCache>,
}

impl ContextEncoderModel {
    pub fn new(
        vocabulary: &ContextVocabulary,
        embed_dim: usize,
        h_dim: usize,
        rng: &mut RngState,
    ) -> Result<ContextEncoderModel> {
        Self::with_widths(vocabulary, embed_dim, h_dim, COMPRESS_HIDDEN, HEAD_HIDDEN, rng)
    }

    pub fn with_widths(
        vocabulary: &ContextVocabulary,
        embed_dim: usize,
        h_dim: usize,
        compress_hidden: usize,
        head_hidden: usize,
        rng: &mut RngState,
    ) -> Result<ContextEncoderModel> {
        let n = vocabulary.len();
        if h_dim >= n * embed_dim {
            return Err(Error::Config(format!(
                "context embedding dim {h_dim} must be smaller than concatenated width {}",
                n * embed_dim
            )));
        }
        let embeddings: Vec<EmbeddingTable> = vocabulary
            .variables()
            .iter()
            .map(|(name, cats)| {
                EmbeddingTable::new(&format!("ctx.{name}"), cats.len(), embed_dim, 0.1, rng)
            })
            .collect();
        let compress = Mlp::new(
            "ctx.compress",
            &[n * embed_dim, compress_hidden, compress_hidden, h_dim],
            Activation::LeakyRelu(0.2),
            rng,
        );
        let heads = vocabulary
            .variables()
            .iter()
            .map(|(name, cats)| {
                Mlp::new(
                    &format!("ctx.head.{name}"),
                    &[h_dim, head_hidden, cats.len()],
                    Activation::LeakyRelu(0.2),
                    rng,
                )
            })
            .collect();
        Ok(ContextEncoderModel {
            embeddings,
            compress,
            heads,
            embed_dim,
            h_dim,
        })
    }

    pub fn n_variables(&self) -> usize {
        self.embeddings.len()
    }

    fn check_codes(&self, codes: &[usize]) -> Result<()> {
        if codes.len() != self.n_variables() {
            return Err(Error::Usage(format!(
                "expected {} context codes, got {}",
                self.n_variables(),
                codes.len()
            )));
        }
        for (emb, &c) in self.embeddings.iter().zip(codes) {
            if c >= emb.categories() {
                return Err(Error::IndexOutOfRange {
                    name: emb.var_name.clone(),
                    index: c,
                    len: emb.categories(),
                });
            }
        }
        Ok(())
    }

    /// Concatenated per-variable embeddings: [B × N·D].
    pub fn embed_batch(&self, batch: &[Vec<usize>]) -> Result<Array> {
        let n = self.n_variables();
        let width = n * self.embed_dim;
        let mut out = Array::zeros(&[batch.len(), width]);
        for (bi, codes) in batch.iter().enumerate() {
            self.check_codes(codes)?;
            for (vi, emb) in self.embeddings.iter().enumerate() {
                let row = emb.lookup(codes[vi])?;
                let off = bi * width + vi * self.embed_dim;
                out.values_mut()[off..off + self.embed_dim].copy_from_slice(row.values());
            }
        }
        Ok(out)
    }

    /// Forward pass over a batch of code vectors, caching for backward.
    pub fn forward_batch(&self, batch: &[Vec<usize>]) -> Result<EncoderCache> {
        let eps = self.embed_batch(batch)?;
        let (h, compress_cache) = self.compress.forward(&eps)?;
        Ok(EncoderCache {
            codes: batch.to_vec(),
            compress_cache,
            h,
        })
    }

    /// Deterministic single-context encoding.
    pub fn encode(&self, codes: &[usize]) -> Result<ContextEmbedding> {
        let eps = self.embed_batch(std::slice::from_ref(&codes.to_vec()))?;
        let h = self.compress.infer(&eps)?;
        Ok(ContextEmbedding {
            h: h.reshape(&[self.h_dim])?,
        })
    }

    /// Backward through compression MLP and embedding tables given dL/dh.
    pub fn backward_batch(&mut self, cache: &EncoderCache, dh: &Array) -> Result<()> {
        let deps = self.compress.backward(&cache.compress_cache, dh)?;
        let n = self.n_variables();
        let width = n * self.embed_dim;
        let b = cache.codes.len();
        for (vi, emb) in self.embeddings.iter_mut().enumerate() {
            let indices: Vec<usize> = cache.codes.iter().map(|c| c[vi]).collect();
            let mut slice = Array::zeros(&[b, self.embed_dim]);
            for bi in 0..b {
                let off = bi * width + vi * self.embed_dim;
                let dst = bi * self.embed_dim;
                slice.values_mut()[dst..dst + self.embed_dim]
                    .copy_from_slice(&deps.values()[off..off + self.embed_dim]);
            }
            emb.backward_batch(&indices, &slice)?;
        }
        Ok(())
    }

    /// Runs every reconstruction head on a batch of embeddings [B × d_h].
    pub fn heads_forward(&self, h: &Array) -> Result<HeadsCache> {
        let mut logits = Vec::with_capacity(self.heads.len());
        let mut caches = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (l, c) = head.forward(h)?;
            logits.push(l);
            caches.push(c);
        }
        Ok(HeadsCache { logits, caches })
    }

    /// Logit vectors for a single embedding, one per variable.
    pub fn reconstruct(&self, h: &Array) -> Result<Vec<Array>> {
        let hb = h.reshape(&[1, self.h_dim])?;
        let cache = self.heads_forward(&hb)?;
        cache
            .logits
            .into_iter()
            .map(|l| {
                let w = l.shape()[1];
                l.reshape(&[w])
            })
            .collect()
    }

    /// Backward through the heads with upstream gradients scaled by `weight`
    /// (the aux-loss coefficient). Accumulates head parameter gradients and
    /// returns the summed gradient w.r.t. h.
    pub fn heads_backward(
        &mut self,
        cache: &HeadsCache,
        dlogits: &[Array],
        weight: f64,
    ) -> Result<Array> {
        let b = cache.logits[0].shape()[0];
        let mut dh = Array::zeros(&[b, self.h_dim]);
        for (vi, head) in self.heads.iter_mut().enumerate() {
            let scaled = dlogits[vi].scale(weight);
            let dhi = head.backward(&cache.caches[vi], &scaled)?;
            dh = dh.add(&dhi)?;
        }
        Ok(dh)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut ps: Vec<&mut Parameter> = self
            .embeddings
            .iter_mut()
            .map(|e| &mut e.table)
            .collect();
        ps.extend(self.compress.params_mut());
        for head in &mut self.heads {
            ps.extend(head.params_mut());
        }
        ps
    }

    /// Generator-side parameters only (tables + compression MLP); the heads
    /// are trained exclusively through the aux loss.
    pub fn trunk_params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut ps: Vec<&mut Parameter> = self
            .embeddings
            .iter_mut()
            .map(|e| &mut e.table)
            .collect();
        ps.extend(self.compress.params_mut());
        ps
    }
}

/// Context reconstruction loss: sum over variables of mean-over-batch cross
/// entropy of each head's logits against the true codes.
pub fn aux_loss(logits: &[Array], batch: &[Vec<usize>]) -> Result<f64> {
    if logits.len() != batch.first().map(|c| c.len()).unwrap_or(0) {
        return Err(Error::Usage(format!(
            "aux_loss: {} heads vs {} context variables",
            logits.len(),
            batch.first().map(|c| c.len()).unwrap_or(0)
        )));
    }
    let mut total = 0.0;
    for (vi, l) in logits.iter().enumerate() {
        let targets: Vec<usize> = batch.iter().map(|c| c[vi]).collect();
        total += cross_entropy_from_logits(l, &targets)?;
    }
    Ok(total)
}

/// Per-head upstream gradients of [`aux_loss`].
pub fn aux_loss_backward(logits: &[Array], batch: &[Vec<usize>]) -> Result<Vec<Array>> {
    logits
        .iter()
        .enumerate()
        .map(|(vi, l)| {
            let targets: Vec<usize> = batch.iter().map(|c| c[vi]).collect();
            cross_entropy_from_logits_backward(l, &targets)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{fd_gradient, relative_error};

    fn nine_var_vocab() -> ContextVocabulary {
        let vars: Vec<(String, Vec<String>)> = (0..9)
            .map(|i| {
                let card = 2 + (i % 3);
                (
                    format!("v{i}"),
                    (0..card).map(|c| format!("c{c}")).collect(),
                )
            })
            .collect();
        ContextVocabulary::from_parts(vars).unwrap()
    }

    #[test]
    fn concatenated_embedding_width_is_n_times_d() {
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(1);
        let model = ContextEncoderModel::new(&vocab, 16, 16, &mut rng).unwrap();
        let codes = vec![vec![0usize; 9]];
        let eps = model.embed_batch(&codes).unwrap();
        assert_eq!(eps.shape(), &[1, 144]);
    }

    #[test]
    fn zero_initialized_model_encodes_to_zero() {
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(2);
        let mut model = ContextEncoderModel::new(&vocab, 8, 4, &mut rng).unwrap();
        for p in model.params_mut() {
            for v in p.value.values_mut() {
                *v = 0.0;
            }
        }
        let h = model.encode(&vec![0; 9]).unwrap();
        assert!(h.h.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distinct_codes_give_distinct_embeddings() {
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(3);
        let model = ContextEncoderModel::new(&vocab, 8, 4, &mut rng).unwrap();
        let a = model.encode(&[0, 0, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let b = model.encode(&[1, 0, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let delta: f64 = a
            .h
            .values()
            .iter()
            .zip(b.h.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(delta > 0.0);
    }

    #[test]
    fn head_widths_match_category_counts() {
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(4);
        let model = ContextEncoderModel::new(&vocab, 8, 4, &mut rng).unwrap();
        let h = model.encode(&vec![0; 9]).unwrap();
        let logits = model.reconstruct(&h.h).unwrap();
        for (vi, l) in logits.iter().enumerate() {
            assert_eq!(l.len(), vocab.cardinality(vi));
        }
    }

    #[test]
    fn uniform_logits_sum_to_ln_cardinalities() {
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(5);
        let mut model = ContextEncoderModel::new(&vocab, 8, 4, &mut rng).unwrap();
        for head in &mut model.heads {
            for p in head.params_mut() {
                for v in p.value.values_mut() {
                    *v = 0.0;
                }
            }
        }
        let batch = vec![vec![0usize; 9], vec![1usize; 9]];
        let cache = model.forward_batch(&batch).unwrap();
        let heads = model.heads_forward(&cache.h).unwrap();
        let loss = aux_loss(&heads.logits, &batch).unwrap();
        let expect: f64 = (0..9).map(|vi| (vocab.cardinality(vi) as f64).ln()).sum();
        assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
    }

    #[test]
    fn saturated_correct_logits_give_near_zero_loss() {
        let vocab = nine_var_vocab();
        let batch = vec![vec![1usize; 9]];
        let logits: Vec<Array> = (0..9)
            .map(|vi| {
                Array::from_fn(&[1, vocab.cardinality(vi)], |j| if j == 1 { 100.0 } else { 0.0 })
            })
            .collect();
        let loss = aux_loss(&logits, &batch).unwrap();
        assert!(loss >= 0.0 && loss < 1e-9, "{loss}");
    }

    #[test]
    fn aux_gradient_wrt_h_matches_fd() {
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(6);
        let mut model = ContextEncoderModel::new(&vocab, 8, 6, &mut rng).unwrap();
        let batch = vec![vec![0usize; 9], vec![1usize; 9], vec![0, 1, 0, 1, 0, 1, 0, 1, 0]];
        let h = Array::from_fn(&[3, 6], |_| rng.normal());
        let cache = model.heads_forward(&h).unwrap();
        let dlogits = aux_loss_backward(&cache.logits, &batch).unwrap();
        let dh = model.heads_backward(&cache, &dlogits, 1.0).unwrap();
        let probe = model.clone();
        let batch2 = batch.clone();
        let fd = fd_gradient(
            &mut |hp: &Array| {
                let c = probe.heads_forward(hp).unwrap();
                aux_loss(&c.logits, &batch2).unwrap()
            },
            &h,
            1e-5,
        );
        assert!(relative_error(&dh, &fd) < 1e-5);
    }

    #[test]
    fn trained_heads_recover_codes() {
        // Train embeddings + compression + heads on the aux loss alone; the
        // reconstruction accuracy over all training contexts must reach 95%.
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(7);
        let mut model = ContextEncoderModel::new(&vocab, 8, 12, &mut rng).unwrap();
        let mut batch = Vec::new();
        for s in 0..40 {
            let codes: Vec<usize> = (0..9).map(|vi| (s + vi) % vocab.cardinality(vi)).collect();
            batch.push(codes);
        }
        batch.sort();
        batch.dedup();
        let cfg = crate::numerics::AdamConfig::with_lr(3e-3);
        for _ in 0..400 {
            let cache = model.forward_batch(&batch).unwrap();
            let heads = model.heads_forward(&cache.h).unwrap();
            let dlogits = aux_loss_backward(&heads.logits, &batch).unwrap();
            let dh = model.heads_backward(&heads, &dlogits, 1.0).unwrap();
            model.backward_batch(&cache, &dh).unwrap();
            crate::numerics::adam_step(&mut model.params_mut(), &cfg).unwrap();
        }
        let cache = model.forward_batch(&batch).unwrap();
        let heads = model.heads_forward(&cache.h).unwrap();
        let mut correct = 0usize;
        let mut total = 0usize;
        for (vi, l) in heads.logits.iter().enumerate() {
            let c = l.shape()[1];
            for (bi, codes) in batch.iter().enumerate() {
                let row = &l.values()[bi * c..(bi + 1) * c];
                let argmax = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                if argmax == codes[vi] {
                    correct += 1;
                }
                total += 1;
            }
        }
        let acc = correct as f64 / total as f64;
        assert!(acc >= 0.95, "reconstruction accuracy {acc}");
    }

    #[test]
    fn invalid_code_rejected() {
        let vocab = nine_var_vocab();
        let mut rng = RngState::new(8);
        let model = ContextEncoderModel::new(&vocab, 8, 4, &mut rng).unwrap();
        let mut codes = vec![0usize; 9];
        codes[2] = 99;
        assert!(model.encode(&codes).is_err());
    }
}
