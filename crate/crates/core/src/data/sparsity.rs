//! Proxy labels for context sparsity: the union of a frequency rule over
//! context combinations and a clustering rule over per-profile summary
//! features.

use crate::data::{kmeans::kmeans, Dataset};
use crate::error::{Error, Result};
use crate::numerics::Array;

#[derive(Debug, Clone, Copy)]
pub struct SparsityConfig {
    /// Combinations outside the smallest prefix covering this fraction of
    /// profiles (ranked by count, descending) are frequency-sparse.
    pub freq_percentile: f64,
    /// The smallest clusters covering at most this fraction of profiles are
    /// cluster-sparse.
    pub cluster_fraction: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        SparsityConfig {
            freq_percentile: 0.90,
            cluster_fraction: 0.10,
            k: 10,
            seed: 0,
        }
    }
}

/// Computes the per-profile sparsity mask: frequency-sparse ∪ cluster-sparse.
pub fn label_sparsity(dataset: &Dataset, cfg: &SparsityConfig) -> Result<Vec<bool>> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot label sparsity of an empty dataset".into()));
    }
    let freq = frequency_sparse(dataset, cfg.freq_percentile);
    let cluster = cluster_sparse(dataset, cfg)?;
    Ok(freq.iter().zip(&cluster).map(|(&a, &b)| a || b).collect())
}

/// Frequency rule: rank context combinations by count descending; a
/// combination is non-sparse iff it lies within the smallest prefix covering
/// `percentile` of all profiles.
pub fn frequency_sparse(dataset: &Dataset, percentile: f64) -> Vec<bool> {
    let counts = dataset.context_counts();
    let n = dataset.len();
    let mut ranked: Vec<(&Vec<usize>, usize)> = counts.iter().map(|(k, &c)| (k, c)).collect();
    // Descending by count; ties broken by the code vector for determinism.
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let threshold = percentile * n as f64;
    let mut covered = 0usize;
    let mut non_sparse: Vec<&Vec<usize>> = Vec::new();
    for (combo, count) in &ranked {
        if covered as f64 >= threshold {
            break;
        }
        non_sparse.push(combo);
        covered += count;
    }
    dataset
        .profiles
        .iter()
        .map(|p| !non_sparse.iter().any(|c| **c == p.context_codes))
        .collect()
}

/// Clustering rule: k-means on standardized per-profile features (mean, std,
/// min, max per channel); the smallest clusters whose member counts fit
/// within `cluster_fraction` of all profiles are sparse.
pub fn cluster_sparse(dataset: &Dataset, cfg: &SparsityConfig) -> Result<Vec<bool>> {
    let n = dataset.len();
    if cfg.k > n {
        return Err(Error::Usage(format!(
            "cluster sparsity: k={} exceeds profile count {n}",
            cfg.k
        )));
    }
    let feats = profile_features(dataset);
    let standardized = standardize_columns(&feats);
    let result = kmeans(&standardized, cfg.k, cfg.seed, 200)?;
    let mut sizes = vec![0usize; cfg.k];
    for &a in &result.assignments {
        sizes[a] += 1;
    }
    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by_key(|&c| (sizes[c], c));
    let budget = (cfg.cluster_fraction * n as f64).floor() as usize;
    let mut sparse_clusters = vec![false; cfg.k];
    let mut used = 0usize;
    for &c in &order {
        if sizes[c] == 0 {
            continue;
        }
        if used + sizes[c] > budget {
            break;
        }
        sparse_clusters[c] = true;
        used += sizes[c];
    }
    Ok(result.assignments.iter().map(|&a| sparse_clusters[a]).collect())
}

/// Summary features per profile: mean, std, min, max per channel.
pub fn profile_features(dataset: &Dataset) -> Array {
    let d = dataset.channels();
    let t = dataset.t_len();
    let f = 4 * d;
    let mut out = Array::zeros(&[dataset.len(), f]);
    for (i, p) in dataset.profiles.iter().enumerate() {
        for ch in 0..d {
            let vals: Vec<f64> = (0..t).map(|ti| p.series.at2(ti, ch)).collect();
            let mean = vals.iter().sum::<f64>() / t as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            out.set2(i, ch * 4, mean);
            out.set2(i, ch * 4 + 1, var.sqrt());
            out.set2(i, ch * 4 + 2, min);
            out.set2(i, ch * 4 + 3, max);
        }
    }
    out
}

fn standardize_columns(a: &Array) -> Array {
    let (n, f) = (a.shape()[0], a.shape()[1]);
    let mut out = a.clone();
    for j in 0..f {
        let mean = (0..n).map(|i| a.at2(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (a.at2(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        for i in 0..n {
            let v = (a.at2(i, j) - mean) / (std + 1e-12);
            out.set2(i, j, v);
        }
    }
    out
}
