//! Fidelity and utility metric suite: MDTWD, MMD, BMSE, Context-FID over a
//! deterministic feature embedding, discriminative score, and predictive
//! score, each computed overall and over the sparse-labeled subset.

pub mod bmse;
pub mod dtw;
pub mod features;
pub mod fid;
pub mod mmd;
pub mod scores;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Array;

pub use bmse::{bmse, Band, BmseMode};
pub use dtw::{mdtwd, mdtwd_avg};
pub use features::feature_embed;
pub use fid::{context_fid, EmbeddingSet};
pub use mmd::{mmd, Bandwidth};
pub use scores::{discriminative_score, predictive_score, FORECAST_WINDOW};

/// One metric block; utility scores are null when a subset is too small to
/// train them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricValues {
    pub context_fid: f64,
    pub bmse: f64,
    pub mmd: f64,
    pub mdtwd_avg: f64,
    pub discriminative_score: Option<f64>,
    pub predictive_score: Option<f64>,
}

/// All metric values for one (real, synthetic) dataset pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub overall: MetricValues,
    /// Null when no profile carries a sparsity label.
    pub sparse_only: Option<MetricValues>,
    pub real_count: usize,
    pub synthetic_count: usize,
    pub sparse_real_count: usize,
    pub sparse_synthetic_count: usize,
    /// Synthetic series skipped for lack of a same-context real (pairing and
    /// band construction).
    pub unmatched_synthetic: usize,
    pub seed: u64,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<MetricReport> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("bad metric report JSON: {e}")))
    }
}

struct Subset<'a> {
    real: Vec<&'a crate::data::LoadProfile>,
    syn: Vec<&'a crate::data::LoadProfile>,
}

/// Every metric over one subset of profiles. The caller guarantees matched
/// vocabularies.
fn compute_values(subset: &Subset, seed: u64, unmatched: &mut usize) -> Result<MetricValues> {
    if subset.real.is_empty() || subset.syn.is_empty() {
        return Err(Error::Data("metric subset is empty".into()));
    }
    // Context-FID over the deterministic feature embedding.
    let embed_all = |profiles: &[&crate::data::LoadProfile]| -> Result<Array> {
        let rows: Vec<Vec<f64>> = profiles
            .iter()
            .map(|p| feature_embed(&p.series))
            .collect::<Result<_>>()?;
        let f = rows[0].len();
        Array::from_vec(
            &[rows.len(), f],
            rows.into_iter().flatten().collect(),
        )
    };
    let real_set = EmbeddingSet::from_vectors(embed_all(&subset.real)?)?;
    let syn_set = EmbeddingSet::from_vectors(embed_all(&subset.syn)?)?;
    let fid = context_fid(&real_set, &syn_set)?;

    // Group real profiles by context for pairing and bands.
    let mut real_by_context: std::collections::BTreeMap<&[usize], Vec<&crate::data::LoadProfile>> =
        std::collections::BTreeMap::new();
    for p in &subset.real {
        real_by_context.entry(&p.context_codes).or_default().push(p);
    }

    let mut bmse_total = 0.0;
    let mut bmse_count = 0usize;
    let mut dtw_total = 0.0;
    let mut dtw_count = 0usize;
    for p in &subset.syn {
        match real_by_context.get(p.context_codes.as_slice()) {
            None => *unmatched += 1,
            Some(reals) => {
                let band = Band::from_series(reals.iter().map(|r| &r.series))?;
                bmse_total += bmse(&p.series, &band, BmseMode::OutsideOnly)?;
                bmse_count += 1;
                // Nearest same-context real by MSE.
                let nearest = reals
                    .iter()
                    .min_by(|a, b| {
                        let da = mse_distance(&p.series, &a.series);
                        let db = mse_distance(&p.series, &b.series);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                dtw_total += mdtwd(&p.series, &nearest.series)?;
                dtw_count += 1;
            }
        }
    }
    if bmse_count == 0 {
        return Err(Error::Data(
            "no synthetic series shares a context with any real series".into(),
        ));
    }
    let bmse_value = bmse_total / bmse_count as f64;
    let mdtwd_value = dtw_total / dtw_count as f64;

    let flatten = |profiles: &[&crate::data::LoadProfile]| -> Vec<Vec<f64>> {
        profiles.iter().map(|p| p.series.values().to_vec()).collect()
    };
    let mmd_value = mmd(&flatten(&subset.syn), &flatten(&subset.real), Bandwidth::Median)?;

    let real_series: Vec<Array> = subset.real.iter().map(|p| p.series.clone()).collect();
    let syn_series: Vec<Array> = subset.syn.iter().map(|p| p.series.clone()).collect();
    let discriminative = match discriminative_score(&real_series, &syn_series, seed) {
        Ok(v) => Some(v),
        Err(Error::Usage(_)) => None,
        Err(e) => return Err(e),
    };
    let predictive = if real_series[0].shape()[0] >= FORECAST_WINDOW + 1 {
        Some(predictive_score(&syn_series, &real_series, seed)?)
    } else {
        None
    };

    Ok(MetricValues {
        context_fid: fid,
        bmse: bmse_value,
        mmd: mmd_value,
        mdtwd_avg: mdtwd_value,
        discriminative_score: discriminative,
        predictive_score: predictive,
    })
}

fn mse_distance(a: &Array, b: &Array) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64
}

/// Runs the full suite overall and restricted to sparse-labeled contexts.
/// The sparse synthetic subset is selected by context combinations of the
/// masked real profiles.
pub fn evaluate_all(
    real: &Dataset,
    syn: &Dataset,
    sparsity_mask: Option<&[bool]>,
    seed: u64,
) -> Result<MetricReport> {
    if real.vocabulary != syn.vocabulary {
        let mut diffs = Vec::new();
        for i in 0..real.vocabulary.len().max(syn.vocabulary.len()) {
            let a = real.vocabulary.variables().get(i);
            let b = syn.vocabulary.variables().get(i);
            if a != b {
                diffs.push(format!(
                    "{} vs {}",
                    a.map(|v| v.0.as_str()).unwrap_or("<missing>"),
                    b.map(|v| v.0.as_str()).unwrap_or("<missing>")
                ));
            }
        }
        return Err(Error::Data(format!(
            "vocabulary mismatch between datasets: {}",
            diffs.join(", ")
        )));
    }
    if let Some(mask) = sparsity_mask {
        if mask.len() != real.len() {
            return Err(Error::Data(format!(
                "sparsity mask length {} does not match real profile count {}",
                mask.len(),
                real.len()
            )));
        }
    }

    let mut unmatched = 0usize;
    let overall = compute_values(
        &Subset {
            real: real.profiles.iter().collect(),
            syn: syn.profiles.iter().collect(),
        },
        seed,
        &mut unmatched,
    )?;

    let mut sparse_real_count = 0;
    let mut sparse_syn_count = 0;
    let sparse_only = match sparsity_mask {
        None => None,
        Some(mask) => {
            let sparse_real: Vec<&crate::data::LoadProfile> = real
                .profiles
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(p, _)| p)
                .collect();
            let sparse_contexts: BTreeSet<&[usize]> = sparse_real
                .iter()
                .map(|p| p.context_codes.as_slice())
                .collect();
            let sparse_syn: Vec<&crate::data::LoadProfile> = syn
                .profiles
                .iter()
                .filter(|p| sparse_contexts.contains(p.context_codes.as_slice()))
                .collect();
            sparse_real_count = sparse_real.len();
            sparse_syn_count = sparse_syn.len();
            if sparse_real.is_empty() || sparse_syn.is_empty() {
                None
            } else {
                Some(compute_values(
                    &Subset {
                        real: sparse_real,
                        syn: sparse_syn,
                    },
                    seed,
                    &mut unmatched,
                )?)
            }
        }
    };

    Ok(MetricReport {
        overall,
        sparse_only,
        real_count: real.len(),
        synthetic_count: syn.len(),
        sparse_real_count,
        sparse_synthetic_count: sparse_syn_count,
        unmatched_synthetic: unmatched,
        seed,
    })
}
