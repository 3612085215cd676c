//! Experiment protocols: the λ ablation over seeds and the target-variable
//! extrapolation shift analysis.

use rayon::prelude::*;

use crate::config::ExtrapolateSection;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::evaluate_all;
use crate::numerics::RngState;
use crate::trainer::{generate_dataset, train, Checkpoint, TrainConfig};

/// One ablation cell: a (λ, seed) training run evaluated on its synthetic
/// equivalent of the training dataset.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub lambda: f64,
    pub seed: u64,
    pub context_fid_overall: Option<f64>,
    pub context_fid_sparse: Option<f64>,
    pub error: Option<String>,
}

/// Full ablation result with per-seed cells and per-λ medians.
#[derive(Debug, Clone)]
pub struct AblationTable {
    pub model: String,
    pub cells: Vec<AblationCell>,
    pub lambdas: Vec<f64>,
}

impl AblationTable {
    /// Median sparse-only Context-FID over seeds for one λ.
    pub fn median_sparse(&self, lambda: f64) -> Option<f64> {
        median(
            self.cells
                .iter()
                .filter(|c| c.lambda == lambda)
                .filter_map(|c| c.context_fid_sparse),
        )
    }

    pub fn median_overall(&self, lambda: f64) -> Option<f64> {
        median(
            self.cells
                .iter()
                .filter(|c| c.lambda == lambda)
                .filter_map(|c| c.context_fid_overall),
        )
    }

    /// Table-shaped CSV: per-seed rows then per-λ median rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,lambda,seed,context_fid_overall,context_fid_sparse\n");
        for c in &self.cells {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.model,
                c.lambda,
                c.seed,
                fmt(c.context_fid_overall),
                fmt(c.context_fid_sparse)
            ));
        }
        for &l in &self.lambdas {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},median,{},{}\n",
                self.model,
                l,
                fmt(self.median_overall(l)),
                fmt(self.median_sparse(l))
            ));
        }
        out
    }
}

fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Trains per (λ, seed), generates a synthetic equivalent of the training
/// dataset, and evaluates overall plus sparse-only Context-FID. Sub-runs are
/// independent jobs and execute in parallel; failures mark their cell rather
/// than aborting the table.
pub fn ablate_lambda(
    base: &TrainConfig,
    dataset: &Dataset,
    lambdas: &[f64],
    seeds: &[u64],
) -> Result<AblationTable> {
    if lambdas.len() < 2 {
        return Err(Error::Usage("ablation needs at least 2 lambda values".into()));
    }
    if seeds.len() < 3 {
        return Err(Error::Usage("ablation needs at least 3 seeds".into()));
    }
    let mask = dataset
        .sparsity_mask
        .as_ref()
        .ok_or_else(|| Error::Usage("ablation dataset needs a sparsity mask".into()))?;
    let jobs: Vec<(f64, u64)> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let cells: Vec<AblationCell> = jobs
        .par_iter()
        .map(|&(lambda, seed)| {
            let mut cfg = base.clone();
            cfg.lambda_aux = lambda;
            cfg.seed = seed;
            match ablation_cell(&cfg, dataset, mask, seed) {
                Ok((overall, sparse)) => AblationCell {
                    lambda,
                    seed,
                    context_fid_overall: Some(overall),
                    context_fid_sparse: sparse,
                    error: None,
                },
                Err(e) => AblationCell {
                    lambda,
                    seed,
                    context_fid_overall: None,
                    context_fid_sparse: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(AblationTable {
        model: base.model.as_str().to_string(),
        cells,
        lambdas: lambdas.to_vec(),
    })
}

fn ablation_cell(
    cfg: &TrainConfig,
    dataset: &Dataset,
    mask: &[bool],
    seed: u64,
) -> Result<(f64, Option<f64>)> {
    let checkpoint = train(cfg, dataset)?;
    let syn = synthetic_equivalent(&checkpoint, dataset, seed)?;
    let report = evaluate_all(dataset, &syn, Some(mask), seed)?;
    Ok((
        report.overall.context_fid,
        report.sparse_only.map(|s| s.context_fid),
    ))
}

/// One synthetic profile per real profile's context.
pub fn synthetic_equivalent(
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    seed: u64,
) -> Result<Dataset> {
    let contexts: Vec<Vec<usize>> = dataset
        .profiles
        .iter()
        .map(|p| p.context_codes.clone())
        .collect();
    generate_dataset(checkpoint, &contexts, 1, seed)
}

/// Per-timestep shift arrays for the extrapolation experiment (load channel).
#[derive(Debug, Clone)]
pub struct ShiftReport {
    /// Mean generated difference (target=1 minus target=0) over eligible
    /// combinations.
    pub model_shift: Vec<f64>,
    /// Mean real difference over the whole dataset.
    pub dataset_avg_shift: Vec<f64>,
    /// Mean real difference within matched groups holding both states.
    pub context_matched_shift: Vec<f64>,
    /// Pearson correlation of model_shift against context_matched_shift.
    pub pearson_model_vs_matched: f64,
    pub eligible_combinations: usize,
    pub matched_groups: usize,
}

impl ShiftReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,model_shift,dataset_avg_shift,context_matched_shift\n");
        for t in 0..self.model_shift.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t, self.model_shift[t], self.dataset_avg_shift[t], self.context_matched_shift[t]
            ));
        }
        out
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    let denom = (da * db).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        num / denom
    }
}

/// Selects context combinations observed with only one state of the target
/// variable, generates both states for each, and compares the model's mean
/// per-timestep shift against real-data shifts.
///
/// `positive_state` names the state treated as the positive side of every
/// difference; swapping it negates all shift arrays.
pub fn extrapolate_shift(
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    opts: &ExtrapolateSection,
    positive_state: usize,
    seed: u64,
) -> Result<ShiftReport> {
    let vocab = &checkpoint.vocabulary;
    let target_vi = vocab
        .variable_index(&opts.target_variable)
        .ok_or_else(|| Error::Usage(format!("no context variable named {:?}", opts.target_variable)))?;
    if vocab.cardinality(target_vi) != 2 {
        return Err(Error::Usage(format!(
            "extrapolation target {:?} must be binary, has {} categories",
            opts.target_variable,
            vocab.cardinality(target_vi)
        )));
    }
    if positive_state > 1 {
        return Err(Error::Usage("positive_state must be 0 or 1".into()));
    }
    let negative_state = 1 - positive_state;
    let t_len = dataset.t_len();

    // Real per-timestep means by state (load channel).
    let mean_by_state = |state: usize, filter: &dyn Fn(&crate::data::LoadProfile) -> bool| -> Option<Vec<f64>> {
        let mut acc = vec![0.0; t_len];
        let mut count = 0usize;
        for p in &dataset.profiles {
            if p.context_codes[target_vi] == state && filter(p) {
                for (t, a) in acc.iter_mut().enumerate() {
                    *a += p.series.at2(t, 0);
                }
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        Some(acc.into_iter().map(|v| v / count as f64).collect())
    };
    let all = |_: &crate::data::LoadProfile| true;
    let pos_mean = mean_by_state(positive_state, &all)
        .ok_or_else(|| Error::Data("dataset has no profiles in the positive target state".into()))?;
    let neg_mean = mean_by_state(negative_state, &all)
        .ok_or_else(|| Error::Data("dataset has no profiles in the negative target state".into()))?;
    let dataset_avg_shift: Vec<f64> = pos_mean.iter().zip(&neg_mean).map(|(a, b)| a - b).collect();

    // Context-matched shift over groups holding both states.
    let match_vis: Vec<usize> = opts
        .match_variables
        .iter()
        .map(|name| {
            vocab
                .variable_index(name)
                .ok_or_else(|| Error::Usage(format!("no context variable named {name:?}")))
        })
        .collect::<Result<_>>()?;
    let mut groups: std::collections::BTreeMap<Vec<usize>, [Vec<usize>; 2]> =
        std::collections::BTreeMap::new();
    for (i, p) in dataset.profiles.iter().enumerate() {
        let key: Vec<usize> = match_vis.iter().map(|&vi| p.context_codes[vi]).collect();
        groups.entry(key).or_default()[p.context_codes[target_vi]].push(i);
    }
    let mut matched_acc = vec![0.0; t_len];
    let mut matched_groups = 0usize;
    for (_, sides) in groups {
        if sides[0].is_empty() || sides[1].is_empty() {
            continue;
        }
        matched_groups += 1;
        for t in 0..t_len {
            let mean_side = |idxs: &[usize]| -> f64 {
                idxs.iter().map(|&i| dataset.profiles[i].series.at2(t, 0)).sum::<f64>()
                    / idxs.len() as f64
            };
            matched_acc[t] += mean_side(&sides[positive_state]) - mean_side(&sides[negative_state]);
        }
    }
    if matched_groups == 0 {
        return Err(Error::Data(
            "no matched group contains both target states".into(),
        ));
    }
    let context_matched_shift: Vec<f64> =
        matched_acc.into_iter().map(|v| v / matched_groups as f64).collect();

    // Combinations missing exactly one state.
    let mut seen_states: std::collections::BTreeMap<Vec<usize>, [bool; 2]> =
        std::collections::BTreeMap::new();
    for p in &dataset.profiles {
        let mut base = p.context_codes.clone();
        let state = base[target_vi];
        base[target_vi] = 0;
        seen_states.entry(base).or_default()[state] = true;
    }
    let mut eligible: Vec<Vec<usize>> = seen_states
        .into_iter()
        .filter(|(_, states)| states[0] != states[1])
        .map(|(base, _)| base)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Data(
            "every observed combination already contains both target states".into(),
        ));
    }
    let mut rng = RngState::new(seed);
    if eligible.len() > opts.max_combinations {
        rng.shuffle(&mut eligible);
        eligible.truncate(opts.max_combinations);
        eligible.sort();
    }

    // Generate both states for each eligible combination and average the
    // per-timestep difference of the generated means.
    let mut shift_acc = vec![0.0; t_len];
    for base in &eligible {
        let mut pos_codes = base.clone();
        pos_codes[target_vi] = positive_state;
        let mut neg_codes = base.clone();
        neg_codes[target_vi] = negative_state;
        // Seeds keyed by the underlying state so that swapping the positive
        // role exactly negates the resulting shift.
        let sample_seed = rng.next_u64();
        let seed_for = |state: usize| sample_seed.wrapping_add(state as u64);
        let pos = generate_dataset(
            checkpoint,
            &[pos_codes],
            opts.samples_per_state,
            seed_for(positive_state),
        )?;
        let neg = generate_dataset(
            checkpoint,
            &[neg_codes],
            opts.samples_per_state,
            seed_for(negative_state),
        )?;
        for t in 0..t_len {
            let mean_of = |ds: &Dataset| -> f64 {
                ds.profiles.iter().map(|p| p.series.at2(t, 0)).sum::<f64>() / ds.len() as f64
            };
            shift_acc[t] += mean_of(&pos) - mean_of(&neg);
        }
    }
    let model_shift: Vec<f64> = shift_acc
        .into_iter()
        .map(|v| v / eligible.len() as f64)
        .collect();

    let pearson_model_vs_matched = pearson(&model_shift, &context_matched_shift);
    Ok(ShiftReport {
        model_shift,
        dataset_avg_shift,
        context_matched_shift,
        pearson_model_vs_matched,
        eligible_combinations: eligible.len(),
        matched_groups,
    })
}
