//! Context normalization: per-group statistics, the exact forward/inverse
//! transforms, and a parametric normalizer that predicts the statistics for
//! arbitrary (including unseen) context combinations.

pub mod model;

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Array;

pub use model::{train_normalizer, NormalizerHyper, NormalizerModel};

/// Default guard constant for all divisions.
pub const DEFAULT_DELTA: f64 = 1e-5;

/// Per-channel normalization statistics: kWh-scale mean and standard
/// deviation, plus min/max bounds of the standardized values.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mu: Array,
    pub sigma: Array,
    pub z_min: Array,
    pub z_max: Array,
}

impl NormStats {
    pub fn channels(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mu.len();
        for a in [&self.sigma, &self.z_min, &self.z_max] {
            if a.len() != d {
                return Err(Error::shape("norm stats", a.shape(), self.mu.shape()));
            }
        }
        for ch in 0..d {
            if self.sigma.values()[ch] < 0.0 {
                return Err(Error::Data(format!("sigma must be non-negative in channel {ch}")));
            }
            if self.z_max.values()[ch] < self.z_min.values()[ch] {
                return Err(Error::Data(format!("z_max < z_min in channel {ch}")));
            }
        }
        Ok(())
    }
}

/// True statistics per observed context combination: per-channel population
/// mean/std over all values of all profiles in the group, then min/max of the
/// standardized values.
pub fn compute_group_stats(dataset: &Dataset, delta: f64) -> Result<BTreeMap<Vec<usize>, NormStats>> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot compute group stats of an empty dataset".into()));
    }
    let d = dataset.channels();
    let t = dataset.t_len();
    let mut out = BTreeMap::new();
    for (combo, idxs) in dataset.group_by_context() {
        let mut mu = Array::zeros(&[d]);
        let mut sigma = Array::zeros(&[d]);
        let mut z_min = Array::zeros(&[d]);
        let mut z_max = Array::zeros(&[d]);
        let n = (idxs.len() * t) as f64;
        for ch in 0..d {
            let mut sum = 0.0;
            for &i in &idxs {
                for ti in 0..t {
                    sum += dataset.profiles[i].series.at2(ti, ch);
                }
            }
            let mean = sum / n;
            let mut sq = 0.0;
            for &i in &idxs {
                for ti in 0..t {
                    let v = dataset.profiles[i].series.at2(ti, ch) - mean;
                    sq += v * v;
                }
            }
            let std = (sq / n).sqrt();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in &idxs {
                for ti in 0..t {
                    let z = (dataset.profiles[i].series.at2(ti, ch) - mean) / (std + delta);
                    lo = lo.min(z);
                    hi = hi.max(z);
                }
            }
            mu.values_mut()[ch] = mean;
            sigma.values_mut()[ch] = std;
            z_min.values_mut()[ch] = lo;
            z_max.values_mut()[ch] = hi;
        }
        out.insert(combo, NormStats { mu, sigma, z_min, z_max });
    }
    Ok(out)
}

/// Forward transform: standardize then min-max squash into roughly [0, 1].
pub fn normalize(x: &Array, stats: &NormStats, delta: f64) -> Result<Array> {
    let (t, d) = series_dims(x, stats)?;
    let mut z = Array::zeros(x.shape());
    for ch in 0..d {
        let mu = stats.mu.values()[ch];
        let sigma = stats.sigma.values()[ch];
        let z_min = stats.z_min.values()[ch];
        let z_max = stats.z_max.values()[ch];
        for ti in 0..t {
            let zbar = (x.at2(ti, ch) - mu) / (sigma + delta);
            z.set2(ti, ch, (zbar - z_min) / (z_max - z_min + delta));
        }
    }
    Ok(z)
}

/// Exact algebraic inverse of [`normalize`] under identical stats and delta.
pub fn denormalize(z: &Array, stats: &NormStats, delta: f64) -> Result<Array> {
    let (t, d) = series_dims(z, stats)?;
    let mut x = Array::zeros(z.shape());
    for ch in 0..d {
        let mu = stats.mu.values()[ch];
        let sigma = stats.sigma.values()[ch];
        let z_min = stats.z_min.values()[ch];
        let z_max = stats.z_max.values()[ch];
        for ti in 0..t {
            let zbar = z.at2(ti, ch) * (z_max - z_min + delta) + z_min;
            x.set2(ti, ch, zbar * (sigma + delta) + mu);
        }
    }
    Ok(x)
}

fn series_dims(x: &Array, stats: &NormStats) -> Result<(usize, usize)> {
    if x.shape().len() != 2 {
        return Err(Error::Dimension(format!(
            "normalize expects a [T × d] series, got {:?}",
            x.shape()
        )));
    }
    let (t, d) = (x.shape()[0], x.shape()[1]);
    if d != stats.channels() {
        return Err(Error::shape("normalize channels", x.shape(), stats.mu.shape()));
    }
    Ok((t, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ContextVocabulary, FauxSpec, LoadProfile};
    use crate::numerics::RngState;
    use chrono::NaiveDate;

    fn single_group_dataset(series: Vec<Vec<f64>>) -> Dataset {
        let vocab = ContextVocabulary::from_parts(vec![("g".into(), vec!["a".into(), "b".into()])]).unwrap();
        let t = series[0].len();
        let profiles = series
            .into_iter()
            .enumerate()
            .map(|(i, vals)| LoadProfile {
                series: Array::from_vec(&[t, 1], vals).unwrap(),
                date: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
                household_id: format!("h{i}"),
                context_codes: vec![0],
            })
            .collect();
        Dataset::new(profiles, vocab).unwrap()
    }

    #[test]
    fn constant_group_stats() {
        let ds = single_group_dataset(vec![vec![3.0; 6], vec![3.0; 6]]);
        let stats = compute_group_stats(&ds, DEFAULT_DELTA).unwrap();
        let s = stats.values().next().unwrap();
        assert_eq!(s.mu.values()[0], 3.0);
        assert_eq!(s.sigma.values()[0], 0.0);
        assert_eq!(s.z_min.values()[0], 0.0);
        assert_eq!(s.z_max.values()[0], 0.0);
    }

    #[test]
    fn forced_arithmetic_group() {
        // Group {[0,0],[2,2]}: mu=1, sigma=1, z_min≈-1, z_max≈1.
        let ds = single_group_dataset(vec![vec![0.0, 0.0], vec![2.0, 2.0]]);
        let stats = compute_group_stats(&ds, DEFAULT_DELTA).unwrap();
        let s = stats.values().next().unwrap();
        assert!((s.mu.values()[0] - 1.0).abs() < 1e-12);
        assert!((s.sigma.values()[0] - 1.0).abs() < 1e-12);
        assert!((s.z_min.values()[0] + 1.0).abs() < 1e-4);
        assert!((s.z_max.values()[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn stats_match_direct_recomputation() {
        let mut rng = RngState::new(17);
        let series: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..8).map(|_| 2.0 + rng.normal()).collect())
            .collect();
        let ds = single_group_dataset(series.clone());
        let stats = compute_group_stats(&ds, DEFAULT_DELTA).unwrap();
        let s = stats.values().next().unwrap();
        let all: Vec<f64> = series.iter().flatten().cloned().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / all.len() as f64;
        let std = var.sqrt();
        assert!((s.mu.values()[0] - mean).abs() < 1e-12);
        assert!((s.sigma.values()[0] - std).abs() < 1e-12);
        let zs: Vec<f64> = all.iter().map(|v| (v - mean) / (std + DEFAULT_DELTA)).collect();
        let lo = zs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((s.z_min.values()[0] - lo).abs() < 1e-12);
        assert!((s.z_max.values()[0] - hi).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance() {
        let a = vec![vec![1.0, 2.0], vec![5.0, 3.0], vec![0.5, 0.7]];
        let mut b = a.clone();
        b.reverse();
        let sa = compute_group_stats(&single_group_dataset(a), DEFAULT_DELTA).unwrap();
        let sb = compute_group_stats(&single_group_dataset(b), DEFAULT_DELTA).unwrap();
        assert_eq!(sa.values().next().unwrap(), sb.values().next().unwrap());
    }

    fn random_stats(rng: &mut RngState, d: usize) -> NormStats {
        let mu = Array::from_fn(&[d], |_| rng.normal() * 3.0);
        let sigma = Array::from_fn(&[d], |_| rng.uniform() * 2.0);
        let z_min = Array::from_fn(&[d], |_| -rng.uniform() * 2.0);
        let gap = Array::from_fn(&[d], |_| rng.uniform() * 3.0);
        let z_max = z_min.add(&gap).unwrap();
        NormStats { mu, sigma, z_min, z_max }
    }

    #[test]
    fn normalize_at_mu_hits_forced_value() {
        let mut rng = RngState::new(23);
        let stats = random_stats(&mut rng, 2);
        let t = 4;
        let x = Array::from_fn(&[t, 2], |i| stats.mu.values()[i % 2]);
        let z = normalize(&x, &stats, DEFAULT_DELTA).unwrap();
        for ch in 0..2 {
            let expect = -stats.z_min.values()[ch]
                / (stats.z_max.values()[ch] - stats.z_min.values()[ch] + DEFAULT_DELTA);
            for ti in 0..t {
                assert!((z.at2(ti, ch) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn in_group_normalization_spans_unit_interval() {
        let mut rng = RngState::new(31);
        let series: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..12).map(|_| 1.0 + 0.5 * rng.normal()).collect())
            .collect();
        let ds = single_group_dataset(series);
        let stats = compute_group_stats(&ds, DEFAULT_DELTA).unwrap();
        let s = stats.values().next().unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &ds.profiles {
            let z = normalize(&p.series, s, DEFAULT_DELTA).unwrap();
            for &v in z.values() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!(lo.abs() < 1e-3, "min {lo}");
        assert!((hi - 1.0).abs() < 1e-3, "max {hi}");
    }

    #[test]
    fn degenerate_sigma_stays_finite() {
        let stats = NormStats {
            mu: Array::scalar(5.0),
            sigma: Array::scalar(0.0),
            z_min: Array::scalar(0.0),
            z_max: Array::scalar(0.0),
        };
        let x = Array::from_vec(&[3, 1], vec![5.0, 5.0, 5.0]).unwrap();
        let z = normalize(&x, &stats, DEFAULT_DELTA).unwrap();
        assert!(z.all_finite());
    }

    #[test]
    fn round_trip_exact_inverse() {
        let mut rng = RngState::new(47);
        for _ in 0..50 {
            let d = 1 + rng.below(2);
            let stats = random_stats(&mut rng, d);
            let x = Array::from_fn(&[8, d], |_| rng.normal() * 4.0);
            let z = normalize(&x, &stats, DEFAULT_DELTA).unwrap();
            let back = denormalize(&z, &stats, DEFAULT_DELTA).unwrap();
            assert!(x.max_abs_diff(&back) < 1e-9);
            // Inverse-order round trip.
            let z0 = Array::from_fn(&[8, d], |_| rng.uniform());
            let x0 = denormalize(&z0, &stats, DEFAULT_DELTA).unwrap();
            let z1 = normalize(&x0, &stats, DEFAULT_DELTA).unwrap();
            assert!(z0.max_abs_diff(&z1) < 1e-9);
        }
    }

    #[test]
    fn zero_z_maps_to_forced_substitution() {
        let mut rng = RngState::new(53);
        let stats = random_stats(&mut rng, 1);
        let z = Array::zeros(&[2, 1]);
        let x = denormalize(&z, &stats, DEFAULT_DELTA).unwrap();
        let expect = stats.z_min.values()[0] * (stats.sigma.values()[0] + DEFAULT_DELTA)
            + stats.mu.values()[0];
        assert!((x.at2(0, 0) - expect).abs() < 1e-12);
    }

    #[test]
    fn faux_group_stats_are_deterministic() {
        let (ds, _) = crate::data::faux::generate_faux_dataset(&FauxSpec::desk_sparse(), 2).unwrap();
        let a = compute_group_stats(&ds, DEFAULT_DELTA).unwrap();
        let b = compute_group_stats(&ds, DEFAULT_DELTA).unwrap();
        assert_eq!(a, b);
    }
}
