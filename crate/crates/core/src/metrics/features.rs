//! Deterministic per-series feature embedding used by Context-FID and the
//! discriminative score: summary statistics, short-lag autocorrelations,
//! low-bin spectral magnitudes, and first-difference moments per channel.

use crate::error::{Error, Result};
use crate::numerics::dft::dft;
use crate::numerics::Array;

/// Features per channel: mean, std, min, max, autocorr lags 1–3, |DFT| bins
/// 1–8, first-difference mean and std.
pub const FEATURES_PER_CHANNEL: usize = 4 + 3 + 8 + 2;

/// Embeds one [T × d] series into a fixed-length vector (length
/// `FEATURES_PER_CHANNEL · d` for fixed (T, d)).
pub fn feature_embed(x: &Array) -> Result<Vec<f64>> {
    if x.shape().len() != 2 {
        return Err(Error::Dimension(format!(
            "feature_embed expects [T × d], got {:?}",
            x.shape()
        )));
    }
    let (t, d) = (x.shape()[0], x.shape()[1]);
    if t < 4 {
        return Err(Error::Usage("feature_embed requires series length >= 4".into()));
    }
    let mut out = Vec::with_capacity(FEATURES_PER_CHANNEL * d);
    for ch in 0..d {
        let vals: Vec<f64> = (0..t).map(|ti| x.at2(ti, ch)).collect();
        let mean = vals.iter().sum::<f64>() / t as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
        let std = var.sqrt();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.extend([mean, std, min, max]);
        for lag in 1..=3 {
            out.push(autocorrelation(&vals, mean, var, lag));
        }
        let spectrum = dft(&vals);
        for k in 1..=8 {
            out.push(spectrum.magnitude(k % t));
        }
        let diffs: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        let dmean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let dvar = diffs.iter().map(|v| (v - dmean) * (v - dmean)).sum::<f64>() / diffs.len() as f64;
        out.extend([dmean, dvar.sqrt()]);
    }
    Ok(out)
}

fn autocorrelation(vals: &[f64], mean: f64, var: f64, lag: usize) -> f64 {
    if var <= 0.0 || lag >= vals.len() {
        return 0.0;
    }
    let t = vals.len();
    let num: f64 = (0..t - lag)
        .map(|i| (vals[i] - mean) * (vals[i + lag] - mean))
        .sum();
    num / (t as f64 * var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_features() {
        let c = 4.25;
        let x = Array::full(&[16, 1], c);
        let f = feature_embed(&x).unwrap();
        assert_eq!(f.len(), FEATURES_PER_CHANNEL);
        assert_eq!(f[0], c); // mean
        assert_eq!(f[1], 0.0); // std
        assert_eq!(f[2], c); // min
        assert_eq!(f[3], c); // max
        for &v in &f[4..7] {
            assert_eq!(v, 0.0); // autocorrelations
        }
        for &v in &f[7..15] {
            assert!(v.abs() < 1e-9); // spectral bins 1..8
        }
        assert_eq!(f[15], 0.0);
        assert_eq!(f[16], 0.0);
    }

    #[test]
    fn embedding_is_a_pure_function() {
        let x = Array::from_fn(&[24, 2], |i| (i as f64 * 0.37).sin());
        assert_eq!(feature_embed(&x).unwrap(), feature_embed(&x).unwrap());
    }

    #[test]
    fn pure_tone_dominates_its_spectral_bin() {
        let t = 24;
        let x = Array::from_fn(&[t, 1], |i| {
            (2.0 * std::f64::consts::PI * 3.0 * i as f64 / t as f64).cos()
        });
        let f = feature_embed(&x).unwrap();
        let spectral = &f[7..15]; // bins 1..8
        let bin3 = spectral[2];
        for (i, &v) in spectral.iter().enumerate() {
            if i != 2 {
                assert!(bin3 > 10.0 * v.abs().max(1e-12), "bin {} = {v} vs bin3 = {bin3}", i + 1);
            }
        }
    }

    #[test]
    fn too_short_series_rejected() {
        assert!(feature_embed(&Array::zeros(&[3, 1])).is_err());
    }
}
