//! Utility scores: a real-vs-synthetic classifier and a train-on-synthetic /
//! test-on-real one-step forecaster.

use crate::error::{Error, Result};
use crate::metrics::features::feature_embed;
use crate::numerics::loss::{cross_entropy_from_logits, cross_entropy_from_logits_backward};
use crate::numerics::{adam_step, symmetric_eig, Activation, AdamConfig, Array, Mlp, RngState};

/// Forecast window: past steps fed to the linear one-step predictor.
pub const FORECAST_WINDOW: usize = 12;

const CLASSIFIER_HIDDEN: usize = 32;
const CLASSIFIER_EPOCHS: usize = 200;

/// |test accuracy − 0.5| of a two-layer MLP classifying real vs synthetic
/// feature embeddings after a seeded 70/30 split. Lower is better.
pub fn discriminative_score(real: &[Array], syn: &[Array], seed: u64) -> Result<f64> {
    if real.len() < 20 || syn.len() < 20 {
        return Err(Error::Usage(format!(
            "discriminative score needs at least 20 series per set, got {} and {}",
            real.len(),
            syn.len()
        )));
    }
    let mut rng = RngState::new(seed);
    let mut examples: Vec<(Vec<f64>, usize)> = Vec::with_capacity(real.len() + syn.len());
    for s in real {
        examples.push((feature_embed(s)?, 1));
    }
    for s in syn {
        examples.push((feature_embed(s)?, 0));
    }
    rng.shuffle(&mut examples);
    let n_train = (examples.len() as f64 * 0.7).round() as usize;
    if n_train == 0 || n_train == examples.len() {
        return Err(Error::Usage("discriminative score: degenerate train/test split".into()));
    }
    let (train, test) = examples.split_at(n_train);
    if !train.iter().any(|(_, l)| *l == 1)
        || !train.iter().any(|(_, l)| *l == 0)
        || test.is_empty()
    {
        return Err(Error::Usage("discriminative score: degenerate train/test split".into()));
    }

    let f = train[0].0.len();
    // Standardize features with training-set statistics.
    let mut mean = vec![0.0; f];
    for (x, _) in train {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n_train as f64;
        }
    }
    let mut std = vec![0.0; f];
    for (x, _) in train {
        for (s, (v, m)) in std.iter_mut().zip(x.iter().zip(&mean)) {
            *s += (v - m) * (v - m) / n_train as f64;
        }
    }
    for s in std.iter_mut() {
        *s = s.sqrt() + 1e-9;
    }
    let standardize = |rows: &[(Vec<f64>, usize)]| -> Array {
        Array::from_fn(&[rows.len(), f], |i| {
            let (x, _) = &rows[i / f];
            (x[i % f] - mean[i % f]) / std[i % f]
        })
    };
    let x_train = standardize(train);
    let y_train: Vec<usize> = train.iter().map(|(_, l)| *l).collect();
    let x_test = standardize(test);
    let y_test: Vec<usize> = test.iter().map(|(_, l)| *l).collect();

    let mut clf = Mlp::new(
        "disc_score.mlp",
        &[f, CLASSIFIER_HIDDEN, 2],
        Activation::LeakyRelu(0.2),
        &mut rng,
    );
    let cfg = AdamConfig::with_lr(1e-2);
    for _ in 0..CLASSIFIER_EPOCHS {
        let (logits, cache) = clf.forward(&x_train)?;
        let dlogits = cross_entropy_from_logits_backward(&logits, &y_train)?;
        clf.backward(&cache, &dlogits)?;
        adam_step(&mut clf.params_mut(), &cfg)?;
        // Keep the loss finite; CE is checked inside the backward inputs.
        cross_entropy_from_logits(&logits, &y_train)?;
    }
    let logits = clf.infer(&x_test)?;
    let mut correct = 0usize;
    for (i, &label) in y_test.iter().enumerate() {
        let pred = if logits.at2(i, 1) > logits.at2(i, 0) { 1 } else { 0 };
        if pred == label {
            correct += 1;
        }
    }
    let acc = correct as f64 / y_test.len() as f64;
    Ok((acc - 0.5).abs())
}

/// Linear one-step forecaster weights: maps the last `FORECAST_WINDOW` steps
/// of every channel (plus bias) to the next step of every channel.
#[derive(Debug, Clone)]
pub struct Forecaster {
    /// [(w·d + 1) × d]
    pub weights: Array,
    pub window: usize,
    pub channels: usize,
}

impl Forecaster {
    /// Ridge-regularized least squares over every window position of the
    /// training series.
    pub fn fit(train: &[Array], window: usize) -> Result<Forecaster> {
        let first = train
            .first()
            .ok_or_else(|| Error::Data("forecaster: empty training set".into()))?;
        let (t, d) = (first.shape()[0], first.shape()[1]);
        if t < window + 1 {
            return Err(Error::Usage(format!(
                "forecaster needs series length >= {}, got {t}",
                window + 1
            )));
        }
        let f = window * d + 1;
        // Normal equations: XᵀX w = Xᵀy.
        let mut gram = Array::zeros(&[f, f]);
        let mut rhs = Array::zeros(&[f, d]);
        let mut features = vec![0.0; f];
        for s in train {
            if s.shape() != first.shape() {
                return Err(Error::shape("forecaster train series", s.shape(), first.shape()));
            }
            for pos in window..t {
                fill_window(s, pos, window, d, &mut features);
                for a in 0..f {
                    if features[a] == 0.0 {
                        continue;
                    }
                    for b in 0..f {
                        let v = gram.at2(a, b) + features[a] * features[b];
                        gram.set2(a, b, v);
                    }
                    for ch in 0..d {
                        let v = rhs.at2(a, ch) + features[a] * s.at2(pos, ch);
                        rhs.set2(a, ch, v);
                    }
                }
            }
        }
        for i in 0..f {
            let v = gram.at2(i, i) + 1e-8;
            gram.set2(i, i, v);
        }
        // Solve through the eigendecomposition (pseudo-inverse on tiny modes).
        let (vals, vecs) = symmetric_eig(&gram)?;
        let mut weights = Array::zeros(&[f, d]);
        for k in 0..f {
            if vals[k] <= 1e-12 {
                continue;
            }
            for ch in 0..d {
                let mut proj = 0.0;
                for a in 0..f {
                    proj += vecs.at2(a, k) * rhs.at2(a, ch);
                }
                for a in 0..f {
                    let v = weights.at2(a, ch) + vecs.at2(a, k) * proj / vals[k];
                    weights.set2(a, ch, v);
                }
            }
        }
        Ok(Forecaster {
            weights,
            window,
            channels: d,
        })
    }

    pub fn predict(&self, series: &Array, pos: usize) -> Vec<f64> {
        let d = self.channels;
        let f = self.window * d + 1;
        let mut features = vec![0.0; f];
        fill_window(series, pos, self.window, d, &mut features);
        (0..d)
            .map(|ch| {
                (0..f)
                    .map(|a| features[a] * self.weights.at2(a, ch))
                    .sum()
            })
            .collect()
    }
}

fn fill_window(s: &Array, pos: usize, window: usize, d: usize, out: &mut [f64]) {
    let mut idx = 0;
    for back in (1..=window).rev() {
        for ch in 0..d {
            out[idx] = s.at2(pos - back, ch);
            idx += 1;
        }
    }
    out[idx] = 1.0;
}

/// Trains the forecaster on synthetic series and reports its MAE over all
/// positions of the real test series, averaged over series, positions, and
/// channels. Lower is better.
pub fn predictive_score(syn_train: &[Array], real_test: &[Array], _seed: u64) -> Result<f64> {
    let forecaster = Forecaster::fit(syn_train, FORECAST_WINDOW)?;
    forecaster_mae(&forecaster, real_test)
}

/// MAE of an already-fit forecaster over every window position.
pub fn forecaster_mae(forecaster: &Forecaster, test: &[Array]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Data("predictive score: empty test set".into()));
    }
    let w = forecaster.window;
    let mut per_series_total = 0.0;
    for s in test {
        let (t, d) = (s.shape()[0], s.shape()[1]);
        if t < w + 1 {
            return Err(Error::Usage(format!(
                "predictive score needs series length >= {}, got {t}",
                w + 1
            )));
        }
        let mut series_total = 0.0;
        for pos in w..t {
            let pred = forecaster.predict(s, pos);
            let per_channel: f64 = (0..d)
                .map(|ch| (pred[ch] - s.at2(pos, ch)).abs())
                .sum::<f64>()
                / d as f64;
            series_total += per_channel;
        }
        per_series_total += series_total / (t - w) as f64;
    }
    Ok(per_series_total / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ar1_series(rng: &mut RngState, t: usize, phi: f64, noise: f64) -> Array {
        let mut vals = Vec::with_capacity(t);
        let mut x = rng.normal();
        for _ in 0..t {
            vals.push(x);
            x = phi * x + noise * rng.normal();
        }
        Array::from_vec(&[t, 1], vals).unwrap()
    }

    #[test]
    fn oracle_weights_on_deterministic_ar1_give_zero_mae() {
        // Deterministic AR(1): x_{t+1} = 0.8·x_t is exactly realizable by the
        // linear forecaster; the oracle weight vector has 0.8 on the last lag.
        let mut w = Array::zeros(&[FORECAST_WINDOW + 1, 1]);
        w.set2(FORECAST_WINDOW - 1, 0, 0.8);
        let f = Forecaster {
            weights: w,
            window: FORECAST_WINDOW,
            channels: 1,
        };
        let mut rng = RngState::new(1);
        let test: Vec<Array> = (0..5).map(|_| ar1_series(&mut rng, 20, 0.8, 0.0)).collect();
        let mae = forecaster_mae(&f, &test).unwrap();
        assert!(mae < 1e-6, "{mae}");
    }

    #[test]
    fn constant_zero_predictions_score_mean_abs() {
        let f = Forecaster {
            weights: Array::zeros(&[FORECAST_WINDOW + 1, 1]),
            window: FORECAST_WINDOW,
            channels: 1,
        };
        let m = 1.75;
        let test = vec![Array::full(&[20, 1], m)];
        let mae = forecaster_mae(&f, &test).unwrap();
        assert!((mae - m).abs() < 1e-12);
    }

    #[test]
    fn fitting_ar1_learns_the_dynamics() {
        let mut rng = RngState::new(2);
        let train: Vec<Array> = (0..30).map(|_| ar1_series(&mut rng, 30, 0.7, 0.05)).collect();
        let test: Vec<Array> = (0..10).map(|_| ar1_series(&mut rng, 30, 0.7, 0.05)).collect();
        let score = predictive_score(&train, &test, 0).unwrap();
        // Noise floor is E|ε| = 0.05·√(2/π) ≈ 0.04.
        assert!(score < 0.1, "{score}");
    }

    #[test]
    fn too_short_series_rejected() {
        let short = vec![Array::zeros(&[FORECAST_WINDOW, 1])];
        assert!(predictive_score(&short, &short, 0).is_err());
    }

    #[test]
    fn indistinguishable_sets_score_near_chance() {
        let mut rng = RngState::new(3);
        let pool: Vec<Array> = (0..120)
            .map(|_| ar1_series(&mut rng, 24, 0.6, 0.2))
            .collect();
        let real: Vec<Array> = pool[..60].to_vec();
        let syn: Vec<Array> = pool[60..].to_vec();
        let score = discriminative_score(&real, &syn, 7).unwrap();
        assert!(score < 0.1, "{score}");
    }

    #[test]
    fn shifted_sets_are_trivially_separable() {
        let mut rng = RngState::new(4);
        let real: Vec<Array> = (0..40).map(|_| ar1_series(&mut rng, 24, 0.6, 0.1)).collect();
        let syn: Vec<Array> = real.iter().map(|s| s.map(|v| v + 10.0)).collect();
        let score = discriminative_score(&real, &syn, 8).unwrap();
        assert!(score > 0.4, "{score}");
    }

    #[test]
    fn discriminative_score_deterministic_and_needs_twenty() {
        let mut rng = RngState::new(5);
        let real: Vec<Array> = (0..25).map(|_| ar1_series(&mut rng, 24, 0.5, 0.3)).collect();
        let syn: Vec<Array> = (0..25).map(|_| ar1_series(&mut rng, 24, 0.5, 0.3)).collect();
        let a = discriminative_score(&real, &syn, 11).unwrap();
        let b = discriminative_score(&real, &syn, 11).unwrap();
        assert_eq!(a, b);
        assert!(discriminative_score(&real[..10], &syn, 11).is_err());
    }
}
