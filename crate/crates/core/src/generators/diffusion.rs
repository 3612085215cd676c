//! Denoising diffusion with an interpretable denoiser: conditioned MLP blocks
//! predict the clean series decomposed into a polynomial trend, a top-K
//! Fourier seasonality synthesis, and a residual head. Training minimizes a
//! weighted time + frequency domain reconstruction objective; sampling is
//! ancestral with the posterior parameterized by the predicted clean series.

use crate::error::{Error, Result};
use crate::numerics::dft::{dft, Spectrum};
use crate::numerics::loss;
use crate::numerics::{Activation, Array, Linear, Mlp, MlpCache, Parameter, RngState};

/// Guard inside magnitude square roots so the gradient stays finite at the
/// origin. Far below every tolerance in use.
const MAG_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DiffusionConfig {
    pub t_len: usize,
    pub channels: usize,
    pub h_dim: usize,
    /// Number of diffusion steps.
    pub t_steps: usize,
    pub trunk_hidden: usize,
    pub t_emb_dim: usize,
    /// Polynomial trend degree p.
    pub poly_degree: usize,
    /// Number of Fourier bins kept by the seasonality layer.
    pub top_k: usize,
    /// Time-domain loss weight λ1.
    pub lambda_time: f64,
    /// Frequency-domain loss weight λ2.
    pub lambda_freq: f64,
    /// L1 reconstruction norm when true, squared error otherwise.
    pub use_l1: bool,
    pub ema_decay: f64,
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_steps < 2 {
            return Err(Error::Config("diffusion: t_steps must be at least 2".into()));
        }
        if self.top_k == 0 || self.top_k > self.t_len / 2 {
            return Err(Error::Config(format!(
                "diffusion: top_k {} must lie in 1..={} for series length {}",
                self.top_k,
                self.t_len / 2,
                self.t_len
            )));
        }
        if self.t_emb_dim % 2 != 0 {
            return Err(Error::Config("diffusion: t_emb_dim must be even".into()));
        }
        if self.lambda_time < 0.0 || self.lambda_freq < 0.0 {
            return Err(Error::Config("diffusion: loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Standard cosine schedule: ᾱ_t = f(t)/f(0) with
/// f(t) = cos²(((t/T + s)/(1 + s))·π/2), s = 0.008; betas clipped to
/// (1e-8, 0.999) and ᾱ recomputed from the clipped betas.
pub fn cosine_beta_schedule(t_steps: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(t_steps >= 2);
    let s = 0.008;
    let f = |t: f64| -> f64 {
        let inner = ((t / t_steps as f64 + s) / (1.0 + s)) * std::f64::consts::FRAC_PI_2;
        inner.cos().powi(2)
    };
    let f0 = f(0.0);
    let mut betas = Vec::with_capacity(t_steps);
    let mut prev = 1.0;
    for t in 1..=t_steps {
        let abar = f(t as f64) / f0;
        let beta = (1.0 - abar / prev).clamp(1e-8, 0.999);
        betas.push(beta);
        prev = abar;
    }
    let mut alphas_bar = Vec::with_capacity(t_steps);
    let mut acc = 1.0;
    for &b in &betas {
        acc *= 1.0 - b;
        alphas_bar.push(acc);
    }
    (betas, alphas_bar)
}

/// Closed-form forward noising: x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·noise, t in
/// 1..=T_steps.
pub fn forward_diffuse(x0: &Array, t: usize, noise: &Array, alphas_bar: &[f64]) -> Result<Array> {
    if t == 0 || t > alphas_bar.len() {
        return Err(Error::Usage(format!(
            "diffusion step {t} outside 1..={}",
            alphas_bar.len()
        )));
    }
    let abar = alphas_bar[t - 1];
    let a = abar.sqrt();
    let b = (1.0 - abar).sqrt();
    x0.zip_map(noise, |x, n| a * x + b * n)
}

/// Sinusoidal embedding of an integer timestep.
fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / (half.max(2) - 1) as f64).exp();
        out.push((t as f64 * freq).sin());
        out.push((t as f64 * freq).cos());
    }
    out
}

/// Top-K Fourier synthesis of a time-domain representation: keep the K
/// strongest bins of the DFT (excluding DC) and rebuild
/// Σ A_k·cos(2π·k·t/T + Φ_k) from them.
pub fn fourier_synthesis(w: &[f64], top_k: usize) -> (Vec<f64>, Spectrum, Vec<usize>) {
    let t_len = w.len();
    let spectrum = dft(w);
    let half = t_len / 2;
    let mut bins: Vec<usize> = (1..=half).collect();
    bins.sort_by(|&a, &b| {
        spectrum
            .magnitude(b)
            .partial_cmp(&spectrum.magnitude(a))
            .unwrap()
            .then(a.cmp(&b))
    });
    let selected: Vec<usize> = bins.into_iter().take(top_k).collect();
    let mut s = vec![0.0; t_len];
    for &k in &selected {
        let g = bin_gain(k, t_len);
        for (t, st) in s.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * (k * t) as f64 / t_len as f64;
            // A·cos(θ + Φ) expanded linearly in (Re, Im).
            *st += g * (spectrum.re[k] * theta.cos() - spectrum.im[k] * theta.sin());
        }
    }
    (s, spectrum, selected)
}

/// Gradient of the synthesis w.r.t. the input representation.
fn fourier_synthesis_backward(ds: &[f64], selected: &[usize], t_len: usize) -> Vec<f64> {
    let mut dw = vec![0.0; t_len];
    for &k in selected {
        let g = bin_gain(k, t_len);
        let mut dre = 0.0;
        let mut dim = 0.0;
        for (t, &d) in ds.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * (k * t) as f64 / t_len as f64;
            dre += d * g * theta.cos();
            dim -= d * g * theta.sin();
        }
        for (tau, dwt) in dw.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * (k * tau) as f64 / t_len as f64;
            *dwt += dre * theta.cos() - dim * theta.sin();
        }
    }
    dw
}

fn bin_gain(k: usize, t_len: usize) -> f64 {
    if t_len % 2 == 0 && k == t_len / 2 {
        1.0 / t_len as f64
    } else {
        2.0 / t_len as f64
    }
}

/// The decomposed denoiser output.
#[derive(Debug, Clone)]
pub struct DenoiserOut {
    pub x0_hat: Array,
    pub trend: Array,
    pub season: Array,
    pub residual: Array,
}

/// Conditioned MLP denoiser with trend / Fourier-seasonality / residual heads.
#[derive(Debug, Clone)]
pub struct Denoiser {
    pub trunk: Mlp,
    pub trend_head: Linear,
    pub season_head: Linear,
    pub resid_head: Linear,
    pub t_len: usize,
    pub channels: usize,
    pub h_dim: usize,
    pub t_emb_dim: usize,
    pub poly_degree: usize,
    pub top_k: usize,
}

pub struct DenoiserCache {
    input: Array,
    trunk_cache: MlpCache,
    rep: Array,
    selected: Vec<Vec<usize>>,
    pub out: DenoiserOut,
}

impl Denoiser {
    pub fn new(cfg: &DiffusionConfig, rng: &mut RngState) -> Result<Denoiser> {
        cfg.validate()?;
        let input = cfg.t_len * cfg.channels + cfg.t_emb_dim + cfg.h_dim;
        let trunk = Mlp::new(
            "diff.trunk",
            &[input, cfg.trunk_hidden, cfg.trunk_hidden],
            Activation::LeakyRelu(0.2),
            rng,
        );
        let rep = cfg.trunk_hidden;
        Ok(Denoiser {
            trend_head: Linear::new("diff.trend", rep, cfg.channels * (cfg.poly_degree + 1), rng),
            season_head: Linear::new("diff.season", rep, cfg.t_len * cfg.channels, rng),
            resid_head: Linear::new("diff.resid", rep, cfg.t_len * cfg.channels, rng),
            trunk,
            t_len: cfg.t_len,
            channels: cfg.channels,
            h_dim: cfg.h_dim,
            t_emb_dim: cfg.t_emb_dim,
            poly_degree: cfg.poly_degree,
            top_k: cfg.top_k,
        })
    }

    /// Normalized time axis value c_t ∈ [0, 1].
    fn time_axis(&self, t: usize) -> f64 {
        t as f64 / (self.t_len - 1) as f64
    }

    fn build_input(&self, x_t: &Array, ts: &[usize], h: &Array) -> Result<Array> {
        let b = x_t.shape()[0];
        if x_t.shape() != [b, self.t_len, self.channels] || h.shape() != [b, self.h_dim] || ts.len() != b
        {
            return Err(Error::Dimension(format!(
                "denoiser inputs: x_t {:?}, h {:?}, {} timesteps",
                x_t.shape(),
                h.shape(),
                ts.len()
            )));
        }
        let flat = self.t_len * self.channels;
        let width = flat + self.t_emb_dim + self.h_dim;
        let mut input = Array::zeros(&[b, width]);
        for bi in 0..b {
            let dst = bi * width;
            input.values_mut()[dst..dst + flat]
                .copy_from_slice(&x_t.values()[bi * flat..(bi + 1) * flat]);
            let emb = timestep_embedding(ts[bi], self.t_emb_dim);
            input.values_mut()[dst + flat..dst + flat + self.t_emb_dim].copy_from_slice(&emb);
            input.values_mut()[dst + flat + self.t_emb_dim..dst + width]
                .copy_from_slice(&h.values()[bi * self.h_dim..(bi + 1) * self.h_dim]);
        }
        Ok(input)
    }

    /// Predicts x̂_0 = trend + seasonality + residual, with the parts kept
    /// separately inspectable.
    pub fn forward(&self, x_t: &Array, ts: &[usize], h: &Array) -> Result<DenoiserCache> {
        let b = x_t.shape()[0];
        let input = self.build_input(x_t, ts, h)?;
        let (rep, trunk_cache) = self.trunk.forward(&input)?;
        let coef = self.trend_head.forward(&rep)?;
        let wseas = self.season_head.forward(&rep)?;
        let resid_flat = self.resid_head.forward(&rep)?;

        let p1 = self.poly_degree + 1;
        let mut trend = Array::zeros(&[b, self.t_len, self.channels]);
        for bi in 0..b {
            for ch in 0..self.channels {
                for t in 0..self.t_len {
                    let c = self.time_axis(t);
                    let mut acc = 0.0;
                    let mut cp = 1.0;
                    for j in 0..p1 {
                        acc += coef.at2(bi, ch * p1 + j) * cp;
                        cp *= c;
                    }
                    trend.set3(bi, t, ch, acc);
                }
            }
        }

        let mut season = Array::zeros(&[b, self.t_len, self.channels]);
        let mut selected = Vec::with_capacity(b * self.channels);
        for bi in 0..b {
            for ch in 0..self.channels {
                let row: Vec<f64> = (0..self.t_len)
                    .map(|t| wseas.at2(bi, ch * self.t_len + t))
                    .collect();
                let (s, _, sel) = fourier_synthesis(&row, self.top_k);
                for (t, &v) in s.iter().enumerate() {
                    season.set3(bi, t, ch, v);
                }
                selected.push(sel);
            }
        }

        let mut residual = Array::zeros(&[b, self.t_len, self.channels]);
        for bi in 0..b {
            for ch in 0..self.channels {
                for t in 0..self.t_len {
                    residual.set3(bi, t, ch, resid_flat.at2(bi, ch * self.t_len + t));
                }
            }
        }

        let x0_hat = trend.add(&season)?.add(&residual)?;
        Ok(DenoiserCache {
            input,
            trunk_cache,
            rep,
            selected,
            out: DenoiserOut {
                x0_hat,
                trend,
                season,
                residual,
            },
        })
    }

    /// Backward from dL/dx̂_0; accumulates parameter gradients and returns
    /// dL/dh ([B × d_h]).
    pub fn backward(&mut self, cache: &DenoiserCache, dx0_hat: &Array) -> Result<Array> {
        let b = dx0_hat.shape()[0];
        let p1 = self.poly_degree + 1;

        let mut dcoef = Array::zeros(&[b, self.channels * p1]);
        for bi in 0..b {
            for ch in 0..self.channels {
                for j in 0..p1 {
                    let mut acc = 0.0;
                    for t in 0..self.t_len {
                        acc += dx0_hat.at3(bi, t, ch) * self.time_axis(t).powi(j as i32);
                    }
                    dcoef.set2(bi, ch * p1 + j, acc);
                }
            }
        }

        let mut dwseas = Array::zeros(&[b, self.t_len * self.channels]);
        for bi in 0..b {
            for ch in 0..self.channels {
                let ds: Vec<f64> = (0..self.t_len).map(|t| dx0_hat.at3(bi, t, ch)).collect();
                let sel = &cache.selected[bi * self.channels + ch];
                let dw = fourier_synthesis_backward(&ds, sel, self.t_len);
                for (t, &v) in dw.iter().enumerate() {
                    dwseas.set2(bi, ch * self.t_len + t, v);
                }
            }
        }

        let mut dresid = Array::zeros(&[b, self.t_len * self.channels]);
        for bi in 0..b {
            for ch in 0..self.channels {
                for t in 0..self.t_len {
                    dresid.set2(bi, ch * self.t_len + t, dx0_hat.at3(bi, t, ch));
                }
            }
        }

        let mut drep = self.trend_head.backward(&cache.rep, &dcoef)?;
        drep = drep.add(&self.season_head.backward(&cache.rep, &dwseas)?)?;
        drep = drep.add(&self.resid_head.backward(&cache.rep, &dresid)?)?;
        let dinput = self.trunk.backward(&cache.trunk_cache, &drep)?;

        // Slice out the h block of the input gradient.
        let flat = self.t_len * self.channels;
        let width = flat + self.t_emb_dim + self.h_dim;
        let mut dh = Array::zeros(&[b, self.h_dim]);
        for bi in 0..b {
            let src = bi * width + flat + self.t_emb_dim;
            for j in 0..self.h_dim {
                dh.values_mut()[bi * self.h_dim + j] = dinput.values()[src + j];
            }
        }
        debug_assert_eq!(cache.input.shape(), dinput.shape());
        Ok(dh)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut ps = self.trunk.params_mut();
        ps.extend(self.trend_head.params_mut());
        ps.extend(self.season_head.params_mut());
        ps.extend(self.resid_head.params_mut());
        ps
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut ps = self.trunk.params();
        ps.extend(self.trend_head.params());
        ps.extend(self.season_head.params());
        ps.extend(self.resid_head.params());
        ps
    }
}

/// Guarded DFT magnitudes of every (batch, channel) row: [B × d × T].
fn spectrum_magnitudes(x: &Array, t_len: usize, channels: usize) -> Array {
    let b = x.shape()[0];
    let mut out = Array::zeros(&[b, channels, t_len]);
    for bi in 0..b {
        for ch in 0..channels {
            let row: Vec<f64> = (0..t_len).map(|t| x.at3(bi, t, ch)).collect();
            let sp = dft(&row);
            for k in 0..t_len {
                let m = (sp.re[k] * sp.re[k] + sp.im[k] * sp.im[k] + MAG_EPS).sqrt();
                out.set3(bi, ch, k, m);
            }
        }
    }
    out
}

/// The training objective for one predicted batch:
/// λ1·‖x0 − x̂0‖ + λ2·‖|DFT(x0)| − |DFT(x̂0)|‖ with the norm selected by
/// `use_l1` (mean-reduced).
pub fn reconstruction_loss(
    x0_hat: &Array,
    x0: &Array,
    lambda_time: f64,
    lambda_freq: f64,
    use_l1: bool,
) -> Result<f64> {
    let time = if use_l1 { loss::l1(x0_hat, x0)? } else { loss::mse(x0_hat, x0)? };
    let mut total = lambda_time * time;
    if lambda_freq != 0.0 {
        let (b, t_len, channels) = (x0.shape()[0], x0.shape()[1], x0.shape()[2]);
        debug_assert_eq!(b, x0_hat.shape()[0]);
        let m_hat = spectrum_magnitudes(x0_hat, t_len, channels);
        let m_ref = spectrum_magnitudes(x0, t_len, channels);
        let freq = if use_l1 { loss::l1(&m_hat, &m_ref)? } else { loss::mse(&m_hat, &m_ref)? };
        total += lambda_freq * freq;
    }
    if !total.is_finite() {
        return Err(Error::Diverged(format!("diffusion loss is {total}")));
    }
    Ok(total)
}

/// Gradient of [`reconstruction_loss`] w.r.t. x̂0.
pub fn reconstruction_loss_backward(
    x0_hat: &Array,
    x0: &Array,
    lambda_time: f64,
    lambda_freq: f64,
    use_l1: bool,
) -> Result<Array> {
    let dtime = if use_l1 {
        loss::l1_backward(x0_hat, x0)?
    } else {
        loss::mse_backward(x0_hat, x0)?
    };
    let mut grad = dtime.scale(lambda_time);
    if lambda_freq != 0.0 {
        let (b, t_len, channels) = (x0.shape()[0], x0.shape()[1], x0.shape()[2]);
        let m_hat = spectrum_magnitudes(x0_hat, t_len, channels);
        let m_ref = spectrum_magnitudes(x0, t_len, channels);
        let dmag = if use_l1 {
            loss::l1_backward(&m_hat, &m_ref)?
        } else {
            loss::mse_backward(&m_hat, &m_ref)?
        };
        // d|X_k| / dx_τ = (Re_k·cosθ_kτ − Im_k·sinθ_kτ) / |X_k|
        for bi in 0..b {
            for ch in 0..channels {
                let row: Vec<f64> = (0..t_len).map(|t| x0_hat.at3(bi, t, ch)).collect();
                let sp = dft(&row);
                for k in 0..t_len {
                    let d = dmag.at3(bi, ch, k) * lambda_freq;
                    if d == 0.0 {
                        continue;
                    }
                    let mag = m_hat.at3(bi, ch, k);
                    for tau in 0..t_len {
                        let theta = 2.0 * std::f64::consts::PI * (k * tau) as f64 / t_len as f64;
                        let v = grad.at3(bi, tau, ch)
                            + d * (sp.re[k] * theta.cos() - sp.im[k] * theta.sin()) / mag;
                        grad.set3(bi, tau, ch, v);
                    }
                }
            }
        }
    }
    Ok(grad)
}

/// The diffusion model: schedule, denoiser, and an EMA copy used at sampling.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub config: DiffusionConfig,
    pub betas: Vec<f64>,
    pub alphas_bar: Vec<f64>,
    pub denoiser: Denoiser,
    pub ema: Denoiser,
}

impl DiffusionModel {
    pub fn new(config: DiffusionConfig, rng: &mut RngState) -> Result<DiffusionModel> {
        config.validate()?;
        let (betas, alphas_bar) = cosine_beta_schedule(config.t_steps);
        let denoiser = Denoiser::new(&config, rng)?;
        let ema = denoiser.clone();
        Ok(DiffusionModel {
            config,
            betas,
            alphas_bar,
            denoiser,
            ema,
        })
    }

    /// Draws per-sample timesteps and noise, then evaluates the objective.
    /// Deterministic given `ts` and `noise`; forward only.
    pub fn loss_value(&self, x0: &Array, h: &Array, ts: &[usize], noise: &Array) -> Result<f64> {
        let x_t = self.diffuse_batch(x0, ts, noise)?;
        let cache = self.denoiser.forward(&x_t, ts, h)?;
        reconstruction_loss(
            &cache.out.x0_hat,
            x0,
            self.config.lambda_time,
            self.config.lambda_freq,
            self.config.use_l1,
        )
    }

    /// Loss with parameter gradients accumulated; returns (loss, dL/dh).
    pub fn loss_and_grads(
        &mut self,
        x0: &Array,
        h: &Array,
        ts: &[usize],
        noise: &Array,
    ) -> Result<(f64, Array)> {
        let x_t = self.diffuse_batch(x0, ts, noise)?;
        let cache = self.denoiser.forward(&x_t, ts, h)?;
        let loss = reconstruction_loss(
            &cache.out.x0_hat,
            x0,
            self.config.lambda_time,
            self.config.lambda_freq,
            self.config.use_l1,
        )?;
        let dx0_hat = reconstruction_loss_backward(
            &cache.out.x0_hat,
            x0,
            self.config.lambda_time,
            self.config.lambda_freq,
            self.config.use_l1,
        )?;
        let dh = self.denoiser.backward(&cache, &dx0_hat)?;
        Ok((loss, dh))
    }

    /// Per-sample forward diffusion q(x_t | x_0).
    pub fn diffuse_batch(&self, x0: &Array, ts: &[usize], noise: &Array) -> Result<Array> {
        let b = x0.shape()[0];
        if ts.len() != b {
            return Err(Error::Usage(format!("{} timesteps for batch of {b}", ts.len())));
        }
        let mut out = Array::zeros(x0.shape());
        let per = x0.len() / b;
        for (bi, &t) in ts.iter().enumerate() {
            if t == 0 || t > self.alphas_bar.len() {
                return Err(Error::Usage(format!(
                    "diffusion step {t} outside 1..={}",
                    self.alphas_bar.len()
                )));
            }
            let abar = self.alphas_bar[t - 1];
            let (a, bfac) = (abar.sqrt(), (1.0 - abar).sqrt());
            for i in 0..per {
                let idx = bi * per + i;
                out.values_mut()[idx] = a * x0.values()[idx] + bfac * noise.values()[idx];
            }
        }
        Ok(out)
    }

    /// Blends the EMA weights toward the current denoiser.
    pub fn ema_update(&mut self) {
        let decay = self.config.ema_decay;
        let current = self.denoiser.params();
        for (ema_p, p) in self.ema.params_mut().into_iter().zip(current) {
            for (e, v) in ema_p.value.values_mut().iter_mut().zip(p.value.values()) {
                *e = decay * *e + (1.0 - decay) * v;
            }
        }
    }

    /// Ancestral sampling from pure noise using the EMA denoiser; outputs
    /// clamped to [0, 1].
    pub fn sample(&self, h: &Array, rng: &mut RngState) -> Result<Array> {
        let b = h.shape()[0];
        let shape = [b, self.config.t_len, self.config.channels];
        let mut x = Array::from_fn(&shape, |_| rng.normal());
        for t in (1..=self.config.t_steps).rev() {
            let ts = vec![t; b];
            let cache = self.ema.forward(&x, &ts, h)?;
            let x0_hat = cache.out.x0_hat.map(|v| v.clamp(0.0, 1.0));
            let beta = self.betas[t - 1];
            let abar = self.alphas_bar[t - 1];
            let abar_prev = if t > 1 { self.alphas_bar[t - 2] } else { 1.0 };
            if t > 1 {
                let coef0 = abar_prev.sqrt() * beta / (1.0 - abar);
                let coefx = (1.0 - beta).sqrt() * (1.0 - abar_prev) / (1.0 - abar);
                let var = beta * (1.0 - abar_prev) / (1.0 - abar);
                let std = var.max(0.0).sqrt();
                x = Array::from_fn(&shape, |i| {
                    coef0 * x0_hat.values()[i] + coefx * x.values()[i] + std * rng.normal()
                });
            } else {
                x = x0_hat;
            }
        }
        Ok(x.map(|v| v.clamp(0.0, 1.0)))
    }
}
