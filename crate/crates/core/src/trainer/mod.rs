//! Joint training of the context encoder and a generative model under
//! L_total = L_gen + λ·L_aux, plus synthetic dataset generation through the
//! normalizer's inverse transform.

pub mod checkpoint;

use chrono::{Datelike, NaiveDate};

use crate::context_encoder::{aux_loss, aux_loss_backward, ContextEncoderModel};
use crate::data::{ContextVocabulary, Dataset, LoadProfile};
use crate::error::{Error, Result};
use crate::generators::diffusion::{DiffusionConfig, DiffusionModel};
use crate::generators::gan::{GanConfig, GanModel};
use crate::generators::{assemble_conditioned_noise, conditioned_noise_h_grad};
use crate::normalizer::{
    compute_group_stats, denormalize, normalize, train_normalizer, NormStats, NormalizerHyper,
    NormalizerModel, DEFAULT_DELTA,
};
use crate::numerics::{adam_step, AdamConfig, Array, RngState};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Baseline,
    Acgan,
    Diffusion,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Acgan => "acgan",
            ModelKind::Diffusion => "diffusion",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "baseline" => Ok(ModelKind::Baseline),
            "acgan" => Ok(ModelKind::Acgan),
            "diffusion" => Ok(ModelKind::Diffusion),
            other => Err(Error::Config(format!(
                "unknown model kind {other:?} (expected baseline, acgan, or diffusion)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Result<Preset> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

/// Everything a training run needs beyond the dataset itself.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub preset: Preset,
    /// Aux reconstruction loss weight λ.
    pub lambda_aux: f64,
    /// Discriminator auxiliary classification weight γ.
    pub gamma: f64,
    /// Generator auxiliary classification weight.
    pub lambda_gen: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub gen_lr: f64,
    pub disc_lr: f64,
    pub diffusion_lr: f64,
    /// Number of diffusion steps.
    pub t_steps: usize,
    /// Diffusion time-domain loss weight λ1.
    pub lambda_time: f64,
    /// Diffusion frequency-domain loss weight λ2.
    pub lambda_freq: f64,
    /// L1 reconstruction norm when true.
    pub use_l1: bool,
    pub ema_decay: f64,
    pub noise_dim: usize,
    /// Per-variable conditioning embedding dimension D.
    pub embed_dim: usize,
    /// Compressed context embedding dimension d_h.
    pub h_dim: usize,
    pub encoder_hidden: usize,
    pub head_hidden: usize,
    pub gen_widths: [usize; 3],
    pub disc_widths: [usize; 3],
    pub trunk_hidden: usize,
    pub t_emb_dim: usize,
    pub poly_degree: usize,
    pub top_k: usize,
    pub normalizer_steps: usize,
    pub normalizer_lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Small, fast settings for desk-scale runs (T = 24 faux profiles).
    pub fn desk(model: ModelKind) -> TrainConfig {
        TrainConfig {
            model,
            preset: Preset::Desk,
            lambda_aux: 0.1,
            gamma: 1.0,
            lambda_gen: 1.0,
            epochs: 200,
            batch_size: 128,
            gen_lr: 3e-4,
            disc_lr: 1e-4,
            diffusion_lr: 1e-3,
            t_steps: 100,
            lambda_time: 1.0,
            lambda_freq: 0.3,
            use_l1: true,
            ema_decay: 0.99,
            noise_dim: 64,
            embed_dim: 16,
            h_dim: 16,
            encoder_hidden: 64,
            head_hidden: 32,
            gen_widths: [64, 32, 16],
            disc_widths: [16, 32, 64],
            trunk_hidden: 96,
            t_emb_dim: 32,
            poly_degree: 3,
            top_k: 6,
            normalizer_steps: 2500,
            normalizer_lr: 3e-3,
            seed: 0,
        }
    }

    /// Full-scale hyperparameters from the published tables.
    pub fn paper(model: ModelKind) -> TrainConfig {
        TrainConfig {
            model,
            preset: Preset::Paper,
            lambda_aux: 0.1,
            gamma: 1.0,
            lambda_gen: 1.0,
            epochs: 5000,
            batch_size: 1024,
            gen_lr: 3e-4,
            disc_lr: 1e-4,
            diffusion_lr: 1e-4,
            t_steps: 1000,
            lambda_time: 1.0,
            lambda_freq: 0.3,
            use_l1: true,
            ema_decay: 0.99,
            noise_dim: 256,
            embed_dim: 16,
            h_dim: 16,
            encoder_hidden: 128,
            head_hidden: 64,
            gen_widths: [256, 128, 64],
            disc_widths: [64, 128, 256],
            trunk_hidden: 128,
            t_emb_dim: 32,
            poly_degree: 3,
            top_k: 24,
            normalizer_steps: 2500,
            normalizer_lr: 3e-3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_aux < 0.0 {
            return Err(Error::Config("lambda_aux must be non-negative".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Flat key/value form, used by config files and the checkpoint format.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let widths = |w: &[usize; 3]| format!("{},{},{}", w[0], w[1], w[2]);
        vec![
            ("model".into(), self.model.as_str().into()),
            ("preset".into(), self.preset.as_str().into()),
            ("lambda_aux".into(), self.lambda_aux.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("lambda_gen".into(), self.lambda_gen.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("gen_lr".into(), self.gen_lr.to_string()),
            ("disc_lr".into(), self.disc_lr.to_string()),
            ("diffusion_lr".into(), self.diffusion_lr.to_string()),
            ("t_steps".into(), self.t_steps.to_string()),
            ("lambda_time".into(), self.lambda_time.to_string()),
            ("lambda_freq".into(), self.lambda_freq.to_string()),
            ("use_l1".into(), self.use_l1.to_string()),
            ("ema_decay".into(), self.ema_decay.to_string()),
            ("noise_dim".into(), self.noise_dim.to_string()),
            ("embed_dim".into(), self.embed_dim.to_string()),
            ("h_dim".into(), self.h_dim.to_string()),
            ("encoder_hidden".into(), self.encoder_hidden.to_string()),
            ("head_hidden".into(), self.head_hidden.to_string()),
            ("gen_widths".into(), widths(&self.gen_widths)),
            ("disc_widths".into(), widths(&self.disc_widths)),
            ("trunk_hidden".into(), self.trunk_hidden.to_string()),
            ("t_emb_dim".into(), self.t_emb_dim.to_string()),
            ("poly_degree".into(), self.poly_degree.to_string()),
            ("top_k".into(), self.top_k.to_string()),
            ("normalizer_steps".into(), self.normalizer_steps.to_string()),
            ("normalizer_lr".into(), self.normalizer_lr.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }

    /// Reconstructs a config: the `model` and `preset` keys pick the base
    /// preset, every other key overrides one field. Unknown keys are an error.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<TrainConfig> {
        let find = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let model = ModelKind::parse(find("model").unwrap_or("diffusion"))?;
        let preset = Preset::parse(find("preset").unwrap_or("desk"))?;
        let mut cfg = match preset {
            Preset::Desk => TrainConfig::desk(model),
            Preset::Paper => TrainConfig::paper(model),
        };
        for (key, value) in pairs {
            let bad = |what: &str| Error::Config(format!("bad {what} value {value:?} for key {key}"));
            match key.as_str() {
                "model" | "preset" => {}
                "lambda_aux" => cfg.lambda_aux = value.parse().map_err(|_| bad("float"))?,
                "gamma" => cfg.gamma = value.parse().map_err(|_| bad("float"))?,
                "lambda_gen" => cfg.lambda_gen = value.parse().map_err(|_| bad("float"))?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad("integer"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("integer"))?,
                "gen_lr" => cfg.gen_lr = value.parse().map_err(|_| bad("float"))?,
                "disc_lr" => cfg.disc_lr = value.parse().map_err(|_| bad("float"))?,
                "diffusion_lr" => cfg.diffusion_lr = value.parse().map_err(|_| bad("float"))?,
                "t_steps" => cfg.t_steps = value.parse().map_err(|_| bad("integer"))?,
                "lambda_time" => cfg.lambda_time = value.parse().map_err(|_| bad("float"))?,
                "lambda_freq" => cfg.lambda_freq = value.parse().map_err(|_| bad("float"))?,
                "use_l1" => cfg.use_l1 = value.parse().map_err(|_| bad("bool"))?,
                "ema_decay" => cfg.ema_decay = value.parse().map_err(|_| bad("float"))?,
                "noise_dim" => cfg.noise_dim = value.parse().map_err(|_| bad("integer"))?,
                "embed_dim" => cfg.embed_dim = value.parse().map_err(|_| bad("integer"))?,
                "h_dim" => cfg.h_dim = value.parse().map_err(|_| bad("integer"))?,
                "encoder_hidden" => cfg.encoder_hidden = value.parse().map_err(|_| bad("integer"))?,
                "head_hidden" => cfg.head_hidden = value.parse().map_err(|_| bad("integer"))?,
                "gen_widths" => cfg.gen_widths = parse_widths(value)?,
                "disc_widths" => cfg.disc_widths = parse_widths(value)?,
                "trunk_hidden" => cfg.trunk_hidden = value.parse().map_err(|_| bad("integer"))?,
                "t_emb_dim" => cfg.t_emb_dim = value.parse().map_err(|_| bad("integer"))?,
                "poly_degree" => cfg.poly_degree = value.parse().map_err(|_| bad("integer"))?,
                "top_k" => cfg.top_k = value.parse().map_err(|_| bad("integer"))?,
                "normalizer_steps" => cfg.normalizer_steps = value.parse().map_err(|_| bad("integer"))?,
                "normalizer_lr" => cfg.normalizer_lr = value.parse().map_err(|_| bad("float"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
                other => {
                    return Err(Error::Config(format!("unknown train config key {other:?}")))
                }
            }
        }
        Ok(cfg)
    }
}

fn parse_widths(value: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("widths need 3 comma-separated values, got {value:?}")));
    }
    let mut out = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad width {p:?}")))?;
    }
    Ok(out)
}

/// Per-epoch loss record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_gen: f64,
    pub loss_aux: f64,
    pub loss_total: f64,
    pub loss_disc: Option<f64>,
}

/// Renders the training log as `epoch,loss_gen,loss_aux,loss_total[,loss_disc]`.
pub fn log_to_csv(log: &[EpochLog]) -> String {
    let has_disc = log.iter().any(|e| e.loss_disc.is_some());
    let mut out = String::from(if has_disc {
        "epoch,loss_gen,loss_aux,loss_total,loss_disc\n"
    } else {
        "epoch,loss_gen,loss_aux,loss_total\n"
    });
    for e in log {
        out.push_str(&format!("{},{},{},{}", e.epoch, e.loss_gen, e.loss_aux, e.loss_total));
        if has_disc {
            out.push_str(&format!(",{}", e.loss_disc.unwrap_or(f64::NAN)));
        }
        out.push('\n');
    }
    out
}

pub fn log_from_csv(text: &str) -> Result<Vec<EpochLog>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(Error::DataRow {
                row: lineno + 1,
                message: "training log rows need 4 or 5 fields".into(),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::DataRow {
                row: lineno + 1,
                message: format!("bad number {s:?}"),
            })
        };
        out.push(EpochLog {
            epoch: fields[0].parse().map_err(|_| Error::DataRow {
                row: lineno + 1,
                message: format!("bad epoch {:?}", fields[0]),
            })?,
            loss_gen: parse(fields[1])?,
            loss_aux: parse(fields[2])?,
            loss_total: parse(fields[3])?,
            loss_disc: if fields.len() == 5 { Some(parse(fields[4])?) } else { None },
        });
    }
    Ok(out)
}

/// A trained generator: either GAN family or diffusion.
#[derive(Debug, Clone)]
pub enum GeneratorState {
    Gan(GanModel),
    Diffusion(DiffusionModel),
}

/// Trains the normalizer, then the generator jointly with the context
/// encoder. Normalization during training uses the true group statistics;
/// the parametric normalizer serves generation-time inversion.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<Checkpoint> {
    config.validate()?;
    dataset.validate()?;
    let t_len = dataset.t_len();
    let d = dataset.channels();
    let vocab = &dataset.vocabulary;
    let mut rng = RngState::new(config.seed);

    // Stage 1: supervised normalizer on the observed group statistics.
    let group_stats = compute_group_stats(dataset, DEFAULT_DELTA)?;
    let mut normalizer = NormalizerModel::new(vocab, d, DEFAULT_DELTA, &mut rng);
    let stats_pairs: Vec<(Vec<usize>, NormStats)> =
        group_stats.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    train_normalizer(
        &mut normalizer,
        &stats_pairs,
        &NormalizerHyper {
            steps: config.normalizer_steps,
            lr: config.normalizer_lr,
            seed: config.seed,
        },
    )?;

    // Normalized training series, per profile, via true group stats.
    let normalized: Vec<Array> = dataset
        .profiles
        .iter()
        .map(|p| normalize(&p.series, &group_stats[&p.context_codes], DEFAULT_DELTA))
        .collect::<Result<_>>()?;

    let mut encoder = ContextEncoderModel::with_widths(
        vocab,
        config.embed_dim,
        config.h_dim,
        config.encoder_hidden,
        config.head_hidden,
        &mut rng,
    )?;

    let mut generator = match config.model {
        ModelKind::Baseline | ModelKind::Acgan => GeneratorState::Gan(GanModel::new(
            GanConfig {
                t_len,
                channels: d,
                noise_dim: config.noise_dim,
                h_dim: config.h_dim,
                gen_widths: config.gen_widths,
                disc_widths: config.disc_widths,
                is_acgan: config.model == ModelKind::Acgan,
                gamma: config.gamma,
                lambda_gen: config.lambda_gen,
            },
            &vocab.cardinalities(),
            &mut rng,
        )?),
        ModelKind::Diffusion => GeneratorState::Diffusion(DiffusionModel::new(
            DiffusionConfig {
                t_len,
                channels: d,
                h_dim: config.h_dim,
                t_steps: config.t_steps,
                trunk_hidden: config.trunk_hidden,
                t_emb_dim: config.t_emb_dim,
                poly_degree: config.poly_degree,
                top_k: config.top_k,
                lambda_time: config.lambda_time,
                lambda_freq: config.lambda_freq,
                use_l1: config.use_l1,
                ema_decay: config.ema_decay,
            },
            &mut rng,
        )?),
    };

    let mut log = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_gen = 0.0;
        let mut epoch_aux = 0.0;
        let mut epoch_disc = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            // GAN batchnorm needs at least two samples.
            if chunk.len() < 2 {
                continue;
            }
            let codes: Vec<Vec<usize>> = chunk
                .iter()
                .map(|&i| dataset.profiles[i].context_codes.clone())
                .collect();
            let x0 = stack_series(&normalized, chunk, t_len, d);
            let step = train_batch(
                config,
                &mut encoder,
                &mut generator,
                &codes,
                &x0,
                &mut rng,
            )?;
            epoch_gen += step.loss_gen;
            epoch_aux += step.loss_aux;
            epoch_disc += step.loss_disc;
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::Data(format!(
                "epoch {epoch}: no batch of size >= 2 (dataset of {} with batch_size {})",
                dataset.len(),
                config.batch_size
            )));
        }
        let n = batches as f64;
        let loss_gen = epoch_gen / n;
        let loss_aux = epoch_aux / n;
        let entry = EpochLog {
            epoch,
            loss_gen,
            loss_aux,
            loss_total: loss_gen + config.lambda_aux * loss_aux,
            loss_disc: match generator {
                GeneratorState::Gan(_) => Some(epoch_disc / n),
                GeneratorState::Diffusion(_) => None,
            },
        };
        if !entry.loss_total.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite training loss at epoch {epoch}: {entry:?}"
            )));
        }
        log.push(entry);
    }

    Ok(Checkpoint {
        version: checkpoint::FORMAT_VERSION,
        config: config.clone(),
        vocabulary: vocab.clone(),
        t_len,
        channels: d,
        normalizer,
        encoder,
        generator,
        rng_state: rng.state(),
        log,
    })
}

struct BatchLosses {
    loss_gen: f64,
    loss_aux: f64,
    loss_disc: f64,
}

fn train_batch(
    config: &TrainConfig,
    encoder: &mut ContextEncoderModel,
    generator: &mut GeneratorState,
    codes: &[Vec<usize>],
    x0: &Array,
    rng: &mut RngState,
) -> Result<BatchLosses> {
    let b = codes.len();
    let enc_cache = encoder.forward_batch(codes)?;
    let h = enc_cache.h.clone();

    let (loss_gen, loss_disc, dh_gen, model_lr) = match generator {
        GeneratorState::Gan(gan) => {
            let t_len = gan.config.t_len;
            let noise_dim = gan.config.noise_dim;
            let z = replicated_noise(b, t_len, noise_dim, rng);
            let z_star = assemble_conditioned_noise(&z, &h)?.z_star;
            let gen_cache = gan.generator.forward_train(&z_star)?;

            // Discriminator step on its own loss; the fake batch is detached.
            let fake = gen_cache.output.clone();
            let d_loss = gan.discriminator_loss_and_grads(x0, &fake, codes, config.gamma)?;
            adam_step(
                &mut gan.discriminator.params_mut(),
                &AdamConfig::with_lr(config.disc_lr),
            )?;

            // Generator step: backprop through the (frozen) discriminator.
            let (g_loss, dz_star) =
                gan.generator_loss_and_grads(&gen_cache, codes, config.lambda_gen)?;
            let dh = conditioned_noise_h_grad(&dz_star, noise_dim, config.h_dim);
            (g_loss.total, d_loss.total, dh, config.gen_lr)
        }
        GeneratorState::Diffusion(diff) => {
            let ts: Vec<usize> = (0..b).map(|_| 1 + rng.below(config.t_steps)).collect();
            let noise = Array::from_fn(x0.shape(), |_| rng.normal());
            let (loss, dh) = diff.loss_and_grads(x0, &h, &ts, &noise)?;
            (loss, 0.0, dh, config.diffusion_lr)
        }
    };

    // Aux reconstruction loss; at λ = 0 the heads are never touched, so the
    // context encoder receives exactly zero gradient from them.
    let mut loss_aux = 0.0;
    let dh_total = if config.lambda_aux != 0.0 {
        let heads = encoder.heads_forward(&h)?;
        loss_aux = aux_loss(&heads.logits, codes)?;
        let dlogits = aux_loss_backward(&heads.logits, codes)?;
        let dh_aux = encoder.heads_backward(&heads, &dlogits, config.lambda_aux)?;
        dh_gen.add(&dh_aux)?
    } else {
        dh_gen
    };
    encoder.backward_batch(&enc_cache, &dh_total)?;

    // One Adam step over generator-side and context-encoder parameters. The
    // reconstruction heads only participate while the aux loss is active.
    {
        let cfg = AdamConfig::with_lr(model_lr);
        let with_heads = config.lambda_aux != 0.0;
        match generator {
            GeneratorState::Gan(gan) => {
                let mut params = gan.generator.params_mut();
                params.extend(if with_heads { encoder.params_mut() } else { encoder.trunk_params_mut() });
                adam_step(&mut params, &cfg)?;
            }
            GeneratorState::Diffusion(diff) => {
                let mut params = diff.denoiser.params_mut();
                params.extend(if with_heads { encoder.params_mut() } else { encoder.trunk_params_mut() });
                adam_step(&mut params, &cfg)?;
                diff.ema_update();
            }
        }
    }

    Ok(BatchLosses {
        loss_gen,
        loss_aux,
        loss_disc,
    })
}

/// Time-constant noise tensor [B × T × D_z]: one draw per sample, replicated
/// across the time axis like the context embedding.
fn replicated_noise(b: usize, t_len: usize, noise_dim: usize, rng: &mut RngState) -> Array {
    let mut z = Array::zeros(&[b, t_len, noise_dim]);
    for bi in 0..b {
        let row: Vec<f64> = (0..noise_dim).map(|_| rng.normal()).collect();
        for ti in 0..t_len {
            let dst = (bi * t_len + ti) * noise_dim;
            z.values_mut()[dst..dst + noise_dim].copy_from_slice(&row);
        }
    }
    z
}

fn stack_series(normalized: &[Array], idxs: &[usize], t_len: usize, d: usize) -> Array {
    let mut out = Array::zeros(&[idxs.len(), t_len, d]);
    for (bi, &i) in idxs.iter().enumerate() {
        let src = normalized[i].values();
        let dst = bi * t_len * d;
        out.values_mut()[dst..dst + t_len * d].copy_from_slice(src);
    }
    out
}

/// Generates a synthetic dataset: for each requested context, samples from
/// the generator in normalized space and inverts through the predicted
/// statistics. No real series is consumed.
pub fn generate_dataset(
    checkpoint: &Checkpoint,
    contexts: &[Vec<usize>],
    per_context: usize,
    seed: u64,
) -> Result<Dataset> {
    if contexts.is_empty() || per_context == 0 {
        return Err(Error::Usage("generation needs at least one context and one sample".into()));
    }
    let vocab = &checkpoint.vocabulary;
    let mut rng = RngState::new(seed);
    let mut profiles = Vec::with_capacity(contexts.len() * per_context);
    for (ci, codes) in contexts.iter().enumerate() {
        vocab.check_codes(codes)?;
        let h = checkpoint.encoder.encode(codes)?.h;
        let stats = checkpoint.normalizer.predict_stats(codes)?;
        let h_rep = Array::from_fn(&[per_context, h.len()], |i| h.values()[i % h.len()]);
        let batch = match &checkpoint.generator {
            GeneratorState::Gan(gan) => {
                let z = replicated_noise(per_context, checkpoint.t_len, gan.config.noise_dim, &mut rng);
                let z_star = assemble_conditioned_noise(&z, &h_rep)?.z_star;
                gan.generate(&z_star)?
            }
            GeneratorState::Diffusion(diff) => diff.sample(&h_rep, &mut rng)?,
        };
        let date = date_for_codes(vocab, codes);
        for si in 0..per_context {
            let mut series = Array::zeros(&[checkpoint.t_len, checkpoint.channels]);
            for t in 0..checkpoint.t_len {
                for ch in 0..checkpoint.channels {
                    series.set2(t, ch, batch.at3(si, t, ch));
                }
            }
            let kwh = denormalize(&series, &stats, checkpoint.normalizer.delta)?;
            kwh.ensure_finite("denormalized synthetic series")?;
            profiles.push(LoadProfile {
                series: kwh,
                date,
                household_id: format!("syn{ci:04}x{si:03}"),
                context_codes: codes.clone(),
            });
        }
    }
    Dataset::new(profiles, vocab.clone())
}

/// A calendar date consistent with the month/weekday codes of a context, so
/// emitted CSVs re-derive the same codes.
fn date_for_codes(vocab: &ContextVocabulary, codes: &[usize]) -> NaiveDate {
    let month = vocab
        .variable_index("month")
        .map(|i| codes[i])
        .unwrap_or(0);
    let weekday = vocab
        .variable_index("weekday")
        .map(|i| codes[i])
        .unwrap_or(0);
    let mut date = NaiveDate::from_ymd_opt(2018, month as u32 + 1, 1).expect("valid month");
    while date.weekday().num_days_from_monday() as usize != weekday {
        date = date.succ_opt().expect("date in range");
    }
    date
}
