//! GAN baseline and ACGAN. The generator projects the conditioned noise
//! through a fully connected layer and three transposed convolutions with
//! batch normalization, leaky ReLU, and a sigmoid output. The discriminator
//! mirrors it with strided convolutions, a real/fake head, and (for ACGAN)
//! one auxiliary classification head per context variable. The baseline is
//! the same architecture with every auxiliary term omitted.

use crate::error::{Error, Result};
use crate::numerics::batchnorm::BatchNormCache;
use crate::numerics::loss::{binary_cross_entropy, binary_cross_entropy_backward};
use crate::numerics::{Activation, Array, BatchNorm1d, Conv1d, Linear, Parameter, RngState};

const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;
const LEAKY: f64 = 0.2;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct GanConfig {
    pub t_len: usize,
    pub channels: usize,
    pub noise_dim: usize,
    pub h_dim: usize,
    /// Generator feature widths, widest first (e.g. 256 → 128 → 64 → d).
    pub gen_widths: [usize; 3],
    /// Discriminator feature widths, narrowest first (d → 64 → 128 → 256).
    pub disc_widths: [usize; 3],
    /// ACGAN when true; plain baseline otherwise.
    pub is_acgan: bool,
    /// Auxiliary classification weight in the discriminator loss.
    pub gamma: f64,
    /// Auxiliary classification weight in the generator loss.
    pub lambda_gen: f64,
}

impl GanConfig {
    pub fn upsample_factor() -> usize {
        8 // three stride-2 stages
    }

    pub fn validate(&self) -> Result<()> {
        let f = Self::upsample_factor();
        if self.t_len % f != 0 || self.t_len / f == 0 {
            return Err(Error::Config(format!(
                "gan: series length {} is not a positive multiple of the upsampling factor {f}",
                self.t_len
            )));
        }
        Ok(())
    }
}

/// Generator: FC projection, then three stride-2 transposed convolutions.
#[derive(Debug, Clone)]
pub struct Generator {
    pub proj: Linear,
    pub deconvs: Vec<Conv1d>,
    pub bns: Vec<BatchNorm1d>,
    pub t0: usize,
    pub c0: usize,
    pub feature_dim: usize,
    pub t_len: usize,
    pub channels: usize,
}

pub struct GenCache {
    z_feat: Array,
    proj_pre: Array,
    stage_inputs: Vec<Array>,
    bn_caches: Vec<BatchNormCache>,
    bn_pre: Vec<Array>,
    final_pre: Array,
    pub output: Array,
}

impl Generator {
    pub fn new(cfg: &GanConfig, rng: &mut RngState) -> Result<Generator> {
        cfg.validate()?;
        let t0 = cfg.t_len / GanConfig::upsample_factor();
        let [c0, c1, c2] = cfg.gen_widths;
        let feature_dim = cfg.noise_dim + cfg.h_dim;
        let proj = Linear::new("gen.proj", feature_dim, c0 * t0, rng);
        let deconvs = vec![
            Conv1d::new_transposed("gen.deconv0", c0, c1, KERNEL, STRIDE, PAD, rng),
            Conv1d::new_transposed("gen.deconv1", c1, c2, KERNEL, STRIDE, PAD, rng),
            Conv1d::new_transposed("gen.deconv2", c2, cfg.channels, KERNEL, STRIDE, PAD, rng),
        ];
        let bns = vec![
            BatchNorm1d::new("gen.bn0", c1, BN_MOMENTUM),
            BatchNorm1d::new("gen.bn1", c2, BN_MOMENTUM),
        ];
        Ok(Generator {
            proj,
            deconvs,
            bns,
            t0,
            c0,
            feature_dim,
            t_len: cfg.t_len,
            channels: cfg.channels,
        })
    }

    /// Per-sample feature vector: the first time slice of z*. Noise is
    /// replicated across time like the context embedding, so this slice
    /// carries the whole conditioned input at paper-scale parameter counts.
    fn feature_slice(&self, z_star: &Array) -> Result<Array> {
        if z_star.shape().len() != 3 || z_star.shape()[2] != self.feature_dim {
            return Err(Error::Dimension(format!(
                "generator expects z* [B×T×{}], got {:?}",
                self.feature_dim,
                z_star.shape()
            )));
        }
        let (b, t, f) = (z_star.shape()[0], z_star.shape()[1], z_star.shape()[2]);
        let mut out = Array::zeros(&[b, f]);
        for bi in 0..b {
            let src = bi * t * f;
            out.values_mut()[bi * f..(bi + 1) * f].copy_from_slice(&z_star.values()[src..src + f]);
        }
        Ok(out)
    }

    /// Training-mode forward (batch-stat batchnorm); caches for backward.
    pub fn forward_train(&mut self, z_star: &Array) -> Result<GenCache> {
        let z_feat = self.feature_slice(z_star)?;
        let b = z_feat.shape()[0];
        let proj_pre = self.proj.forward(&z_feat)?;
        let act = Activation::LeakyRelu(LEAKY);
        let mut cur = act.forward(&proj_pre).reshape(&[b, self.c0, self.t0])?;
        let mut stage_inputs = Vec::new();
        let mut bn_caches = Vec::new();
        let mut bn_pre = Vec::new();
        for i in 0..2 {
            stage_inputs.push(cur.clone());
            let pre = self.deconvs[i].forward(&cur)?;
            let (normed, cache) = self.bns[i].forward_train(&pre)?;
            bn_caches.push(cache);
            bn_pre.push(normed.clone());
            cur = act.forward(&normed);
        }
        stage_inputs.push(cur.clone());
        let final_pre = self.deconvs[2].forward(&cur)?;
        let sig = Activation::Sigmoid;
        let y = sig.forward(&final_pre);
        // [B, d, T] -> [B, T, d]
        let output = transpose_ct(&y);
        Ok(GenCache {
            z_feat,
            proj_pre,
            stage_inputs,
            bn_caches,
            bn_pre,
            final_pre,
            output,
        })
    }

    /// Inference-mode forward using batchnorm running statistics.
    pub fn generate(&self, z_star: &Array) -> Result<Array> {
        let z_feat = self.feature_slice(z_star)?;
        let b = z_feat.shape()[0];
        let act = Activation::LeakyRelu(LEAKY);
        let mut cur = act
            .forward(&self.proj.forward(&z_feat)?)
            .reshape(&[b, self.c0, self.t0])?;
        for i in 0..2 {
            let pre = self.deconvs[i].forward(&cur)?;
            cur = act.forward(&self.bns[i].forward_eval(&pre)?);
        }
        let final_pre = self.deconvs[2].forward(&cur)?;
        Ok(transpose_ct(&Activation::Sigmoid.forward(&final_pre)))
    }

    /// Backward from dL/doutput ([B × T × d]) to dL/dz* ([B × T × F], with the
    /// gradient landing on the first time slice that forward consumed).
    pub fn backward(&mut self, cache: &GenCache, doutput: &Array) -> Result<Array> {
        let act = Activation::LeakyRelu(LEAKY);
        let dy = transpose_tc(doutput);
        // Sigmoid backward from the cached pre-activation.
        let mut grad = Activation::Sigmoid.backward(&cache.final_pre, &dy);
        grad = self.deconvs[2].backward(&cache.stage_inputs[2], &grad)?;
        for i in (0..2).rev() {
            grad = act.backward(&cache.bn_pre[i], &grad);
            grad = self.bns[i].backward(&cache.bn_caches[i], &grad)?;
            grad = self.deconvs[i].backward(&cache.stage_inputs[i], &grad)?;
        }
        let b = cache.z_feat.shape()[0];
        let flat = grad.reshape(&[b, self.c0 * self.t0])?;
        let dproj = act.backward(&cache.proj_pre, &flat);
        let dz_feat = self.proj.backward(&cache.z_feat, &dproj)?;
        // Expand back to [B, T, F]: forward read the t = 0 slice only.
        let f = self.feature_dim;
        let mut dz_star = Array::zeros(&[b, self.t_len, f]);
        for bi in 0..b {
            let dst = bi * self.t_len * f;
            dz_star.values_mut()[dst..dst + f]
                .copy_from_slice(&dz_feat.values()[bi * f..(bi + 1) * f]);
        }
        Ok(dz_star)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut ps = self.proj.params_mut();
        for d in &mut self.deconvs {
            ps.extend(d.params_mut());
        }
        for bn in &mut self.bns {
            ps.extend(bn.params_mut());
        }
        ps
    }
}

/// Discriminator: three stride-2 convolutions, a real/fake probability head,
/// and one auxiliary head per context variable.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub convs: Vec<Conv1d>,
    pub bns: Vec<BatchNorm1d>,
    pub fc_real: Linear,
    pub aux_heads: Vec<Linear>,
    pub t_len: usize,
    pub channels: usize,
    k_out: usize,
    t_out: usize,
}

pub struct DiscCache {
    stage_inputs: Vec<Array>,
    conv_pre: Vec<Array>,
    bn_caches: Vec<BatchNormCache>,
    bn_pre: Vec<Array>,
    flat: Array,
    real_logit: Array,
    aux_logits: Vec<Array>,
    /// Real/fake probability after sigmoid: [B × 1].
    pub real_prob: Array,
    /// Per-variable class probabilities after sigmoid.
    pub aux_probs: Vec<Array>,
}

impl Discriminator {
    pub fn new(cfg: &GanConfig, aux_cardinalities: &[usize], rng: &mut RngState) -> Result<Discriminator> {
        cfg.validate()?;
        let [k0, k1, k2] = cfg.disc_widths;
        let t_out = cfg.t_len / GanConfig::upsample_factor();
        let convs = vec![
            Conv1d::new("disc.conv0", cfg.channels, k0, KERNEL, STRIDE, PAD, rng),
            Conv1d::new("disc.conv1", k0, k1, KERNEL, STRIDE, PAD, rng),
            Conv1d::new("disc.conv2", k1, k2, KERNEL, STRIDE, PAD, rng),
        ];
        let bns = vec![
            BatchNorm1d::new("disc.bn1", k1, BN_MOMENTUM),
            BatchNorm1d::new("disc.bn2", k2, BN_MOMENTUM),
        ];
        let flat = k2 * t_out;
        let fc_real = Linear::new("disc.fc_real", flat, 1, rng);
        let aux_heads = aux_cardinalities
            .iter()
            .enumerate()
            .map(|(i, &card)| Linear::new(&format!("disc.aux{i}"), flat, card, rng))
            .collect();
        Ok(Discriminator {
            convs,
            bns,
            fc_real,
            aux_heads,
            t_len: cfg.t_len,
            channels: cfg.channels,
            k_out: k2,
            t_out,
        })
    }

    /// Training-mode forward on a [B × T × d] batch.
    pub fn forward_train(&mut self, x: &Array) -> Result<DiscCache> {
        if x.shape().len() != 3 || x.shape()[1] != self.t_len || x.shape()[2] != self.channels {
            return Err(Error::Dimension(format!(
                "discriminator expects [B×{}×{}], got {:?}",
                self.t_len,
                self.channels,
                x.shape()
            )));
        }
        let x_ct = transpose_tc(x);
        let act = Activation::LeakyRelu(LEAKY);
        let mut stage_inputs = Vec::new();
        let mut conv_pre = Vec::new();
        let mut bn_caches = Vec::new();
        let mut bn_pre = Vec::new();

        stage_inputs.push(x_ct.clone());
        let pre0 = self.convs[0].forward(&x_ct)?;
        conv_pre.push(pre0.clone());
        let mut cur = act.forward(&pre0);
        for i in 0..2 {
            stage_inputs.push(cur.clone());
            let pre = self.convs[i + 1].forward(&cur)?;
            conv_pre.push(pre.clone());
            let (normed, cache) = self.bns[i].forward_train(&pre)?;
            bn_caches.push(cache);
            bn_pre.push(normed.clone());
            cur = act.forward(&normed);
        }
        let b = x.shape()[0];
        let flat = cur.reshape(&[b, self.k_out * self.t_out])?;
        let real_logit = self.fc_real.forward(&flat)?;
        let real_prob = Activation::Sigmoid.forward(&real_logit);
        let mut aux_logits = Vec::new();
        let mut aux_probs = Vec::new();
        for head in &self.aux_heads {
            let l = head.forward(&flat)?;
            aux_probs.push(Activation::Sigmoid.forward(&l));
            aux_logits.push(l);
        }
        Ok(DiscCache {
            stage_inputs,
            conv_pre,
            bn_caches,
            bn_pre,
            flat,
            real_logit,
            aux_logits,
            real_prob,
            aux_probs,
        })
    }

    /// Backward given upstream gradients on the output probabilities.
    /// Accumulates parameter gradients, returns dL/dx ([B × T × d]).
    pub fn backward(
        &mut self,
        cache: &DiscCache,
        dreal_prob: &Array,
        daux_probs: Option<&[Array]>,
    ) -> Result<Array> {
        let act = Activation::LeakyRelu(LEAKY);
        let dreal_logit = Activation::Sigmoid.backward(&cache.real_logit, dreal_prob);
        let mut dflat = self.fc_real.backward(&cache.flat, &dreal_logit)?;
        if let Some(daux) = daux_probs {
            for ((head, logit), dprob) in self.aux_heads.iter_mut().zip(&cache.aux_logits).zip(daux) {
                let dlogit = Activation::Sigmoid.backward(logit, dprob);
                let d = head.backward(&cache.flat, &dlogit)?;
                dflat = dflat.add(&d)?;
            }
        }
        let b = cache.flat.shape()[0];
        let mut grad = dflat.reshape(&[b, self.k_out, self.t_out])?;
        for i in (0..2).rev() {
            grad = act.backward(&cache.bn_pre[i], &grad);
            grad = self.bns[i].backward(&cache.bn_caches[i], &grad)?;
            grad = self.convs[i + 1].backward(&cache.stage_inputs[i + 1], &grad)?;
        }
        grad = act.backward(&cache.conv_pre[0], &grad);
        grad = self.convs[0].backward(&cache.stage_inputs[0], &grad)?;
        Ok(transpose_ct(&grad))
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut ps: Vec<&mut Parameter> = Vec::new();
        for c in &mut self.convs {
            ps.extend(c.params_mut());
        }
        for bn in &mut self.bns {
            ps.extend(bn.params_mut());
        }
        ps.extend(self.fc_real.params_mut());
        for h in &mut self.aux_heads {
            ps.extend(h.params_mut());
        }
        ps
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// [B × T × C] -> [B × C × T]
fn transpose_tc(x: &Array) -> Array {
    let (b, t, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = Array::zeros(&[b, c, t]);
    for bi in 0..b {
        for ti in 0..t {
            for ci in 0..c {
                out.set3(bi, ci, ti, x.at3(bi, ti, ci));
            }
        }
    }
    out
}

/// [B × C × T] -> [B × T × C]
fn transpose_ct(x: &Array) -> Array {
    let (b, c, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = Array::zeros(&[b, t, c]);
    for bi in 0..b {
        for ci in 0..c {
            for ti in 0..t {
                out.set3(bi, ti, ci, x.at3(bi, ci, ti));
            }
        }
    }
    out
}

/// One-hot targets per context variable for a batch of code vectors.
pub fn one_hot_targets(batch: &[Vec<usize>], cardinalities: &[usize]) -> Vec<Array> {
    cardinalities
        .iter()
        .enumerate()
        .map(|(vi, &card)| {
            let mut a = Array::zeros(&[batch.len(), card]);
            for (bi, codes) in batch.iter().enumerate() {
                a.set2(bi, codes[vi], 1.0);
            }
            a
        })
        .collect()
}

/// Loss components shared by tests and the trainer.
#[derive(Debug, Clone, Copy)]
pub struct GanLoss {
    pub total: f64,
    pub adversarial: f64,
    pub auxiliary: f64,
}

/// GAN baseline / ACGAN generator plus discriminator.
#[derive(Debug, Clone)]
pub struct GanModel {
    pub config: GanConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub aux_cardinalities: Vec<usize>,
}

impl GanModel {
    pub fn new(cfg: GanConfig, aux_cardinalities: &[usize], rng: &mut RngState) -> Result<GanModel> {
        let generator = Generator::new(&cfg, rng)?;
        let discriminator = Discriminator::new(&cfg, aux_cardinalities, rng)?;
        Ok(GanModel {
            config: cfg,
            generator,
            discriminator,
            aux_cardinalities: aux_cardinalities.to_vec(),
        })
    }

    /// Inference-mode generation; outputs lie strictly inside (0, 1).
    pub fn generate(&self, z_star: &Array) -> Result<Array> {
        let y = self.generator.generate(z_star)?;
        y.ensure_finite("generator output")?;
        Ok(y)
    }

    /// Discriminator loss: adversarial BCE plus gamma-weighted auxiliary
    /// classification on real and fake batches. Forward only.
    pub fn discriminator_loss(
        &mut self,
        real: &Array,
        fake: &Array,
        batch_codes: &[Vec<usize>],
        gamma: f64,
    ) -> Result<GanLoss> {
        let (loss, _, _) = self.disc_loss_inner(real, fake, batch_codes, gamma)?;
        Ok(loss)
    }

    fn disc_loss_inner(
        &mut self,
        real: &Array,
        fake: &Array,
        batch_codes: &[Vec<usize>],
        gamma: f64,
    ) -> Result<(GanLoss, DiscCache, DiscCache)> {
        let real_cache = self.discriminator.forward_train(real)?;
        let fake_cache = self.discriminator.forward_train(fake)?;
        let b = real.shape()[0];
        let ones = Array::full(&[b, 1], 1.0);
        let zeros = Array::zeros(&[fake.shape()[0], 1]);
        let adversarial = binary_cross_entropy(&real_cache.real_prob, &ones)?
            + binary_cross_entropy(&fake_cache.real_prob, &zeros)?;
        let mut auxiliary = 0.0;
        if self.config.is_acgan && gamma != 0.0 {
            let onehots = one_hot_targets(batch_codes, &self.aux_cardinalities);
            for (vi, target) in onehots.iter().enumerate() {
                auxiliary += binary_cross_entropy(&real_cache.aux_probs[vi], target)?;
                auxiliary += binary_cross_entropy(&fake_cache.aux_probs[vi], target)?;
            }
        }
        let total = adversarial + if self.config.is_acgan && gamma != 0.0 { gamma * auxiliary } else { 0.0 };
        if !total.is_finite() {
            return Err(Error::Diverged(format!("discriminator loss is {total}")));
        }
        Ok((
            GanLoss {
                total,
                adversarial,
                auxiliary,
            },
            real_cache,
            fake_cache,
        ))
    }

    /// Discriminator loss with gradients accumulated into discriminator
    /// parameters. The fake batch is treated as constant (detached).
    pub fn discriminator_loss_and_grads(
        &mut self,
        real: &Array,
        fake: &Array,
        batch_codes: &[Vec<usize>],
        gamma: f64,
    ) -> Result<GanLoss> {
        let (loss, real_cache, fake_cache) = self.disc_loss_inner(real, fake, batch_codes, gamma)?;
        let b = real.shape()[0];
        let ones = Array::full(&[b, 1], 1.0);
        let zeros = Array::zeros(&[fake.shape()[0], 1]);
        let dreal = binary_cross_entropy_backward(&real_cache.real_prob, &ones)?;
        let dfake = binary_cross_entropy_backward(&fake_cache.real_prob, &zeros)?;
        let aux_grads = |cache: &DiscCache,
                         onehots: &[Array],
                         gamma: f64|
         -> Result<Vec<Array>> {
            cache
                .aux_probs
                .iter()
                .zip(onehots)
                .map(|(p, t)| Ok(binary_cross_entropy_backward(p, t)?.scale(gamma)))
                .collect()
        };
        if self.config.is_acgan && gamma != 0.0 {
            let onehots = one_hot_targets(batch_codes, &self.aux_cardinalities);
            let daux_real = aux_grads(&real_cache, &onehots, gamma)?;
            let daux_fake = aux_grads(&fake_cache, &onehots, gamma)?;
            self.discriminator.backward(&real_cache, &dreal, Some(&daux_real))?;
            self.discriminator.backward(&fake_cache, &dfake, Some(&daux_fake))?;
        } else {
            self.discriminator.backward(&real_cache, &dreal, None)?;
            self.discriminator.backward(&fake_cache, &dfake, None)?;
        }
        Ok(loss)
    }

    /// Generator loss on an already-generated fake batch. Forward only.
    pub fn generator_loss(
        &mut self,
        fake: &Array,
        batch_codes: &[Vec<usize>],
        lambda_gen: f64,
    ) -> Result<GanLoss> {
        let (loss, _) = self.gen_loss_inner(fake, batch_codes, lambda_gen)?;
        Ok(loss)
    }

    fn gen_loss_inner(
        &mut self,
        fake: &Array,
        batch_codes: &[Vec<usize>],
        lambda_gen: f64,
    ) -> Result<(GanLoss, DiscCache)> {
        let cache = self.discriminator.forward_train(fake)?;
        let b = fake.shape()[0];
        let ones = Array::full(&[b, 1], 1.0);
        let adversarial = binary_cross_entropy(&cache.real_prob, &ones)?;
        let mut auxiliary = 0.0;
        if self.config.is_acgan && lambda_gen != 0.0 {
            let onehots = one_hot_targets(batch_codes, &self.aux_cardinalities);
            for (vi, target) in onehots.iter().enumerate() {
                auxiliary += binary_cross_entropy(&cache.aux_probs[vi], target)?;
            }
        }
        let total = adversarial
            + if self.config.is_acgan && lambda_gen != 0.0 {
                lambda_gen * auxiliary
            } else {
                0.0
            };
        if !total.is_finite() {
            return Err(Error::Diverged(format!("generator loss is {total}")));
        }
        Ok((
            GanLoss {
                total,
                adversarial,
                auxiliary,
            },
            cache,
        ))
    }

    /// Generator loss with gradients backpropagated through the discriminator
    /// into the generator cache's fake batch. Discriminator parameter grads
    /// picked up along the way are cleared; returns dL/dz*.
    pub fn generator_loss_and_grads(
        &mut self,
        gen_cache: &GenCache,
        batch_codes: &[Vec<usize>],
        lambda_gen: f64,
    ) -> Result<(GanLoss, Array)> {
        let fake = gen_cache.output.clone();
        let (loss, disc_cache) = self.gen_loss_inner(&fake, batch_codes, lambda_gen)?;
        let b = fake.shape()[0];
        let ones = Array::full(&[b, 1], 1.0);
        let dreal = binary_cross_entropy_backward(&disc_cache.real_prob, &ones)?;
        let dfake = if self.config.is_acgan && lambda_gen != 0.0 {
            let onehots = one_hot_targets(batch_codes, &self.aux_cardinalities);
            let daux: Vec<Array> = disc_cache
                .aux_probs
                .iter()
                .zip(&onehots)
                .map(|(p, t)| Ok::<Array, Error>(binary_cross_entropy_backward(p, t)?.scale(lambda_gen)))
                .collect::<Result<_>>()?;
            self.discriminator.backward(&disc_cache, &dreal, Some(&daux))?
        } else {
            self.discriminator.backward(&disc_cache, &dreal, None)?
        };
        // The discriminator is not being trained on this loss.
        self.discriminator.zero_grads();
        let dz_star = self.generator.backward(gen_cache, &dfake)?;
        Ok((loss, dz_star))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::assemble_conditioned_noise;

    fn desk_config(is_acgan: bool) -> GanConfig {
        GanConfig {
            t_len: 16,
            channels: 1,
            noise_dim: 8,
            h_dim: 4,
            gen_widths: [16, 8, 8],
            disc_widths: [8, 8, 16],
            is_acgan,
            gamma: 1.0,
            lambda_gen: 1.0,
        }
    }

    fn sample_z_star(cfg: &GanConfig, b: usize, rng: &mut RngState) -> Array {
        // Noise replicated across time, like the trainer does.
        let mut z = Array::zeros(&[b, cfg.t_len, cfg.noise_dim]);
        for bi in 0..b {
            let row: Vec<f64> = (0..cfg.noise_dim).map(|_| rng.normal()).collect();
            for ti in 0..cfg.t_len {
                for (j, &v) in row.iter().enumerate() {
                    z.set3(bi, ti, j, v);
                }
            }
        }
        let h = Array::from_fn(&[b, cfg.h_dim], |_| rng.normal());
        assemble_conditioned_noise(&z, &h).unwrap().z_star
    }

    #[test]
    fn output_shape_and_range() {
        let cfg = desk_config(true);
        let mut rng = RngState::new(1);
        let model = GanModel::new(cfg.clone(), &[3, 2], &mut rng).unwrap();
        let z_star = sample_z_star(&cfg, 4, &mut rng);
        let y = model.generate(&z_star).unwrap();
        assert_eq!(y.shape(), &[4, 16, 1]);
        assert!(y.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = desk_config(false);
        let mut rng = RngState::new(2);
        let model = GanModel::new(cfg.clone(), &[2], &mut rng).unwrap();
        let z_star = sample_z_star(&cfg, 3, &mut rng);
        let a = model.generate(&z_star).unwrap();
        let b = model.generate(&z_star).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn incompatible_series_length_rejected() {
        let mut cfg = desk_config(false);
        cfg.t_len = 12; // not a multiple of 8
        let mut rng = RngState::new(3);
        assert!(GanModel::new(cfg, &[2], &mut rng).is_err());
    }

    #[test]
    fn half_probability_discriminator_gives_two_ln_two() {
        let cfg = desk_config(true);
        let mut rng = RngState::new(4);
        let mut model = GanModel::new(cfg.clone(), &[3], &mut rng).unwrap();
        // Zero every discriminator parameter: logits are 0, probability 0.5.
        model.discriminator.zero_grads();
        for p in model.discriminator.params_mut() {
            for v in p.value.values_mut() {
                *v = 0.0;
            }
        }
        let real = Array::from_fn(&[4, 16, 1], |_| rng.uniform());
        let fake = Array::from_fn(&[4, 16, 1], |_| rng.uniform());
        let codes = vec![vec![0usize]; 4];
        let loss = model.discriminator_loss(&real, &fake, &codes, 0.0).unwrap();
        assert!((loss.adversarial - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(loss.total, loss.adversarial);
        let g = model.generator_loss(&fake, &codes, 0.0).unwrap();
        assert!((g.total - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn baseline_equals_acgan_with_zero_weights_bitwise() {
        let mut rng_a = RngState::new(5);
        let mut rng_b = RngState::new(5);
        let mut acgan = GanModel::new(desk_config(true), &[3, 2], &mut rng_a).unwrap();
        let mut baseline = GanModel::new(desk_config(false), &[3, 2], &mut rng_b).unwrap();
        let mut rng = RngState::new(6);
        let real = Array::from_fn(&[4, 16, 1], |_| rng.uniform());
        let z_star = sample_z_star(&acgan.config.clone(), 4, &mut rng);
        let fake = acgan.generate(&z_star).unwrap();
        let codes = vec![vec![0, 1], vec![1, 0], vec![2, 1], vec![0, 0]];
        let la = acgan.discriminator_loss(&real, &fake, &codes, 0.0).unwrap();
        let lb = baseline.discriminator_loss(&real, &fake, &codes, 0.0).unwrap();
        assert_eq!(la.total.to_bits(), lb.total.to_bits());
        let ga = acgan.generator_loss(&fake, &codes, 0.0).unwrap();
        let gb = baseline.generator_loss(&fake, &codes, 0.0).unwrap();
        assert_eq!(ga.total.to_bits(), gb.total.to_bits());
    }
}
