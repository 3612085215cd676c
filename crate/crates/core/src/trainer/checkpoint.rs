//! Unified checkpoint persistence. Binary layout: magic bytes `CNTS`, a u32
//! format version, then length-prefixed named sections. All floats are
//! little-endian 64-bit, so save → load round trips are byte-exact.

use std::collections::BTreeMap;
use std::path::Path;

use crate::context_encoder::ContextEncoderModel;
use crate::data::csv_io::atomic_write;
use crate::data::ContextVocabulary;
use crate::error::{Error, Result};
use crate::generators::diffusion::{DiffusionConfig, DiffusionModel};
use crate::generators::gan::{GanConfig, GanModel};
use crate::normalizer::{NormalizerModel, DEFAULT_DELTA};
use crate::numerics::{Array, BatchNorm1d, RngState};
use crate::trainer::{EpochLog, GeneratorState, ModelKind, TrainConfig};

pub const MAGIC: &[u8; 4] = b"CNTS";
pub const FORMAT_VERSION: u32 = 1;

/// Versioned container for everything a generation or evaluation run needs.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub vocabulary: ContextVocabulary,
    pub t_len: usize,
    pub channels: usize,
    pub normalizer: NormalizerModel,
    pub encoder: ContextEncoderModel,
    pub generator: GeneratorState,
    pub rng_state: u64,
    pub log: Vec<EpochLog>,
}

// --- binary primitives ------------------------------------------------------

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Writer {
        Writer { buf: Vec::new() }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn array(&mut self, a: &Array) {
        self.u32(a.shape().len() as u32);
        for &d in a.shape() {
            self.u64(d as u64);
        }
        for &v in a.values() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Reader<'a> {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: needed {n} bytes at offset {}, only {} remain",
                self.pos,
                self.data.len() - self.pos
            )));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Checkpoint("non-UTF8 string in checkpoint".into()))
    }

    fn array(&mut self) -> Result<Array> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("implausible array rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64()? as usize);
        }
        let n: usize = shape.iter().product();
        if n > 1 << 30 {
            return Err(Error::Checkpoint(format!("implausible array size {n}")));
        }
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(self.f64()?);
        }
        Array::from_vec(&shape, values)
    }

    fn done(&self) -> bool {
        self.pos == self.data.len()
    }
}

// --- named state arrays -----------------------------------------------------

fn bn_prefix(bn: &BatchNorm1d) -> String {
    bn.gamma
        .name
        .strip_suffix(".gamma")
        .unwrap_or(&bn.gamma.name)
        .to_string()
}

fn collect_normalizer(m: &NormalizerModel) -> Vec<(String, Array)> {
    let mut out = Vec::new();
    for e in &m.embeddings {
        out.push((e.table.name.clone(), e.table.value.clone()));
    }
    for l in &m.mlp.layers {
        out.push((l.w.name.clone(), l.w.value.clone()));
        out.push((l.b.name.clone(), l.b.value.clone()));
    }
    out.push(("norm.target_mean".into(), m.target_mean.clone()));
    out.push(("norm.target_std".into(), m.target_std.clone()));
    out
}

fn restore_normalizer(m: &mut NormalizerModel, arrays: &BTreeMap<String, Array>) -> Result<()> {
    for e in &mut m.embeddings {
        restore(&mut e.table.value, &e.table.name, arrays)?;
    }
    for l in &mut m.mlp.layers {
        restore(&mut l.w.value, &l.w.name, arrays)?;
        restore(&mut l.b.value, &l.b.name, arrays)?;
    }
    restore(&mut m.target_mean, "norm.target_mean", arrays)?;
    restore(&mut m.target_std, "norm.target_std", arrays)?;
    Ok(())
}

fn collect_encoder(m: &ContextEncoderModel) -> Vec<(String, Array)> {
    let mut out = Vec::new();
    for e in &m.embeddings {
        out.push((e.table.name.clone(), e.table.value.clone()));
    }
    for l in &m.compress.layers {
        out.push((l.w.name.clone(), l.w.value.clone()));
        out.push((l.b.name.clone(), l.b.value.clone()));
    }
    for head in &m.heads {
        for l in &head.layers {
            out.push((l.w.name.clone(), l.w.value.clone()));
            out.push((l.b.name.clone(), l.b.value.clone()));
        }
    }
    out
}

fn restore_encoder(m: &mut ContextEncoderModel, arrays: &BTreeMap<String, Array>) -> Result<()> {
    for e in &mut m.embeddings {
        restore(&mut e.table.value, &e.table.name, arrays)?;
    }
    for l in &mut m.compress.layers {
        restore(&mut l.w.value, &l.w.name, arrays)?;
        restore(&mut l.b.value, &l.b.name, arrays)?;
    }
    for head in &mut m.heads {
        for l in &mut head.layers {
            restore(&mut l.w.value, &l.w.name, arrays)?;
            restore(&mut l.b.value, &l.b.name, arrays)?;
        }
    }
    Ok(())
}

fn collect_bn(bn: &BatchNorm1d, out: &mut Vec<(String, Array)>) {
    let prefix = bn_prefix(bn);
    out.push((bn.gamma.name.clone(), bn.gamma.value.clone()));
    out.push((bn.beta.name.clone(), bn.beta.value.clone()));
    out.push((format!("{prefix}.running_mean"), bn.running_mean.clone()));
    out.push((format!("{prefix}.running_var"), bn.running_var.clone()));
}

fn restore_bn(bn: &mut BatchNorm1d, arrays: &BTreeMap<String, Array>) -> Result<()> {
    let prefix = bn_prefix(bn);
    let gname = bn.gamma.name.clone();
    let bname = bn.beta.name.clone();
    restore(&mut bn.gamma.value, &gname, arrays)?;
    restore(&mut bn.beta.value, &bname, arrays)?;
    restore(&mut bn.running_mean, &format!("{prefix}.running_mean"), arrays)?;
    restore(&mut bn.running_var, &format!("{prefix}.running_var"), arrays)?;
    Ok(())
}

fn collect_gan(m: &GanModel) -> Vec<(String, Array)> {
    let mut out = Vec::new();
    out.push((m.generator.proj.w.name.clone(), m.generator.proj.w.value.clone()));
    out.push((m.generator.proj.b.name.clone(), m.generator.proj.b.value.clone()));
    for c in &m.generator.deconvs {
        out.push((c.w.name.clone(), c.w.value.clone()));
        out.push((c.b.name.clone(), c.b.value.clone()));
    }
    for bn in &m.generator.bns {
        collect_bn(bn, &mut out);
    }
    for c in &m.discriminator.convs {
        out.push((c.w.name.clone(), c.w.value.clone()));
        out.push((c.b.name.clone(), c.b.value.clone()));
    }
    for bn in &m.discriminator.bns {
        collect_bn(bn, &mut out);
    }
    out.push((m.discriminator.fc_real.w.name.clone(), m.discriminator.fc_real.w.value.clone()));
    out.push((m.discriminator.fc_real.b.name.clone(), m.discriminator.fc_real.b.value.clone()));
    for h in &m.discriminator.aux_heads {
        out.push((h.w.name.clone(), h.w.value.clone()));
        out.push((h.b.name.clone(), h.b.value.clone()));
    }
    out
}

fn restore_gan(m: &mut GanModel, arrays: &BTreeMap<String, Array>) -> Result<()> {
    let gp = m.generator.proj.w.name.clone();
    restore(&mut m.generator.proj.w.value, &gp, arrays)?;
    let gb = m.generator.proj.b.name.clone();
    restore(&mut m.generator.proj.b.value, &gb, arrays)?;
    for c in &mut m.generator.deconvs {
        let (wn, bn) = (c.w.name.clone(), c.b.name.clone());
        restore(&mut c.w.value, &wn, arrays)?;
        restore(&mut c.b.value, &bn, arrays)?;
    }
    for bn in &mut m.generator.bns {
        restore_bn(bn, arrays)?;
    }
    for c in &mut m.discriminator.convs {
        let (wn, bname) = (c.w.name.clone(), c.b.name.clone());
        restore(&mut c.w.value, &wn, arrays)?;
        restore(&mut c.b.value, &bname, arrays)?;
    }
    for bn in &mut m.discriminator.bns {
        restore_bn(bn, arrays)?;
    }
    let (wn, bn) = (
        m.discriminator.fc_real.w.name.clone(),
        m.discriminator.fc_real.b.name.clone(),
    );
    restore(&mut m.discriminator.fc_real.w.value, &wn, arrays)?;
    restore(&mut m.discriminator.fc_real.b.value, &bn, arrays)?;
    for h in &mut m.discriminator.aux_heads {
        let (wn, bn) = (h.w.name.clone(), h.b.name.clone());
        restore(&mut h.w.value, &wn, arrays)?;
        restore(&mut h.b.value, &bn, arrays)?;
    }
    Ok(())
}

fn collect_diffusion(m: &DiffusionModel) -> Vec<(String, Array)> {
    let mut out = Vec::new();
    for p in m.denoiser.params() {
        out.push((p.name.clone(), p.value.clone()));
    }
    for p in m.ema.params() {
        out.push((format!("ema.{}", p.name), p.value.clone()));
    }
    out
}

fn restore_diffusion(m: &mut DiffusionModel, arrays: &BTreeMap<String, Array>) -> Result<()> {
    for p in m.denoiser.params_mut() {
        let name = p.name.clone();
        restore(&mut p.value, &name, arrays)?;
    }
    for p in m.ema.params_mut() {
        let name = format!("ema.{}", p.name);
        restore(&mut p.value, &name, arrays)?;
    }
    Ok(())
}

fn restore(target: &mut Array, name: &str, arrays: &BTreeMap<String, Array>) -> Result<()> {
    let src = arrays
        .get(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
    if src.shape() != target.shape() {
        return Err(Error::Checkpoint(format!(
            "array {name} has shape {:?}, expected {:?}",
            src.shape(),
            target.shape()
        )));
    }
    *target = src.clone();
    Ok(())
}

fn write_array_section(arrays: &[(String, Array)]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u32(arrays.len() as u32);
    for (name, a) in arrays {
        w.string(name);
        w.array(a);
    }
    w.buf
}

fn read_array_section(data: &[u8]) -> Result<BTreeMap<String, Array>> {
    let mut r = Reader::new(data);
    let count = r.u32()? as usize;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let name = r.string()?;
        let array = r.array()?;
        out.insert(name, array);
    }
    if !r.done() {
        return Err(Error::Checkpoint("trailing bytes in array section".into()));
    }
    Ok(out)
}

fn vocab_to_text(v: &ContextVocabulary) -> String {
    let mut out = String::new();
    for (name, cats) in v.variables() {
        out.push_str(name);
        for c in cats {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
    }
    out
}

fn vocab_from_text(text: &str) -> Result<ContextVocabulary> {
    let mut vars = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let name = parts.next().unwrap().to_string();
        let cats: Vec<String> = parts.map(|s| s.to_string()).collect();
        vars.push((name, cats));
    }
    ContextVocabulary::from_parts(vars)
}

fn config_to_text(cfg: &TrainConfig) -> String {
    cfg.to_pairs()
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

fn config_from_text(text: &str) -> Result<TrainConfig> {
    let mut pairs = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad config line {line:?}")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    TrainConfig::from_pairs(&pairs)
}

// --- public API --------------------------------------------------------------

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.buf.extend_from_slice(MAGIC);
        w.u32(self.version);
        let section = |w: &mut Writer, name: &str, payload: Vec<u8>| {
            w.string(name);
            w.u64(payload.len() as u64);
            w.buf.extend_from_slice(&payload);
        };
        section(&mut w, "config", config_to_text(&self.config).into_bytes());
        section(&mut w, "vocab", vocab_to_text(&self.vocabulary).into_bytes());
        let mut meta = Writer::new();
        meta.u64(self.t_len as u64);
        meta.u64(self.channels as u64);
        meta.u64(self.rng_state);
        section(&mut w, "meta", meta.buf);
        section(&mut w, "normalizer", write_array_section(&collect_normalizer(&self.normalizer)));
        section(&mut w, "encoder", write_array_section(&collect_encoder(&self.encoder)));
        let gen_arrays = match &self.generator {
            GeneratorState::Gan(m) => collect_gan(m),
            GeneratorState::Diffusion(m) => collect_diffusion(m),
        };
        section(&mut w, "generator", write_array_section(&gen_arrays));
        section(
            &mut w,
            "log",
            crate::trainer::log_to_csv(&self.log).into_bytes(),
        );
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader::new(data);
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic bytes {magic:?}, expected {MAGIC:?}"
            )));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}, this build reads version {FORMAT_VERSION}"
            )));
        }
        let mut sections: BTreeMap<String, &[u8]> = BTreeMap::new();
        while !r.done() {
            let name = r.string()?;
            let len = r.u64()? as usize;
            let payload = r.take(len)?;
            sections.insert(name, payload);
        }
        let get = |name: &str| -> Result<&[u8]> {
            sections
                .get(name)
                .copied()
                .ok_or_else(|| Error::Checkpoint(format!("missing section {name}")))
        };
        let config = config_from_text(std::str::from_utf8(get("config")?).map_err(|_| {
            Error::Checkpoint("config section is not UTF-8".into())
        })?)?;
        let vocabulary = vocab_from_text(std::str::from_utf8(get("vocab")?).map_err(|_| {
            Error::Checkpoint("vocab section is not UTF-8".into())
        })?)?;
        let mut meta = Reader::new(get("meta")?);
        let t_len = meta.u64()? as usize;
        let channels = meta.u64()? as usize;
        let rng_state = meta.u64()?;

        // Rebuild model skeletons, then overwrite every stateful array.
        let mut skeleton_rng = RngState::new(0);
        let mut normalizer =
            NormalizerModel::new(&vocabulary, channels, DEFAULT_DELTA, &mut skeleton_rng);
        restore_normalizer(&mut normalizer, &read_array_section(get("normalizer")?)?)?;
        let mut encoder = ContextEncoderModel::with_widths(
            &vocabulary,
            config.embed_dim,
            config.h_dim,
            config.encoder_hidden,
            config.head_hidden,
            &mut skeleton_rng,
        )?;
        restore_encoder(&mut encoder, &read_array_section(get("encoder")?)?)?;
        let generator = match config.model {
            ModelKind::Baseline | ModelKind::Acgan => {
                let mut gan = GanModel::new(
                    GanConfig {
                        t_len,
                        channels,
                        noise_dim: config.noise_dim,
                        h_dim: config.h_dim,
                        gen_widths: config.gen_widths,
                        disc_widths: config.disc_widths,
                        is_acgan: config.model == ModelKind::Acgan,
                        gamma: config.gamma,
                        lambda_gen: config.lambda_gen,
                    },
                    &vocabulary.cardinalities(),
                    &mut skeleton_rng,
                )?;
                restore_gan(&mut gan, &read_array_section(get("generator")?)?)?;
                GeneratorState::Gan(gan)
            }
            ModelKind::Diffusion => {
                let mut diff = DiffusionModel::new(
                    DiffusionConfig {
                        t_len,
                        channels,
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
                    &mut skeleton_rng,
                )?;
                restore_diffusion(&mut diff, &read_array_section(get("generator")?)?)?;
                GeneratorState::Diffusion(diff)
            }
        };
        let log = crate::trainer::log_from_csv(std::str::from_utf8(get("log")?).map_err(
            |_| Error::Checkpoint("log section is not UTF-8".into()),
        )?)?;
        Ok(Checkpoint {
            version,
            config,
            vocabulary,
            t_len,
            channels,
            normalizer,
            encoder,
            generator,
            rng_state,
            log,
        })
    }
}

/// Writes the checkpoint atomically.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    atomic_write(path, &checkpoint.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let data = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Checkpoint::from_bytes(&data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_faux_dataset, FauxSpec};
    use crate::trainer::{generate_dataset, train};

    fn trained(model: ModelKind) -> (Checkpoint, crate::data::Dataset) {
        let spec = FauxSpec {
            n_households: 20,
            days_per_household: 4,
            ..FauxSpec::desk_sparse()
        };
        let (ds, _) = generate_faux_dataset(&spec, 3).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 32,
            normalizer_steps: 150,
            t_steps: 15,
            trunk_hidden: 16,
            encoder_hidden: 16,
            head_hidden: 12,
            noise_dim: 8,
            h_dim: 8,
            embed_dim: 8,
            gen_widths: [16, 8, 8],
            disc_widths: [8, 8, 16],
            top_k: 4,
            ..TrainConfig::desk(model)
        };
        (train(&cfg, &ds).unwrap(), ds)
    }

    #[test]
    fn byte_exact_round_trip_diffusion() {
        let (cp, ds) = trained(ModelKind::Diffusion);
        let bytes = cp.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(bytes, back.to_bytes());
        // Loaded model generates bit-identically.
        let ctx = ds.profiles[0].context_codes.clone();
        let a = generate_dataset(&cp, &[ctx.clone()], 4, 9).unwrap();
        let b = generate_dataset(&back, &[ctx], 4, 9).unwrap();
        for (x, y) in a.profiles.iter().zip(&b.profiles) {
            assert_eq!(x.series.values(), y.series.values());
        }
    }

    #[test]
    fn byte_exact_round_trip_gan() {
        let (cp, ds) = trained(ModelKind::Acgan);
        let bytes = cp.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(bytes, back.to_bytes());
        let ctx = ds.profiles[0].context_codes.clone();
        let a = generate_dataset(&cp, &[ctx.clone()], 4, 9).unwrap();
        let b = generate_dataset(&back, &[ctx], 4, 9).unwrap();
        for (x, y) in a.profiles.iter().zip(&b.profiles) {
            assert_eq!(x.series.values(), y.series.values());
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let (cp, _) = trained(ModelKind::Diffusion);
        let bytes = cp.to_bytes();
        for cut in [3usize, 7, 20, bytes.len() / 2, bytes.len() - 1] {
            let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Checkpoint(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn bad_magic_and_version_are_named() {
        let (cp, _) = trained(ModelKind::Diffusion);
        let mut bytes = cp.to_bytes();
        bytes[0] = b'X';
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");

        let mut bytes = cp.to_bytes();
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("99") && msg.contains('1'), "{msg}");
    }

    #[test]
    fn file_round_trip() {
        let (cp, _) = trained(ModelKind::Diffusion);
        let dir = std::env::temp_dir().join("cents_ckpt_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.cnts");
        save_checkpoint(&cp, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(cp.to_bytes(), back.to_bytes());
    }
}
