//! Command implementations behind the `cents` binary. Each command is a pure
//! function of (config, input files, seed); all outputs are written
//! atomically so failures leave no partial files.

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::data::csv_io::{
    atomic_write, load_dataset, read_metadata_csv, read_profiles_csv, assemble_with_vocabulary,
    write_metadata_csv, write_profiles_csv,
};
use crate::data::{generate_faux_dataset, label_sparsity, ContextVocabulary, Dataset};
use crate::error::{Error, Result};
use crate::experiments::{ablate_lambda, extrapolate_shift, AblationTable, ShiftReport};
use crate::metrics::{evaluate_all, MetricReport};
use crate::trainer::{
    generate_dataset, load_checkpoint, log_to_csv, save_checkpoint, train, Checkpoint,
};

/// Resolved input dataset paths.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub profiles: PathBuf,
    pub metadata: PathBuf,
}

impl DatasetPaths {
    pub fn resolve(
        flag_profiles: Option<PathBuf>,
        flag_metadata: Option<PathBuf>,
        cfg: &ExperimentConfig,
    ) -> Result<DatasetPaths> {
        let profiles = flag_profiles
            .or_else(|| cfg.data.profiles.clone())
            .ok_or_else(|| Error::Usage("no profiles CSV given (flag --profiles or [data] profiles)".into()))?;
        let metadata = flag_metadata
            .or_else(|| cfg.data.metadata.clone())
            .ok_or_else(|| Error::Usage("no metadata CSV given (flag --metadata or [data] metadata)".into()))?;
        Ok(DatasetPaths { profiles, metadata })
    }
}

/// Loads a dataset, defaulting the context columns to every metadata column.
pub fn load_input_dataset(paths: &DatasetPaths, cfg: &ExperimentConfig) -> Result<Dataset> {
    let columns = if cfg.data.context_columns.is_empty() {
        read_metadata_csv(&paths.metadata)?.columns
    } else {
        cfg.data.context_columns.clone()
    };
    load_dataset(&paths.profiles, &paths.metadata, &columns)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

/// `synth-data`: writes profiles CSV, metadata CSV, and the ground-truth
/// effects file for a faux dataset.
pub fn cmd_synth_data(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let (dataset, truth) = generate_faux_dataset(&cfg.faux, seed)?;
    write_profiles_csv(&dataset, &out_dir.join("profiles.csv"))?;
    write_metadata_csv(&dataset, &out_dir.join("metadata.csv"))?;
    atomic_write(&out_dir.join("ground_truth.csv"), truth.to_csv().as_bytes())?;
    println!(
        "wrote {} profiles ({} households) to {}",
        dataset.len(),
        cfg.faux.n_households,
        out_dir.display()
    );
    Ok(())
}

/// `train`: fits the normalizer, context encoder, and generator; writes the
/// checkpoint and the per-epoch loss log.
pub fn cmd_train(cfg: &ExperimentConfig, paths: &DatasetPaths, out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let dataset = load_input_dataset(paths, cfg)?;
    let checkpoint = train(&cfg.train, &dataset)?;
    let ckpt_path = out_dir.join("checkpoint.cnts");
    save_checkpoint(&checkpoint, &ckpt_path)?;
    atomic_write(
        &out_dir.join("training_log.csv"),
        log_to_csv(&checkpoint.log).as_bytes(),
    )?;
    let last = checkpoint.log.last().expect("at least one epoch");
    println!(
        "trained {} for {} epochs (final loss_total {:.6}); checkpoint at {}",
        cfg.train.model.as_str(),
        checkpoint.log.len(),
        last.loss_total,
        ckpt_path.display()
    );
    Ok(ckpt_path)
}

/// Context source for `generate`.
pub enum ContextSource {
    /// One synthetic profile per real profile's context.
    AllTrainContexts(DatasetPaths),
    /// Explicit CSV of category names, one requested context per row.
    File(PathBuf),
}

/// Parses a contexts CSV: the header names every vocabulary variable, rows
/// give category values.
pub fn parse_contexts_file(path: &Path, vocab: &ContextVocabulary) -> Result<Vec<Vec<usize>>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty contexts file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let mut column_vars = Vec::with_capacity(columns.len());
    for c in &columns {
        let vi = vocab
            .variable_index(c)
            .ok_or_else(|| Error::Data(format!("contexts header names unknown variable {c:?}")))?;
        column_vars.push(vi);
    }
    for vi in 0..vocab.len() {
        if !column_vars.contains(&vi) {
            return Err(Error::Data(format!(
                "contexts header is missing variable {:?}",
                vocab.variable_name(vi)
            )));
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::DataRow {
                row: lineno + 1,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let mut codes = vec![0usize; vocab.len()];
        for (value, &vi) in fields.iter().zip(&column_vars) {
            codes[vi] = vocab.encode(vi, value.trim()).map_err(|e| Error::DataRow {
                row: lineno + 1,
                message: e.to_string(),
            })?;
        }
        out.push(codes);
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no context rows", path.display())));
    }
    Ok(out)
}

/// `generate`: samples a synthetic dataset from a checkpoint and writes it in
/// the profiles/metadata CSV schema.
pub fn cmd_generate(
    checkpoint_path: &Path,
    source: &ContextSource,
    cfg: &ExperimentConfig,
    per_context: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Dataset> {
    ensure_dir(out_dir)?;
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let contexts: Vec<Vec<usize>> = match source {
        ContextSource::AllTrainContexts(paths) => {
            let dataset = load_input_dataset(paths, cfg)?;
            if dataset.vocabulary != checkpoint.vocabulary {
                return Err(Error::Data(
                    "training dataset vocabulary differs from the checkpoint's".into(),
                ));
            }
            dataset.profiles.iter().map(|p| p.context_codes.clone()).collect()
        }
        ContextSource::File(path) => parse_contexts_file(path, &checkpoint.vocabulary)?,
    };
    let synthetic = generate_dataset(&checkpoint, &contexts, per_context, seed)?;
    write_profiles_csv(&synthetic, &out_dir.join("synthetic_profiles.csv"))?;
    write_metadata_csv(&synthetic, &out_dir.join("synthetic_metadata.csv"))?;
    println!(
        "generated {} synthetic profiles into {}",
        synthetic.len(),
        out_dir.display()
    );
    Ok(synthetic)
}

/// `evaluate`: runs the metric suite on a (real, synthetic) pair and writes
/// the JSON report. The synthetic dataset is coded against the real
/// vocabulary.
pub fn cmd_evaluate(
    real: &DatasetPaths,
    syn: &DatasetPaths,
    cfg: &ExperimentConfig,
    with_sparsity: bool,
    seed: u64,
    out_path: &Path,
) -> Result<MetricReport> {
    let real_ds = load_input_dataset(real, cfg)?;
    let raw = read_profiles_csv(&syn.profiles)?;
    let meta = read_metadata_csv(&syn.metadata)?;
    let syn_ds = assemble_with_vocabulary(&raw, &meta, &real_ds.vocabulary)?;
    let mask = if with_sparsity {
        Some(label_sparsity(&real_ds, &cfg.sparsity)?)
    } else {
        None
    };
    let report = evaluate_all(&real_ds, &syn_ds, mask.as_deref(), seed)?;
    atomic_write(out_path, report.to_json().as_bytes())?;
    print_report_summary(&report);
    Ok(report)
}

fn print_report_summary(report: &MetricReport) {
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    println!("metric                overall");
    println!("context_fid           {:.6}", report.overall.context_fid);
    println!("bmse                  {:.6}", report.overall.bmse);
    println!("mmd                   {:.6}", report.overall.mmd);
    println!("mdtwd_avg             {:.6}", report.overall.mdtwd_avg);
    println!("discriminative_score  {}", fmt_opt(report.overall.discriminative_score));
    println!("predictive_score      {}", fmt_opt(report.overall.predictive_score));
    if let Some(sparse) = &report.sparse_only {
        println!(
            "sparse-only: context_fid {:.6} bmse {:.6} mmd {:.6} mdtwd_avg {:.6} ({} real / {} syn)",
            sparse.context_fid,
            sparse.bmse,
            sparse.mmd,
            sparse.mdtwd_avg,
            report.sparse_real_count,
            report.sparse_synthetic_count
        );
    }
    if report.unmatched_synthetic > 0 {
        println!(
            "warning: {} synthetic series had no same-context real and were skipped in pairing",
            report.unmatched_synthetic
        );
    }
}

/// `ablate-lambda`: trains per (λ, seed) on the sparsity-labeled dataset and
/// writes the per-seed/median Context-FID table.
pub fn cmd_ablate_lambda(
    cfg: &ExperimentConfig,
    paths: &DatasetPaths,
    out_dir: &Path,
) -> Result<AblationTable> {
    ensure_dir(out_dir)?;
    let mut dataset = load_input_dataset(paths, cfg)?;
    let mask = label_sparsity(&dataset, &cfg.sparsity)?;
    dataset.sparsity_mask = Some(mask);
    let table = ablate_lambda(&cfg.train, &dataset, &cfg.ablation.lambdas, &cfg.ablation.seeds)?;
    atomic_write(&out_dir.join("ablation.csv"), table.to_csv().as_bytes())?;
    for cell in &table.cells {
        if let Some(err) = &cell.error {
            eprintln!("warning: run (lambda={}, seed={}) failed: {err}", cell.lambda, cell.seed);
        }
    }
    for &l in &table.lambdas {
        println!(
            "lambda={l}: median context_fid overall {} sparse-only {}",
            table
                .median_overall(l)
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "-".into()),
            table
                .median_sparse(l)
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    Ok(table)
}

/// `extrapolate`: the target-variable shift analysis; writes the shift CSV
/// and a small JSON summary.
pub fn cmd_extrapolate(
    checkpoint_path: &Path,
    paths: &DatasetPaths,
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<ShiftReport> {
    ensure_dir(out_dir)?;
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let dataset = load_input_dataset(paths, cfg)?;
    let report = extrapolate_shift(&checkpoint, &dataset, &cfg.extrapolate, 1, seed)?;
    atomic_write(&out_dir.join("shift.csv"), report.to_csv().as_bytes())?;
    let summary = format!(
        "{{\n  \"pearson_model_vs_matched\": {},\n  \"eligible_combinations\": {},\n  \"matched_groups\": {}\n}}\n",
        report.pearson_model_vs_matched, report.eligible_combinations, report.matched_groups
    );
    atomic_write(&out_dir.join("shift_summary.json"), summary.as_bytes())?;
    println!(
        "extrapolated over {} combinations; pearson(model, context-matched) = {:.4}",
        report.eligible_combinations, report.pearson_model_vs_matched
    );
    Ok(report)
}

/// `inspect-checkpoint`: a human-readable summary.
pub fn cmd_inspect(checkpoint_path: &Path) -> Result<String> {
    let cp: Checkpoint = load_checkpoint(checkpoint_path)?;
    let mut out = String::new();
    out.push_str(&format!("format version : {}\n", cp.version));
    out.push_str(&format!("model          : {}\n", cp.config.model.as_str()));
    out.push_str(&format!("preset         : {}\n", cp.config.preset.as_str()));
    out.push_str(&format!("series         : T={} d={}\n", cp.t_len, cp.channels));
    out.push_str(&format!("lambda_aux     : {}\n", cp.config.lambda_aux));
    out.push_str(&format!("seed           : {}\n", cp.config.seed));
    out.push_str(&format!("epochs logged  : {}\n", cp.log.len()));
    if let Some(last) = cp.log.last() {
        out.push_str(&format!("final loss     : {:.6}\n", last.loss_total));
    }
    out.push_str("context vars   :");
    for (name, cats) in cp.vocabulary.variables() {
        out.push_str(&format!(" {}({})", name, cats.len()));
    }
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_text;

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("cents_cli_tests").join(name);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_cfg() -> ExperimentConfig {
        let text = "\
[faux]\nn_households = 16\ndays_per_household = 4\n\n[train]\nepochs = 2\nbatch_size = 32\nnormalizer_steps = 150\nt_steps = 10\ntrunk_hidden = 16\nencoder_hidden = 16\nhead_hidden = 8\nnoise_dim = 8\nh_dim = 8\nembed_dim = 8\ntop_k = 3\n";
        ExperimentConfig::from_raw(&parse_config_text(text).unwrap()).unwrap()
    }

    #[test]
    fn synth_data_round_trips_through_csv() {
        let out = tmp_dir("synth");
        let cfg = small_cfg();
        cmd_synth_data(&cfg, 5, &out).unwrap();
        let paths = DatasetPaths {
            profiles: out.join("profiles.csv"),
            metadata: out.join("metadata.csv"),
        };
        let ds = load_input_dataset(&paths, &cfg).unwrap();
        assert_eq!(ds.len(), 16 * 4);
        // Byte-identical on rerun with the same seed.
        let before = std::fs::read(out.join("profiles.csv")).unwrap();
        cmd_synth_data(&cfg, 5, &out).unwrap();
        let after = std::fs::read(out.join("profiles.csv")).unwrap();
        assert_eq!(before, after);
        // Ground-truth file lists every effect kind.
        let truth = std::fs::read_to_string(out.join("ground_truth.csv")).unwrap();
        for kind in ["amplitude", "phase", "trend", "level", "pv_dip"] {
            assert!(truth.contains(kind), "missing {kind}");
        }
    }

    #[test]
    fn train_generate_evaluate_pipeline() {
        let out = tmp_dir("pipeline");
        let cfg = small_cfg();
        cmd_synth_data(&cfg, 6, &out).unwrap();
        let paths = DatasetPaths {
            profiles: out.join("profiles.csv"),
            metadata: out.join("metadata.csv"),
        };
        let ckpt = cmd_train(&cfg, &paths, &out).unwrap();
        assert!(out.join("training_log.csv").exists());

        let gen_out = tmp_dir("pipeline_gen");
        let syn = cmd_generate(
            &ckpt,
            &ContextSource::AllTrainContexts(paths.clone()),
            &cfg,
            1,
            9,
            &gen_out,
        )
        .unwrap();
        assert_eq!(syn.len(), 16 * 4);

        // Synthetic output re-ingests through the real vocabulary.
        let report_path = out.join("report.json");
        let syn_paths = DatasetPaths {
            profiles: gen_out.join("synthetic_profiles.csv"),
            metadata: gen_out.join("synthetic_metadata.csv"),
        };
        let report = cmd_evaluate(&paths, &syn_paths, &cfg, true, 3, &report_path).unwrap();
        assert!(report.overall.context_fid.is_finite());
        let text = std::fs::read_to_string(&report_path).unwrap();
        crate::metrics::MetricReport::from_json(&text).unwrap();

        let summary = cmd_inspect(&ckpt).unwrap();
        assert!(summary.contains("diffusion"));
    }

    #[test]
    fn contexts_file_is_parsed_and_validated() {
        let out = tmp_dir("ctx");
        let cfg = small_cfg();
        cmd_synth_data(&cfg, 7, &out).unwrap();
        let paths = DatasetPaths {
            profiles: out.join("profiles.csv"),
            metadata: out.join("metadata.csv"),
        };
        let ds = load_input_dataset(&paths, &cfg).unwrap();
        let ctx_path = out.join("contexts.csv");
        std::fs::write(
            &ctx_path,
            "location,building_type,month,weekday\nloc00,bt01,jan,mon\nloc01,bt00,jun,sat\n",
        )
        .unwrap();
        let contexts = parse_contexts_file(&ctx_path, &ds.vocabulary).unwrap();
        assert_eq!(contexts.len(), 2);
        assert_eq!(contexts[0], vec![0, 1, 0, 0]);
        assert_eq!(contexts[1], vec![1, 0, 5, 5]);

        // Bad category errors with its line number.
        std::fs::write(
            &ctx_path,
            "location,building_type,month,weekday\nloc00,bt01,jan,mon\nloc99,bt00,jun,sat\n",
        )
        .unwrap();
        let err = parse_contexts_file(&ctx_path, &ds.vocabulary).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");

        // Missing variable in the header is rejected.
        std::fs::write(&ctx_path, "location,month,weekday\nloc00,jan,mon\n").unwrap();
        let err = parse_contexts_file(&ctx_path, &ds.vocabulary).unwrap_err();
        assert!(err.to_string().contains("building_type"), "{err}");
    }
}
