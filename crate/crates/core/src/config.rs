//! Experiment configuration: a flat, typed key/value text format with
//! section headers. Unknown sections and keys are rejected before any work
//! starts; command-line flags override file keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::data::{FauxSpec, SparsityConfig};
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Parsed but untyped config: section name → ordered key/value pairs.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub sections: BTreeMap<String, Vec<(String, String)>>,
}

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<RawConfig> {
    let mut out = RawConfig::default();
    let mut current: Option<String> = None;
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unclosed section header", lineno + 1)))?
                .trim()
                .to_string();
            out.sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1))
        })?;
        let section = current
            .clone()
            .ok_or_else(|| Error::Config(format!("line {}: key outside any [section]", lineno + 1)))?;
        out.sections
            .get_mut(&section)
            .unwrap()
            .push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<RawConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config_text(&text)
}

const KNOWN_SECTIONS: &[&str] = &["data", "faux", "train", "sparsity", "ablation", "extrapolate"];

/// Input dataset file paths plus the declared context columns (defaults to
/// every metadata column when empty).
#[derive(Debug, Clone, Default)]
pub struct DataSection {
    pub profiles: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub context_columns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AblationSection {
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            lambdas: vec![0.0, 0.1],
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtrapolateSection {
    /// Context variable whose missing state gets generated.
    pub target_variable: String,
    /// Grouping variables for the context-matched shift.
    pub match_variables: Vec<String>,
    pub samples_per_state: usize,
    /// Cap on eligible combinations (seeded subsample above the cap).
    pub max_combinations: usize,
}

impl Default for ExtrapolateSection {
    fn default() -> Self {
        ExtrapolateSection {
            target_variable: "pv".to_string(),
            match_variables: vec!["location".to_string(), "building_type".to_string()],
            samples_per_state: 16,
            max_combinations: 64,
        }
    }
}

/// Everything a command can read from one config file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub faux: FauxSpec,
    pub train: TrainConfig,
    pub sparsity: SparsityConfig,
    pub ablation: AblationSection,
    pub extrapolate: ExtrapolateSection,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<ExperimentConfig> {
        for name in raw.sections.keys() {
            if !KNOWN_SECTIONS.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown config section [{name}] (known: {})",
                    KNOWN_SECTIONS.join(", ")
                )));
            }
        }
        let empty = Vec::new();
        let section = |name: &str| raw.sections.get(name).unwrap_or(&empty);

        let mut data = DataSection::default();
        for (k, v) in section("data") {
            match k.as_str() {
                "profiles" => data.profiles = Some(PathBuf::from(v)),
                "metadata" => data.metadata = Some(PathBuf::from(v)),
                "context_columns" => {
                    data.context_columns = v.split(',').map(|s| s.trim().to_string()).collect()
                }
                other => return Err(Error::Config(format!("unknown [data] key {other:?}"))),
            }
        }

        let faux = faux_from_pairs(section("faux"))?;
        let train = TrainConfig::from_pairs(section("train"))?;
        let sparsity = sparsity_from_pairs(section("sparsity"))?;

        let mut ablation = AblationSection::default();
        for (k, v) in section("ablation") {
            match k.as_str() {
                "lambdas" => ablation.lambdas = parse_list(v, "lambda")?,
                "seeds" => ablation.seeds = parse_list(v, "seed")?,
                other => return Err(Error::Config(format!("unknown [ablation] key {other:?}"))),
            }
        }
        if ablation.lambdas.len() < 2 {
            return Err(Error::Config("ablation needs at least 2 lambda values".into()));
        }
        if ablation.seeds.len() < 3 {
            return Err(Error::Config("ablation needs at least 3 seeds".into()));
        }

        let mut extrapolate = ExtrapolateSection::default();
        for (k, v) in section("extrapolate") {
            match k.as_str() {
                "target_variable" => extrapolate.target_variable = v.clone(),
                "match_variables" => {
                    extrapolate.match_variables =
                        v.split(',').map(|s| s.trim().to_string()).collect()
                }
                "samples_per_state" => {
                    extrapolate.samples_per_state = v
                        .parse()
                        .map_err(|_| Error::Config(format!("bad samples_per_state {v:?}")))?
                }
                "max_combinations" => {
                    extrapolate.max_combinations = v
                        .parse()
                        .map_err(|_| Error::Config(format!("bad max_combinations {v:?}")))?
                }
                other => return Err(Error::Config(format!("unknown [extrapolate] key {other:?}"))),
            }
        }

        Ok(ExperimentConfig {
            data,
            faux,
            train,
            sparsity,
            ablation,
            extrapolate,
        })
    }

    pub fn default_desk() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSection::default(),
            faux: FauxSpec::desk_sparse(),
            train: TrainConfig::desk(crate::trainer::ModelKind::Diffusion),
            sparsity: SparsityConfig::default(),
            ablation: AblationSection::default(),
            extrapolate: ExtrapolateSection::default(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(v: &str, what: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad {what} value {s:?}")))
        })
        .collect()
}

fn faux_from_pairs(pairs: &[(String, String)]) -> Result<FauxSpec> {
    let mut spec = FauxSpec::desk_sparse();
    for (key, value) in pairs {
        let bad = || Error::Config(format!("bad value {value:?} for [faux] key {key}"));
        match key.as_str() {
            "n_households" => spec.n_households = value.parse().map_err(|_| bad())?,
            "days_per_household" => spec.days_per_household = value.parse().map_err(|_| bad())?,
            "t" => spec.t = value.parse().map_err(|_| bad())?,
            "d" => spec.d = value.parse().map_err(|_| bad())?,
            "location_cardinality" => spec.location_cardinality = value.parse().map_err(|_| bad())?,
            "building_cardinality" => spec.building_cardinality = value.parse().map_err(|_| bad())?,
            "with_pv" => spec.with_pv = value.parse().map_err(|_| bad())?,
            "pv_fraction" => spec.pv_fraction = value.parse().map_err(|_| bad())?,
            "base_level" => spec.base_level = value.parse().map_err(|_| bad())?,
            "base_amplitude" => spec.base_amplitude = value.parse().map_err(|_| bad())?,
            "amplitude_effect" => spec.amplitude_effect = value.parse().map_err(|_| bad())?,
            "phase_effect" => spec.phase_effect = value.parse().map_err(|_| bad())?,
            "trend_effect" => spec.trend_effect = value.parse().map_err(|_| bad())?,
            "pv_dip_depth" => spec.pv_dip_depth = value.parse().map_err(|_| bad())?,
            "noise_level" => spec.noise_level = value.parse().map_err(|_| bad())?,
            "noise_ar" => spec.noise_ar = value.parse().map_err(|_| bad())?,
            "sparsity_injection_rate" => {
                spec.sparsity_injection_rate = value.parse().map_err(|_| bad())?
            }
            "start_date" => {
                spec.start_date =
                    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| bad())?
            }
            other => return Err(Error::Config(format!("unknown [faux] key {other:?}"))),
        }
    }
    Ok(spec)
}

fn sparsity_from_pairs(pairs: &[(String, String)]) -> Result<SparsityConfig> {
    let mut cfg = SparsityConfig::default();
    for (key, value) in pairs {
        let bad = || Error::Config(format!("bad value {value:?} for [sparsity] key {key}"));
        match key.as_str() {
            "freq_percentile" => cfg.freq_percentile = value.parse().map_err(|_| bad())?,
            "cluster_fraction" => cfg.cluster_fraction = value.parse().map_err(|_| bad())?,
            "k" => cfg.k = value.parse().map_err(|_| bad())?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            other => return Err(Error::Config(format!("unknown [sparsity] key {other:?}"))),
        }
    }
    Ok(cfg)
}

/// The reference config: every section and key with its default, suitable for
/// `--help` output and as a starting file.
pub fn reference_config() -> String {
    let train = TrainConfig::desk(crate::trainer::ModelKind::Diffusion);
    let mut out = String::new();
    out.push_str("# Reference configuration. Every key is optional; values shown are defaults.\n\n");
    out.push_str("[data]\n");
    out.push_str("# profiles = path/to/profiles.csv\n");
    out.push_str("# metadata = path/to/metadata.csv\n");
    out.push_str("# context_columns = location,building_type   # default: all metadata columns\n\n");
    out.push_str("[faux]\n");
    let faux = FauxSpec::desk_sparse();
    out.push_str(&format!("n_households = {}\n", faux.n_households));
    out.push_str(&format!("days_per_household = {}\n", faux.days_per_household));
    out.push_str(&format!("t = {}\n", faux.t));
    out.push_str(&format!("d = {}\n", faux.d));
    out.push_str(&format!("location_cardinality = {}\n", faux.location_cardinality));
    out.push_str(&format!("building_cardinality = {}\n", faux.building_cardinality));
    out.push_str(&format!("with_pv = {}\n", faux.with_pv));
    out.push_str(&format!("pv_fraction = {}\n", faux.pv_fraction));
    out.push_str(&format!("base_level = {}\n", faux.base_level));
    out.push_str(&format!("base_amplitude = {}\n", faux.base_amplitude));
    out.push_str(&format!("amplitude_effect = {}\n", faux.amplitude_effect));
    out.push_str(&format!("phase_effect = {}\n", faux.phase_effect));
    out.push_str(&format!("trend_effect = {}\n", faux.trend_effect));
    out.push_str(&format!("pv_dip_depth = {}\n", faux.pv_dip_depth));
    out.push_str(&format!("noise_level = {}\n", faux.noise_level));
    out.push_str(&format!("noise_ar = {}\n", faux.noise_ar));
    out.push_str(&format!("sparsity_injection_rate = {}\n", faux.sparsity_injection_rate));
    out.push_str(&format!("start_date = {}\n\n", faux.start_date.format("%Y-%m-%d")));
    out.push_str("[train]\n");
    for (k, v) in train.to_pairs() {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push('\n');
    let sp = SparsityConfig::default();
    out.push_str("[sparsity]\n");
    out.push_str(&format!("freq_percentile = {}\n", sp.freq_percentile));
    out.push_str(&format!("cluster_fraction = {}\n", sp.cluster_fraction));
    out.push_str(&format!("k = {}\n", sp.k));
    out.push_str(&format!("seed = {}\n\n", sp.seed));
    let ab = AblationSection::default();
    out.push_str("[ablation]\n");
    out.push_str(&format!(
        "lambdas = {}\n",
        ab.lambdas.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    ));
    out.push_str(&format!(
        "seeds = {}\n\n",
        ab.seeds.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    ));
    let ex = ExtrapolateSection::default();
    out.push_str("[extrapolate]\n");
    out.push_str(&format!("target_variable = {}\n", ex.target_variable));
    out.push_str(&format!("match_variables = {}\n", ex.match_variables.join(",")));
    out.push_str(&format!("samples_per_state = {}\n", ex.samples_per_state));
    out.push_str(&format!("max_combinations = {}\n", ex.max_combinations));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_overrides() {
        let text = "\
[faux]\nn_households = 12  # comment\nnoise_level = 0.2\n\n[train]\nmodel = acgan\nepochs = 7\n\n[ablation]\nlambdas = 0,0.5\nseeds = 1,2,3\n";
        let raw = parse_config_text(text).unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.faux.n_households, 12);
        assert_eq!(cfg.faux.noise_level, 0.2);
        assert_eq!(cfg.train.model, crate::trainer::ModelKind::Acgan);
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.ablation.lambdas, vec![0.0, 0.5]);
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let raw = parse_config_text("[faux]\nbogus = 1\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw = parse_config_text("[nonsense]\na = 1\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw = parse_config_text("[train]\nlearning = fast\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn keys_outside_sections_rejected() {
        assert!(parse_config_text("a = 1\n").is_err());
    }

    #[test]
    fn reference_config_parses_back() {
        let raw = parse_config_text(&reference_config()).unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.extrapolate.target_variable, "pv");
    }
}
