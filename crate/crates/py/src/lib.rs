//! Python bindings: faux data generation, training, sampling, persistence,
//! and the metric suite, mirroring the `cents` CLI surface.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cents_core::config::ExtrapolateSection;
use cents_core::data::csv_io;
use cents_core::data::{generate_faux_dataset, label_sparsity, FauxSpec, SparsityConfig};
use cents_core::error::Error as CoreError;
use cents_core::experiments;
use cents_core::metrics;
use cents_core::normalizer;
use cents_core::numerics::Array;
use cents_core::trainer::{self, ModelKind, TrainConfig};

fn to_py_err(e: CoreError) -> PyErr {
    match e {
        CoreError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn series_to_array(series: Vec<Vec<f64>>) -> PyResult<Array> {
    let t = series.len();
    if t == 0 {
        return Err(PyValueError::new_err("series must be non-empty"));
    }
    let d = series[0].len();
    let mut values = Vec::with_capacity(t * d);
    for row in &series {
        if row.len() != d {
            return Err(PyValueError::new_err("series rows must share one length"));
        }
        values.extend_from_slice(row);
    }
    Array::from_vec(&[t, d], values).map_err(to_py_err)
}

fn array_to_series(a: &Array) -> Vec<Vec<f64>> {
    let (t, d) = (a.shape()[0], a.shape()[1]);
    (0..t)
        .map(|ti| (0..d).map(|ch| a.at2(ti, ch)).collect())
        .collect()
}

fn apply_faux_overrides(spec: &mut FauxSpec, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<()> {
    let Some(kwargs) = kwargs else { return Ok(()) };
    for (key, value) in kwargs.iter() {
        let key: String = key.extract()?;
        match key.as_str() {
            "n_households" => spec.n_households = value.extract()?,
            "days_per_household" => spec.days_per_household = value.extract()?,
            "t" => spec.t = value.extract()?,
            "d" => spec.d = value.extract()?,
            "location_cardinality" => spec.location_cardinality = value.extract()?,
            "building_cardinality" => spec.building_cardinality = value.extract()?,
            "with_pv" => spec.with_pv = value.extract()?,
            "pv_fraction" => spec.pv_fraction = value.extract()?,
            "base_level" => spec.base_level = value.extract()?,
            "base_amplitude" => spec.base_amplitude = value.extract()?,
            "amplitude_effect" => spec.amplitude_effect = value.extract()?,
            "phase_effect" => spec.phase_effect = value.extract()?,
            "trend_effect" => spec.trend_effect = value.extract()?,
            "pv_dip_depth" => spec.pv_dip_depth = value.extract()?,
            "noise_level" => spec.noise_level = value.extract()?,
            "noise_ar" => spec.noise_ar = value.extract()?,
            "sparsity_injection_rate" => spec.sparsity_injection_rate = value.extract()?,
            other => {
                return Err(PyValueError::new_err(format!("unknown faux option {other:?}")))
            }
        }
    }
    Ok(())
}

/// A dataset of daily load profiles with a shared context vocabulary.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
pub struct Dataset {
    inner: cents_core::data::Dataset,
}

#[pymethods]
impl Dataset {
    /// Loads profiles + metadata CSVs. Context columns default to every
    /// metadata column.
    #[staticmethod]
    #[pyo3(signature = (profiles, metadata, context_columns=None))]
    fn from_csv(
        profiles: PathBuf,
        metadata: PathBuf,
        context_columns: Option<Vec<String>>,
    ) -> PyResult<Dataset> {
        let columns = match context_columns {
            Some(c) => c,
            None => csv_io::read_metadata_csv(&metadata).map_err(to_py_err)?.columns,
        };
        let inner = csv_io::load_dataset(&profiles, &metadata, &columns).map_err(to_py_err)?;
        Ok(Dataset { inner })
    }

    /// Writes the profiles and metadata CSVs.
    fn to_csv(&self, profiles: PathBuf, metadata: PathBuf) -> PyResult<()> {
        csv_io::write_profiles_csv(&self.inner, &profiles).map_err(to_py_err)?;
        csv_io::write_metadata_csv(&self.inner, &metadata).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn t_len(&self) -> usize {
        self.inner.t_len()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    /// Ordered (name, categories) pairs of the context vocabulary.
    #[getter]
    fn vocabulary(&self) -> Vec<(String, Vec<String>)> {
        self.inner.vocabulary.variables().to_vec()
    }

    /// The kWh series of one profile as a T×d nested list.
    fn series(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let p = self
            .inner
            .profiles
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("profile index {index} out of range")))?;
        Ok(array_to_series(&p.series))
    }

    /// Context category names of one profile, in vocabulary order.
    fn context(&self, index: usize) -> PyResult<Vec<String>> {
        let p = self
            .inner
            .profiles
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("profile index {index} out of range")))?;
        p.context_codes
            .iter()
            .enumerate()
            .map(|(vi, &c)| {
                self.inner
                    .vocabulary
                    .decode(vi, c)
                    .map(|s| s.to_string())
                    .map_err(to_py_err)
            })
            .collect()
    }

    /// Computes and attaches the sparsity proxy labels; returns the mask.
    #[pyo3(signature = (k=10, freq_percentile=0.90, cluster_fraction=0.10, seed=0))]
    fn label_sparsity(
        &mut self,
        k: usize,
        freq_percentile: f64,
        cluster_fraction: f64,
        seed: u64,
    ) -> PyResult<Vec<bool>> {
        let cfg = SparsityConfig {
            freq_percentile,
            cluster_fraction,
            k,
            seed,
        };
        let mask = label_sparsity(&self.inner, &cfg).map_err(to_py_err)?;
        self.inner.sparsity_mask = Some(mask.clone());
        Ok(mask)
    }
}

/// Generates a faux dataset; keyword arguments override the default spec.
/// Returns (dataset, ground_truth_csv_text).
#[pyfunction]
#[pyo3(signature = (seed=0, with_pv=false, **kwargs))]
fn synth_dataset(
    seed: u64,
    with_pv: bool,
    kwargs: Option<&Bound<'_, PyDict>>,
) -> PyResult<(Dataset, String)> {
    let mut spec = if with_pv { FauxSpec::desk_pv() } else { FauxSpec::desk_sparse() };
    apply_faux_overrides(&mut spec, kwargs)?;
    let (dataset, truth) = generate_faux_dataset(&spec, seed).map_err(to_py_err)?;
    Ok((Dataset { inner: dataset }, truth.to_csv()))
}

/// Training configuration; construct with `desk(...)` or `paper(...)`.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
pub struct Config {
    inner: TrainConfig,
}

fn apply_train_overrides(cfg: &mut TrainConfig, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<()> {
    let Some(kwargs) = kwargs else { return Ok(()) };
    let mut pairs = Vec::new();
    for (key, value) in kwargs.iter() {
        let key: String = key.extract()?;
        let value = if let Ok(s) = value.extract::<String>() {
            s
        } else if let Ok(b) = value.extract::<bool>() {
            b.to_string()
        } else if let Ok(i) = value.extract::<i64>() {
            i.to_string()
        } else {
            value.extract::<f64>()?.to_string()
        };
        pairs.push((key, value));
    }
    // Route through the canonical key/value parser so names match config files.
    let mut all = cfg.to_pairs();
    all.retain(|(k, _)| !pairs.iter().any(|(pk, _)| pk == k));
    all.extend(pairs);
    *cfg = TrainConfig::from_pairs(&all).map_err(to_py_err)?;
    Ok(())
}

#[pymethods]
impl Config {
    /// Desk-scale preset; kwargs override any train key, e.g.
    /// `Config.desk("diffusion", epochs=50, lambda_aux=0.1)`.
    #[staticmethod]
    #[pyo3(signature = (model="diffusion", **kwargs))]
    fn desk(model: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Config> {
        let mut inner = TrainConfig::desk(ModelKind::parse(model).map_err(to_py_err)?);
        apply_train_overrides(&mut inner, kwargs)?;
        Ok(Config { inner })
    }

    /// Published full-scale hyperparameters.
    #[staticmethod]
    #[pyo3(signature = (model="diffusion", **kwargs))]
    fn paper(model: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Config> {
        let mut inner = TrainConfig::paper(ModelKind::parse(model).map_err(to_py_err)?);
        apply_train_overrides(&mut inner, kwargs)?;
        Ok(Config { inner })
    }

    /// Every config key and value as a dict.
    fn to_dict(&self) -> HashMap<String, String> {
        self.inner.to_pairs().into_iter().collect()
    }
}

/// A trained model bundle (normalizer, context encoder, generator).
#[pyclass]
pub struct Checkpoint {
    inner: trainer::Checkpoint,
}

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Checkpoint> {
        Ok(Checkpoint {
            inner: trainer::load_checkpoint(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        trainer::save_checkpoint(&self.inner, &path).map_err(to_py_err)
    }

    /// Per-epoch (loss_gen, loss_aux, loss_total) tuples.
    #[getter]
    fn training_log(&self) -> Vec<(usize, f64, f64, f64)> {
        self.inner
            .log
            .iter()
            .map(|e| (e.epoch, e.loss_gen, e.loss_aux, e.loss_total))
            .collect()
    }

    #[getter]
    fn vocabulary(&self) -> Vec<(String, Vec<String>)> {
        self.inner.vocabulary.variables().to_vec()
    }

    /// Samples `per_context` synthetic profiles for each context, given as
    /// category names in vocabulary order. Unseen combinations are allowed.
    fn generate(
        &self,
        contexts: Vec<Vec<String>>,
        per_context: usize,
        seed: u64,
    ) -> PyResult<Dataset> {
        let vocab = &self.inner.vocabulary;
        let coded: Vec<Vec<usize>> = contexts
            .iter()
            .map(|ctx| {
                if ctx.len() != vocab.len() {
                    return Err(PyValueError::new_err(format!(
                        "context needs {} values, got {}",
                        vocab.len(),
                        ctx.len()
                    )));
                }
                ctx.iter()
                    .enumerate()
                    .map(|(vi, v)| vocab.encode(vi, v).map_err(to_py_err))
                    .collect()
            })
            .collect::<PyResult<_>>()?;
        let ds = trainer::generate_dataset(&self.inner, &coded, per_context, seed)
            .map_err(to_py_err)?;
        Ok(Dataset { inner: ds })
    }

    /// Predicted normalization statistics (mu, sigma, z_min, z_max) for a
    /// context, one value per channel.
    fn predict_stats(&self, context: Vec<String>) -> PyResult<HashMap<String, Vec<f64>>> {
        let vocab = &self.inner.vocabulary;
        let codes: Vec<usize> = context
            .iter()
            .enumerate()
            .map(|(vi, v)| vocab.encode(vi, v).map_err(to_py_err))
            .collect::<PyResult<_>>()?;
        let stats = self.inner.normalizer.predict_stats(&codes).map_err(to_py_err)?;
        let mut out = HashMap::new();
        out.insert("mu".to_string(), stats.mu.values().to_vec());
        out.insert("sigma".to_string(), stats.sigma.values().to_vec());
        out.insert("z_min".to_string(), stats.z_min.values().to_vec());
        out.insert("z_max".to_string(), stats.z_max.values().to_vec());
        Ok(out)
    }

    /// The compressed context embedding h for a context.
    fn encode_context(&self, context: Vec<String>) -> PyResult<Vec<f64>> {
        let vocab = &self.inner.vocabulary;
        let codes: Vec<usize> = context
            .iter()
            .enumerate()
            .map(|(vi, v)| vocab.encode(vi, v).map_err(to_py_err))
            .collect::<PyResult<_>>()?;
        let h = self.inner.encoder.encode(&codes).map_err(to_py_err)?;
        Ok(h.h.values().to_vec())
    }
}

/// Trains the normalizer, context encoder, and generator on a dataset.
#[pyfunction]
fn train(config: &Config, dataset: &Dataset) -> PyResult<Checkpoint> {
    Ok(Checkpoint {
        inner: trainer::train(&config.inner, &dataset.inner).map_err(to_py_err)?,
    })
}

/// Runs the full metric suite; returns the report as a dict (via JSON).
#[pyfunction]
#[pyo3(signature = (real, synthetic, seed=0, sparsity_mask=None))]
fn evaluate(
    py: Python<'_>,
    real: &Dataset,
    synthetic: &Dataset,
    seed: u64,
    sparsity_mask: Option<Vec<bool>>,
) -> PyResult<Py<PyAny>> {
    let mask = sparsity_mask.or_else(|| real.inner.sparsity_mask.clone());
    let report = metrics::evaluate_all(&real.inner, &synthetic.inner, mask.as_deref(), seed)
        .map_err(to_py_err)?;
    let json = report.to_json();
    let json_mod = py.import("json")?;
    let obj = json_mod.call_method1("loads", (json,))?;
    Ok(obj.unbind())
}

/// Multivariate dynamic time warping distance between two T×d series.
#[pyfunction]
fn mdtwd(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::mdtwd(&series_to_array(a)?, &series_to_array(b)?).map_err(to_py_err)
}

/// RBF-kernel maximum mean discrepancy between two sample sets (each sample a
/// flat vector). Bandwidth defaults to the median heuristic.
#[pyfunction]
#[pyo3(signature = (a, b, bandwidth=None))]
fn mmd(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, bandwidth: Option<f64>) -> PyResult<f64> {
    let bw = match bandwidth {
        Some(s) => metrics::Bandwidth::Fixed(s),
        None => metrics::Bandwidth::Median,
    };
    metrics::mmd(&a, &b, bw).map_err(to_py_err)
}

/// The deterministic per-series feature embedding used by Context-FID.
#[pyfunction]
fn feature_embed(series: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    metrics::feature_embed(&series_to_array(series)?).map_err(to_py_err)
}

/// Forward context normalization of a T×d series given explicit statistics.
#[pyfunction]
#[pyo3(signature = (series, mu, sigma, z_min, z_max, delta=1e-5))]
fn normalize(
    series: Vec<Vec<f64>>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    z_min: Vec<f64>,
    z_max: Vec<f64>,
    delta: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let stats = build_stats(mu, sigma, z_min, z_max)?;
    let z = normalizer::normalize(&series_to_array(series)?, &stats, delta).map_err(to_py_err)?;
    Ok(array_to_series(&z))
}

/// Exact inverse of `normalize` under the same statistics and delta.
#[pyfunction]
#[pyo3(signature = (series, mu, sigma, z_min, z_max, delta=1e-5))]
fn denormalize(
    series: Vec<Vec<f64>>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    z_min: Vec<f64>,
    z_max: Vec<f64>,
    delta: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let stats = build_stats(mu, sigma, z_min, z_max)?;
    let x = normalizer::denormalize(&series_to_array(series)?, &stats, delta).map_err(to_py_err)?;
    Ok(array_to_series(&x))
}

fn build_stats(
    mu: Vec<f64>,
    sigma: Vec<f64>,
    z_min: Vec<f64>,
    z_max: Vec<f64>,
) -> PyResult<normalizer::NormStats> {
    let d = mu.len();
    let stats = normalizer::NormStats {
        mu: Array::from_vec(&[d], mu).map_err(to_py_err)?,
        sigma: Array::from_vec(&[d], sigma).map_err(to_py_err)?,
        z_min: Array::from_vec(&[d], z_min).map_err(to_py_err)?,
        z_max: Array::from_vec(&[d], z_max).map_err(to_py_err)?,
    };
    stats.validate().map_err(to_py_err)?;
    Ok(stats)
}

/// The per-timestep extrapolation shift analysis for a binary context
/// variable; returns a dict of shift arrays plus the Pearson correlation.
#[pyfunction]
#[pyo3(signature = (checkpoint, dataset, target_variable="pv", match_variables=None, samples_per_state=16, seed=0))]
fn extrapolate_shift(
    py: Python<'_>,
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    target_variable: &str,
    match_variables: Option<Vec<String>>,
    samples_per_state: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let opts = ExtrapolateSection {
        target_variable: target_variable.to_string(),
        match_variables: match_variables
            .unwrap_or_else(|| vec!["location".to_string(), "building_type".to_string()]),
        samples_per_state,
        max_combinations: 64,
    };
    let report = experiments::extrapolate_shift(&checkpoint.inner, &dataset.inner, &opts, 1, seed)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("model_shift", report.model_shift)?;
    out.set_item("dataset_avg_shift", report.dataset_avg_shift)?;
    out.set_item("context_matched_shift", report.context_matched_shift)?;
    out.set_item("pearson_model_vs_matched", report.pearson_model_vs_matched)?;
    out.set_item("eligible_combinations", report.eligible_combinations)?;
    out.set_item("matched_groups", report.matched_groups)?;
    Ok(out.into_any().unbind())
}

#[pymodule]
fn cents_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Config>()?;
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(mdtwd, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(feature_embed, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(denormalize, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolate_shift, m)?)?;
    Ok(())
}
