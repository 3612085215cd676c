//! Seeded generator of ground-truth household datasets. Series are an exact
//! deterministic function of the context codes plus Gaussian noise, so tests
//! and extrapolation experiments have an oracle for every context effect.

use chrono::{Days, NaiveDate};

use crate::data::{month_code, weekday_code, ContextVocabulary, Dataset, LoadProfile};
use crate::error::{Error, Result};
use crate::numerics::{Array, RngState};

/// Configuration of the faux data generator.
#[derive(Debug, Clone)]
pub struct FauxSpec {
    pub n_households: usize,
    pub days_per_household: usize,
    /// Steps per daily profile.
    pub t: usize,
    /// Channels: 1 = load only, 2 = load + pv generation.
    pub d: usize,
    pub location_cardinality: usize,
    pub building_cardinality: usize,
    /// Include the pv ownership variable (required for extrapolation runs).
    pub with_pv: bool,
    /// Fraction of households owning pv, when `with_pv` is set.
    pub pv_fraction: f64,
    /// Base kWh level and daily sinusoid amplitude.
    pub base_level: f64,
    pub base_amplitude: f64,
    /// Scale of per-category additive effects.
    pub amplitude_effect: f64,
    pub phase_effect: f64,
    pub trend_effect: f64,
    /// Depth of the midday load dip for pv households (kWh, positive).
    pub pv_dip_depth: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_level: f64,
    /// Lag-1 autocorrelation of the noise process (0 = white noise).
    pub noise_ar: f64,
    /// Fraction of households assigned the reserved rare pairing of
    /// otherwise-common location/building categories. The pair's profile is
    /// the plain additive composition of its category effects, so a model
    /// with disentangled context representations can extrapolate to it.
    pub sparsity_injection_rate: f64,
    pub start_date: NaiveDate,
}

impl FauxSpec {
    /// Small load-only dataset with injected context sparsity:
    /// 4 context variables (location, building type, month, weekday).
    pub fn desk_sparse() -> FauxSpec {
        FauxSpec {
            n_households: 100,
            days_per_household: 20,
            t: 24,
            d: 1,
            location_cardinality: 3,
            building_cardinality: 3,
            with_pv: false,
            pv_fraction: 0.0,
            base_level: 1.0,
            base_amplitude: 0.4,
            amplitude_effect: 0.3,
            phase_effect: 1.0,
            trend_effect: 0.2,
            pv_dip_depth: 0.0,
            noise_level: 0.05,
            noise_ar: 0.6,
            sparsity_injection_rate: 0.05,
            start_date: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
        }
    }

    /// Load-only dataset with a pv ownership variable and a configured midday
    /// dip, for extrapolation experiments.
    pub fn desk_pv() -> FauxSpec {
        FauxSpec {
            with_pv: true,
            pv_fraction: 0.5,
            pv_dip_depth: 0.6,
            sparsity_injection_rate: 0.0,
            ..FauxSpec::desk_sparse()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_households == 0 || self.days_per_household == 0 {
            return Err(Error::Config("faux: household and day counts must be positive".into()));
        }
        if self.t < 4 {
            return Err(Error::Config("faux: t must be at least 4".into()));
        }
        if self.d != 1 && self.d != 2 {
            return Err(Error::Config("faux: d must be 1 or 2".into()));
        }
        if self.d == 2 && !self.with_pv {
            return Err(Error::Config("faux: two-channel data requires the pv variable".into()));
        }
        if self.location_cardinality < 2 || self.building_cardinality < 2 {
            return Err(Error::Config("faux: cardinalities must be at least 2".into()));
        }
        if self.noise_level < 0.0 {
            return Err(Error::Config("faux: noise level must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.noise_ar) {
            return Err(Error::Config("faux: noise_ar must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.pv_fraction)
            || !(0.0..=1.0).contains(&self.sparsity_injection_rate)
        {
            return Err(Error::Config("faux: fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Exact per-category effects used by the generator, exported so experiments
/// can compare model output against the truth.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// (kind, variable, category index, value) with kind one of
    /// amplitude/phase/trend/level.
    pub effects: Vec<(String, String, usize, f64)>,
    /// Per-timestep load-channel delta applied to pv households.
    pub pv_dip_profile: Vec<f64>,
}

impl GroundTruth {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,index,value\n");
        for (kind, var, idx, val) in &self.effects {
            out.push_str(&format!("{kind},{var},{idx},{val}\n"));
        }
        for (t, v) in self.pv_dip_profile.iter().enumerate() {
            out.push_str(&format!("pv_dip,load,{t},{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GroundTruth> {
        let mut effects = Vec::new();
        let mut dip = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::DataRow {
                    row: lineno + 1,
                    message: "expected kind,name,index,value".into(),
                });
            }
            let idx: usize = fields[2].parse().map_err(|_| Error::DataRow {
                row: lineno + 1,
                message: format!("bad index {:?}", fields[2]),
            })?;
            let val: f64 = fields[3].parse().map_err(|_| Error::DataRow {
                row: lineno + 1,
                message: format!("bad value {:?}", fields[3]),
            })?;
            if fields[0] == "pv_dip" {
                dip.push((idx, val));
            } else {
                effects.push((fields[0].to_string(), fields[1].to_string(), idx, val));
            }
        }
        dip.sort_by_key(|&(t, _)| t);
        Ok(GroundTruth {
            effects,
            pv_dip_profile: dip.into_iter().map(|(_, v)| v).collect(),
        })
    }
}

/// Per-category effect tables for one spec. Category index == integer code
/// because category names sort in index order.
struct Effects {
    loc_amp: Vec<f64>,
    loc_phase: Vec<f64>,
    loc_trend: Vec<f64>,
    bld_amp: Vec<f64>,
    bld_phase: Vec<f64>,
    bld_trend: Vec<f64>,
    month_amp: Vec<f64>,
    weekday_level: Vec<f64>,
    pv_dip: Vec<f64>,
}

impl Effects {
    fn new(spec: &FauxSpec) -> Effects {
        let ramp = |j: usize, card: usize, scale: f64| -> f64 {
            scale * j as f64 / (card.max(2) - 1) as f64
        };
        let l = spec.location_cardinality;
        let b = spec.building_cardinality;
        Effects {
            loc_amp: (0..l).map(|j| ramp(j, l, spec.amplitude_effect)).collect(),
            loc_phase: (0..l).map(|j| ramp(j, l, spec.phase_effect)).collect(),
            loc_trend: (0..l).map(|j| ramp(j, l, spec.trend_effect)).collect(),
            bld_amp: (0..b).map(|j| ramp(j, b, 0.5 * spec.amplitude_effect)).collect(),
            bld_phase: (0..b).map(|j| ramp(j, b, 0.5 * spec.phase_effect)).collect(),
            bld_trend: (0..b).map(|j| ramp(j, b, 0.5 * spec.trend_effect)).collect(),
            month_amp: (0..12)
                .map(|m| 0.25 * spec.base_amplitude * (2.0 * std::f64::consts::PI * m as f64 / 12.0).cos())
                .collect(),
            weekday_level: (0..7)
                .map(|w| if w >= 5 { 0.15 * spec.base_level } else { 0.0 })
                .collect(),
            pv_dip: (0..spec.t)
                .map(|t| {
                    let c = t as f64 / (spec.t - 1) as f64;
                    -spec.pv_dip_depth * (-((c - 0.5) * (c - 0.5)) / (2.0 * 0.12 * 0.12)).exp()
                })
                .collect(),
        }
    }

    fn ground_truth(&self) -> GroundTruth {
        let mut effects = Vec::new();
        let push = |effects: &mut Vec<(String, String, usize, f64)>, kind: &str, var: &str, vals: &[f64]| {
            for (j, &v) in vals.iter().enumerate() {
                effects.push((kind.to_string(), var.to_string(), j, v));
            }
        };
        push(&mut effects, "amplitude", "location", &self.loc_amp);
        push(&mut effects, "phase", "location", &self.loc_phase);
        push(&mut effects, "trend", "location", &self.loc_trend);
        push(&mut effects, "amplitude", "building_type", &self.bld_amp);
        push(&mut effects, "phase", "building_type", &self.bld_phase);
        push(&mut effects, "trend", "building_type", &self.bld_trend);
        push(&mut effects, "amplitude", "month", &self.month_amp);
        push(&mut effects, "level", "weekday", &self.weekday_level);
        GroundTruth {
            effects,
            pv_dip_profile: self.pv_dip.clone(),
        }
    }
}

/// Generates a dataset plus the exact effect record behind it.
pub fn generate_faux_dataset(spec: &FauxSpec, seed: u64) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = RngState::new(seed);
    let effects = Effects::new(spec);

    let pad = |prefix: &str, j: usize| format!("{prefix}{j:02}");
    let mut columns: Vec<(String, Vec<String>)> = vec![
        (
            "location".to_string(),
            (0..spec.location_cardinality).map(|j| pad("loc", j)).collect(),
        ),
        (
            "building_type".to_string(),
            (0..spec.building_cardinality).map(|j| pad("bt", j)).collect(),
        ),
    ];
    if spec.with_pv {
        columns.push(("pv".to_string(), vec!["no".to_string(), "yes".to_string()]));
    }
    let vocabulary = ContextVocabulary::build(&columns)?;
    let month_vi = vocabulary.variable_index("month").unwrap();
    let weekday_vi = vocabulary.variable_index("weekday").unwrap();
    let pv_vi = vocabulary.variable_index("pv");

    let n_sparse = (spec.sparsity_injection_rate * spec.n_households as f64).round() as usize;
    // The reserved rare pairing: both categories stay common through other
    // pairings, only their combination is rare.
    let rare_loc = spec.location_cardinality - 1;
    let rare_bld = spec.building_cardinality - 1;

    let mut profiles = Vec::with_capacity(spec.n_households * spec.days_per_household);
    for hh in 0..spec.n_households {
        let sparse_household = hh < n_sparse;
        let (loc, bld) = if sparse_household {
            (rare_loc, rare_bld)
        } else {
            // Uniform over every pair except the reserved one (when active).
            loop {
                let l = rng.below(spec.location_cardinality);
                let b = rng.below(spec.building_cardinality);
                if n_sparse == 0 || l != rare_loc || b != rare_bld {
                    break (l, b);
                }
            }
        };
        let pv = spec.with_pv && rng.uniform() < spec.pv_fraction;
        let start = spec
            .start_date
            .checked_add_days(Days::new((hh as u64 * 37) % 330))
            .ok_or_else(|| Error::Config("faux: start date overflow".into()))?;
        for day in 0..spec.days_per_household {
            let date = start
                .checked_add_days(Days::new(day as u64))
                .ok_or_else(|| Error::Config("faux: date overflow".into()))?;
            let m = month_code(date);
            let w = weekday_code(date);
            let mut codes = vec![loc, bld];
            if let Some(pvi) = pv_vi {
                debug_assert_eq!(pvi, 2);
                codes.push(if pv { 1 } else { 0 });
            }
            codes.push(m);
            codes.push(w);
            debug_assert_eq!(codes[month_vi], m);
            debug_assert_eq!(codes[weekday_vi], w);

            let series = synth_series(spec, &effects, loc, bld, pv, m, w, &mut rng);
            profiles.push(LoadProfile {
                series,
                date,
                household_id: format!("h{hh:04}"),
                context_codes: codes,
            });
        }
    }
    let dataset = Dataset::new(profiles, vocabulary)?;
    Ok((dataset, effects.ground_truth()))
}

#[allow(clippy::too_many_arguments)]
fn synth_series(
    spec: &FauxSpec,
    fx: &Effects,
    loc: usize,
    bld: usize,
    pv: bool,
    month: usize,
    weekday: usize,
    rng: &mut RngState,
) -> Array {
    let two_pi = 2.0 * std::f64::consts::PI;
    let level = spec.base_level + fx.weekday_level[weekday];
    let amp = spec.base_amplitude + fx.loc_amp[loc] + fx.bld_amp[bld] + fx.month_amp[month];
    let phase = fx.loc_phase[loc] + fx.bld_phase[bld];
    let trend = fx.loc_trend[loc] + fx.bld_trend[bld];
    let mut series = Array::zeros(&[spec.t, spec.d]);
    let rho = spec.noise_ar;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut noise = rng.normal();
    let mut noise_pv = rng.normal();
    for t in 0..spec.t {
        let c = t as f64 / (spec.t - 1) as f64;
        let mut v = level + amp * (two_pi * c + phase).sin() + trend * (c - 0.5);
        if pv {
            v += fx.pv_dip[t];
        }
        if t > 0 {
            noise = rho * noise + innovation * rng.normal();
            noise_pv = rho * noise_pv + innovation * rng.normal();
        }
        v += spec.noise_level * noise;
        series.set2(t, 0, v);
        if spec.d == 2 {
            let gen = if pv {
                -fx.pv_dip[t] + spec.noise_level * noise_pv
            } else {
                0.0
            };
            series.set2(t, 1, gen);
        }
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_profiles_are_functions_of_context() {
        let spec = FauxSpec {
            noise_level: 0.0,
            ..FauxSpec::desk_sparse()
        };
        let (ds, _) = generate_faux_dataset(&spec, 11).unwrap();
        let groups = ds.group_by_context();
        for (_, idxs) in groups {
            let first = &ds.profiles[idxs[0]].series;
            for &i in &idxs[1..] {
                assert_eq!(ds.profiles[i].series.values(), first.values());
            }
        }
    }

    #[test]
    fn same_seed_identical_dataset() {
        let spec = FauxSpec::desk_sparse();
        let (a, _) = generate_faux_dataset(&spec, 5).unwrap();
        let (b, _) = generate_faux_dataset(&spec, 5).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.profiles.iter().zip(&b.profiles) {
            assert_eq!(pa.series.values(), pb.series.values());
            assert_eq!(pa.context_codes, pb.context_codes);
            assert_eq!(pa.date, pb.date);
        }
    }

    #[test]
    fn pv_dip_recovered_within_three_standard_errors() {
        let spec = FauxSpec {
            n_households: 200,
            days_per_household: 10,
            ..FauxSpec::desk_pv()
        };
        let (ds, truth) = generate_faux_dataset(&spec, 3).unwrap();
        let pv_vi = ds.vocabulary.variable_index("pv").unwrap();
        // Mean per-timestep difference at the dip trough.
        let t_mid = spec.t / 2;
        let (mut pv_vals, mut non_vals) = (Vec::new(), Vec::new());
        for p in &ds.profiles {
            let v = p.series.at2(t_mid, 0);
            if p.context_codes[pv_vi] == 1 {
                pv_vals.push(v);
            } else {
                non_vals.push(v);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
        let (mp, mn) = (mean(&pv_vals), mean(&non_vals));
        let se = (var(&pv_vals, mp) / pv_vals.len() as f64
            + var(&non_vals, mn) / non_vals.len() as f64)
            .sqrt();
        let observed = mp - mn;
        let expected = truth.pv_dip_profile[t_mid];
        assert!(
            (observed - expected).abs() <= 3.0 * se,
            "observed {observed}, expected {expected}, se {se}"
        );
    }

    #[test]
    fn ground_truth_csv_round_trip() {
        let spec = FauxSpec::desk_pv();
        let (_, truth) = generate_faux_dataset(&spec, 1).unwrap();
        let text = truth.to_csv();
        let back = GroundTruth::from_csv(&text).unwrap();
        assert_eq!(truth.effects, back.effects);
        assert_eq!(truth.pv_dip_profile, back.pv_dip_profile);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = FauxSpec::desk_sparse();
        spec.location_cardinality = 1;
        assert!(spec.validate().is_err());
        let mut spec = FauxSpec::desk_sparse();
        spec.noise_level = -0.1;
        assert!(spec.validate().is_err());
        let mut spec = FauxSpec::desk_sparse();
        spec.d = 2; // needs with_pv
        assert!(spec.validate().is_err());
    }
}
