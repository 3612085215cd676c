//! Dataset ingestion, context vocabulary coding, faux ground-truth data
//! generation, and the sparsity proxy-label procedure.

pub mod csv_io;
pub mod faux;
pub mod kmeans;
pub mod sparsity;
pub mod vocab;

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::numerics::Array;

pub use faux::{generate_faux_dataset, FauxSpec, GroundTruth};
pub use kmeans::kmeans;
pub use sparsity::{label_sparsity, SparsityConfig};
pub use vocab::ContextVocabulary;

/// One daily time series: T steps × d channels of kWh values, paired with a
/// context code vector.
#[derive(Debug, Clone)]
pub struct LoadProfile {
    /// [T × d] kWh values.
    pub series: Array,
    pub date: NaiveDate,
    pub household_id: String,
    pub context_codes: Vec<usize>,
}

impl LoadProfile {
    pub fn t_len(&self) -> usize {
        self.series.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.series.shape()[1]
    }
}

/// Month code with January = 0.
pub fn month_code(date: NaiveDate) -> usize {
    date.month0() as usize
}

/// Weekday code with Monday = 0.
pub fn weekday_code(date: NaiveDate) -> usize {
    date.weekday().num_days_from_monday() as usize
}

/// A set of profiles sharing one vocabulary, plus an optional per-profile
/// sparsity mask.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub profiles: Vec<LoadProfile>,
    pub vocabulary: ContextVocabulary,
    pub sparsity_mask: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(profiles: Vec<LoadProfile>, vocabulary: ContextVocabulary) -> Result<Dataset> {
        let ds = Dataset {
            profiles,
            vocabulary,
            sparsity_mask: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::Data("dataset has no profiles".into()));
        }
        let t = self.profiles[0].t_len();
        let d = self.profiles[0].channels();
        let n_vars = self.vocabulary.len();
        for (i, p) in self.profiles.iter().enumerate() {
            if p.t_len() != t || p.channels() != d {
                return Err(Error::Data(format!(
                    "profile {i} has shape {:?}, expected [{t}, {d}]",
                    p.series.shape()
                )));
            }
            if !p.series.all_finite() {
                return Err(Error::Data(format!("profile {i} contains non-finite values")));
            }
            if p.context_codes.len() != n_vars {
                return Err(Error::Data(format!(
                    "profile {i} has {} context codes, vocabulary has {n_vars} variables",
                    p.context_codes.len()
                )));
            }
            for (vi, &code) in p.context_codes.iter().enumerate() {
                let card = self.vocabulary.cardinality(vi);
                if code >= card {
                    return Err(Error::IndexOutOfRange {
                        name: self.vocabulary.variable_name(vi).to_string(),
                        index: code,
                        len: card,
                    });
                }
            }
        }
        if let Some(mask) = &self.sparsity_mask {
            if mask.len() != self.profiles.len() {
                return Err(Error::Data("sparsity mask length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn t_len(&self) -> usize {
        self.profiles[0].t_len()
    }

    pub fn channels(&self) -> usize {
        self.profiles[0].channels()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Profiles grouped by full context combination, in deterministic order.
    pub fn group_by_context(&self) -> BTreeMap<Vec<usize>, Vec<usize>> {
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (i, p) in self.profiles.iter().enumerate() {
            groups.entry(p.context_codes.clone()).or_default().push(i);
        }
        groups
    }

    /// Count of profiles per context combination.
    pub fn context_counts(&self) -> BTreeMap<Vec<usize>, usize> {
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for p in &self.profiles {
            *counts.entry(p.context_codes.clone()).or_default() += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calendar_codes() {
        // 2018-01-01 is a Monday in January.
        let date = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
        assert_eq!(weekday_code(date), 0);
        assert_eq!(month_code(date), 0);
        // 2018-12-30 is a Sunday in December.
        let date = NaiveDate::from_ymd_opt(2018, 12, 30).unwrap();
        assert_eq!(weekday_code(date), 6);
        assert_eq!(month_code(date), 11);
    }
}
