//! Banded mean squared error against the per-timestep min/max envelope of
//! same-context real series.

use crate::error::{Error, Result};
use crate::numerics::Array;

/// Per-timestep, per-channel envelope of real values (kWh).
#[derive(Debug, Clone)]
pub struct Band {
    pub lower: Array,
    pub upper: Array,
}

impl Band {
    /// Envelope over a non-empty collection of [T × d] series.
    pub fn from_series<'a>(series: impl IntoIterator<Item = &'a Array>) -> Result<Band> {
        let mut iter = series.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Data("band over an empty series set".into()))?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for s in iter {
            if s.shape() != lower.shape() {
                return Err(Error::shape("band series", s.shape(), lower.shape()));
            }
            for (i, &v) in s.values().iter().enumerate() {
                if v < lower.values()[i] {
                    lower.values_mut()[i] = v;
                }
                if v > upper.values()[i] {
                    upper.values_mut()[i] = v;
                }
            }
        }
        Ok(Band { lower, upper })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmseMode {
    /// Zero inside the band, min squared bound distance outside (default).
    OutsideOnly,
    /// min((x − lower)², (x − upper)²) everywhere.
    Literal,
}

/// Mean over timesteps (and channels) of the banded squared error.
pub fn bmse(xg: &Array, band: &Band, mode: BmseMode) -> Result<f64> {
    if xg.shape() != band.lower.shape() {
        return Err(Error::shape("bmse series vs band", xg.shape(), band.lower.shape()));
    }
    let n = xg.len() as f64;
    let mut total = 0.0;
    for i in 0..xg.len() {
        let x = xg.values()[i];
        let lo = band.lower.values()[i];
        let hi = band.upper.values()[i];
        let term = match mode {
            BmseMode::OutsideOnly => {
                if x >= lo && x <= hi {
                    0.0
                } else {
                    (x - lo).powi(2).min((x - hi).powi(2))
                }
            }
            BmseMode::Literal => (x - lo).powi(2).min((x - hi).powi(2)),
        };
        total += term;
    }
    Ok(total / n)
}
