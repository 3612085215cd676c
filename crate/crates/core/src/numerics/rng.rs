use crate::error::{Error, Result};

/// Deterministic PRNG: a splitmix64 stream, normals via Box–Muller.
///
/// The entire sequence is a pure function of the seed, so two runs with equal
/// seeds replay bit-identical streams on any platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    state: u64,
}

impl RngState {
    pub fn new(seed: u64) -> RngState {
        RngState { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// Derive an independent child stream. Used to hand disjoint streams to
    /// parallel jobs without sharing mutable state.
    pub fn split(&mut self, tag: u64) -> RngState {
        let base = self.next_u64();
        RngState {
            state: base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the cosine branch of Box–Muller.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] keeps the log finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Sample an index from a categorical distribution.
    pub fn categorical(&mut self, p: &[f64]) -> Result<usize> {
        if p.is_empty() {
            return Err(Error::Usage("categorical: empty probability vector".into()));
        }
        let total: f64 = p.iter().sum();
        if p.iter().any(|&x| !x.is_finite() || x < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Usage(format!(
                "categorical: probabilities must be non-negative and sum to 1 (got sum {total})"
            )));
        }
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return Ok(i);
            }
        }
        Ok(p.len() - 1)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }

    /// Deterministic in-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::new(7);
        let mut b = RngState::new(7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut a = RngState::new(7);
        let mut b = RngState::new(7);
        for _ in 0..1000 {
            assert!(a.normal() == b.normal());
        }
    }

    #[test]
    fn normals_have_unit_moments() {
        let mut rng = RngState::new(123);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn uniform_in_range() {
        let mut rng = RngState::new(9);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn degenerate_categorical_always_first() {
        let mut rng = RngState::new(5);
        for _ in 0..100 {
            assert_eq!(rng.categorical(&[1.0, 0.0, 0.0]).unwrap(), 0);
        }
    }

    #[test]
    fn invalid_categorical_rejected() {
        let mut rng = RngState::new(5);
        assert!(rng.categorical(&[0.5, 0.2]).is_err());
        assert!(rng.categorical(&[]).is_err());
        assert!(rng.categorical(&[1.5, -0.5]).is_err());
    }
}
