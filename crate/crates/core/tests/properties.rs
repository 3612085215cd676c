//! Property tests over the transform and metric invariants.

use proptest::prelude::*;

use cents_core::data::ContextVocabulary;
use cents_core::metrics::{mdtwd, mmd, Bandwidth};
use cents_core::normalizer::{denormalize, normalize, NormStats, DEFAULT_DELTA};
use cents_core::numerics::Array;

fn stats_strategy(d: usize) -> impl Strategy<Value = NormStats> {
    (
        prop::collection::vec(-5.0..5.0f64, d),
        prop::collection::vec(0.0..3.0f64, d),
        prop::collection::vec(-3.0..0.0f64, d),
        prop::collection::vec(0.0..4.0f64, d),
    )
        .prop_map(move |(mu, sigma, z_min, gap)| NormStats {
            mu: Array::from_vec(&[d], mu).unwrap(),
            sigma: Array::from_vec(&[d], sigma).unwrap(),
            z_min: Array::from_vec(&[d], z_min.clone()).unwrap(),
            z_max: Array::from_vec(
                &[d],
                z_min.iter().zip(&gap).map(|(a, b)| a + b).collect(),
            )
            .unwrap(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_denormalize_are_exact_inverses(
        stats in stats_strategy(2),
        values in prop::collection::vec(-20.0..20.0f64, 16),
    ) {
        let x = Array::from_vec(&[8, 2], values).unwrap();
        let z = normalize(&x, &stats, DEFAULT_DELTA).unwrap();
        let back = denormalize(&z, &stats, DEFAULT_DELTA).unwrap();
        prop_assert!(x.max_abs_diff(&back) < 1e-9);
    }

    #[test]
    fn mdtwd_axioms(
        a_vals in prop::collection::vec(-5.0..5.0f64, 12),
        b_vals in prop::collection::vec(-5.0..5.0f64, 12),
    ) {
        let a = Array::from_vec(&[6, 2], a_vals).unwrap();
        let b = Array::from_vec(&[6, 2], b_vals).unwrap();
        prop_assert_eq!(mdtwd(&a, &a).unwrap(), 0.0);
        let ab = mdtwd(&a, &b).unwrap();
        let ba = mdtwd(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        // Bounded above by the diagonal alignment.
        let diag: f64 = (0..6)
            .map(|t| (0..2).map(|c| (a.at2(t, c) - b.at2(t, c)).powi(2)).sum::<f64>())
            .sum();
        prop_assert!(ab <= diag + 1e-12);
    }

    #[test]
    fn mmd_axioms(
        a in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 4), 5..15),
        b in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 4), 5..15),
    ) {
        prop_assert_eq!(mmd(&a, &a, Bandwidth::Fixed(1.0)).unwrap(), 0.0);
        let ab = mmd(&a, &b, Bandwidth::Fixed(1.0)).unwrap();
        let ba = mmd(&b, &a, Bandwidth::Fixed(1.0)).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_coding_round_trips(
        names in prop::collection::vec("[a-z]{1,6}", 1..4),
    ) {
        let mut unique = names.clone();
        unique.sort();
        unique.dedup();
        let columns: Vec<(String, Vec<String>)> = unique
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let cats: Vec<String> = (0..(2 + i % 3)).map(|c| format!("c{c}")).collect();
                (n.clone(), cats)
            })
            .collect();
        let vocab = ContextVocabulary::build(&columns).unwrap();
        for vi in 0..vocab.len() {
            for code in 0..vocab.cardinality(vi) {
                let name = vocab.decode(vi, code).unwrap().to_string();
                prop_assert_eq!(vocab.encode(vi, &name).unwrap(), code);
            }
        }
    }
}
