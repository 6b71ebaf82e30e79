use gibbsline::measures::{projective_gap, weakstar_distance, PeriodicWeighting};
use gibbsline::{CylinderMeasure, MarkovMeasure, PairInteraction, PeriodicMeasure, PerronOptions, Word};
use proptest::prelude::*;

fn dyson3() -> PairInteraction {
    PairInteraction::dyson(3.0, 1.0, 1.0).unwrap()
}

fn opts() -> PerronOptions {
    PerronOptions::default()
}

fn words(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1usize << n).map(move |i| (0..n).map(|k| ((i >> (n - 1 - k)) & 1) as u8).collect())
}

#[test]
fn markov_measure_axioms() {
    for r in 1..=6 {
        let m = MarkovMeasure::new(&dyson3(), r, opts()).unwrap();
        for n in 1..=8 {
            let level = m.level(n).unwrap();
            let total: f64 = level.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "r={r} n={n}: mass {total}");
            for w in words(n) {
                let p = m.prob(&w).unwrap();
                let mut right = w.clone();
                right.push(0);
                let mut right1 = w.clone();
                right1.push(1);
                let ext_right = m.prob(&right).unwrap() + m.prob(&right1).unwrap();
                let mut left0 = vec![0u8];
                left0.extend(&w);
                let mut left1 = vec![1u8];
                left1.extend(&w);
                let ext_left = m.prob(&left0).unwrap() + m.prob(&left1).unwrap();
                assert!((p - ext_right).abs() < 1e-10, "consistency r={r} w={w:?}");
                assert!((p - ext_left).abs() < 1e-10, "shift invariance r={r} w={w:?}");
            }
        }
    }
}

#[test]
fn zero_interaction_is_uniform() {
    let zero = PairInteraction::zero(gibbsline::Alphabet::spins());
    for r in 1..=4 {
        let m = MarkovMeasure::new(&zero, r, opts()).unwrap();
        assert!((m.spectral().rho - 2.0).abs() < 1e-12);
        for n in 1..=6 {
            for w in words(n) {
                assert!((m.prob(&w).unwrap() - 0.5f64.powi(n as i32)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn periodic_transfer_matches_enumeration() {
    let i = dyson3();
    for r in 1..=3 {
        for p in r.max(2)..=14 {
            let fast = PeriodicMeasure::transfer(&i, r, p, opts()).unwrap();
            let slow = PeriodicMeasure::bruteforce(&i, Some(r), p, 22, PeriodicWeighting::FullPeriod, 1e-12).unwrap();
            // Words longer than the period are rejected by both engines.
            for n in 1..=4.min(p) {
                for w in words(n) {
                    let (a, b) = (fast.prob(&w).unwrap(), slow.prob(&w).unwrap());
                    assert!((a - b).abs() <= 1e-10, "r={r} p={p} w={w:?}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn periodic_state_masses_sum_to_one() {
    let p = PeriodicMeasure::transfer(&dyson3(), 3, 20, opts()).unwrap();
    let total: f64 = p.state_masses().unwrap().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    // Joint masses marginalize to single-state masses.
    let masses = p.state_masses().unwrap();
    for s in [3, 5, 9] {
        for (a, mass) in masses.iter().enumerate() {
            let row: f64 = (0..8).map(|b| p.joint_states(a, b, s).unwrap()).sum();
            assert!((row - mass).abs() < 1e-12, "s={s} a={a}");
        }
    }
}

#[test]
fn weakstar_distance_to_long_range_shrinks() {
    let i = dyson3();
    let reference = MarkovMeasure::new(&i, 12, opts()).unwrap();
    let dist: Vec<f64> = (2..=8)
        .map(|r| {
            let m = MarkovMeasure::new(&i, r, opts()).unwrap();
            weakstar_distance(&m, &reference, 6).unwrap().value
        })
        .collect();
    assert!(dist.first().unwrap() > &(10.0 * dist.last().unwrap()), "{dist:?}");
    assert!(dist.iter().all(|d| *d >= 0.0));
}

#[test]
fn projective_gap_within_epsilon() {
    let i = dyson3();
    let g = i.default_growth();
    for r in 1..=8 {
        let a = MarkovMeasure::new(&i, r, opts()).unwrap();
        let b = MarkovMeasure::new(&i, r + 1, opts()).unwrap();
        let gap = projective_gap(&a, &b, 6).unwrap();
        assert!(gap.value <= i.epsilon_r(&g, r).unwrap(), "r={r}: {}", gap.value);
        assert!(gap.value >= 0.0);
    }
}

#[test]
fn joint_cylinders_marginalize() {
    let m = MarkovMeasure::new(&dyson3(), 3, opts()).unwrap();
    let a = Word::from_symbols(vec![0, 1]);
    for s in [2u64, 3, 7] {
        let total: f64 = words(2)
            .map(|b| m.joint_cylinder(&a, &Word::from_symbols(b), s).unwrap())
            .sum();
        assert!((total - m.cylinder(&a).unwrap()).abs() < 1e-12, "s={s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cylinders_are_probabilities(alpha in 2.2f64..6.0, beta in 0.0f64..1.5, coupling in -1.0f64..1.0, r in 1usize..=5, w in prop::collection::vec(0u8..2, 1..9)) {
        let i = PairInteraction::dyson(alpha, beta, coupling).unwrap();
        let m = MarkovMeasure::new(&i, r, opts()).unwrap();
        let p = m.prob(&w).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        let mut ext = w.clone();
        ext.push(0);
        prop_assert!(m.prob(&ext).unwrap() <= p * (1.0 + 1e-12));
    }

    #[test]
    fn correlations_decouple_far_apart(r in 1usize..=4, a in prop::collection::vec(0u8..2, 4), b in prop::collection::vec(0u8..2, 4)) {
        // Joint cylinders are defined for words up to the range.
        let (a, b) = (a[..r].to_vec(), b[..r].to_vec());
        let m = MarkovMeasure::new(&dyson3(), r, opts()).unwrap();
        let ratio = m
            .correlation_ratio(&Word::from_symbols(a), &Word::from_symbols(b), 200)
            .unwrap();
        prop_assert!((ratio - 1.0).abs() < 1e-9);
    }
}
