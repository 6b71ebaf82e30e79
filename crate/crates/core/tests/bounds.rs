use gibbsline::thermo::{check_lemma1, check_lemma2, check_theorem1, check_theorem2, check_theorem3, Schedule};
use gibbsline::{Alphabet, PairInteraction, PerronOptions};

fn dyson3() -> PairInteraction {
    PairInteraction::dyson(3.0, 1.0, 1.0).unwrap()
}

fn opts() -> PerronOptions {
    PerronOptions::default()
}

#[test]
fn periodic_approximation_grid() {
    let i = dyson3();
    for r in [2, 3] {
        for p in [24, 36, 48] {
            let reps = check_lemma1(&i, r, p, 4, opts()).unwrap();
            assert_eq!(reps.len(), 2 + 4 + 8 + 16);
            for rep in &reps {
                assert!(rep.satisfied, "r={r} p={p}: {rep:?}");
                assert!(rep.tight_constant.unwrap() <= 12.0);
            }
        }
    }
}

#[test]
fn periodic_approximation_improves_with_period() {
    let i = dyson3();
    let worst = |p| {
        check_lemma1(&i, 2, p, 3, opts())
            .unwrap()
            .iter()
            .map(|r| r.measured)
            .fold(0.0, f64::max)
    };
    let (a, b, c) = (worst(12), worst(24), worst(48));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn range_refinement_within_window_bound() {
    let i = dyson3();
    let g = i.default_growth();
    for (r, rp) in [(2, 4), (3, 6), (4, 8)] {
        let c = check_theorem1(&i, &g, r, rp, 8, opts()).unwrap();
        assert!(c.reports.iter().all(|rep| rep.satisfied), "r={r}");
        assert!(c.gap_report.satisfied);
        assert!(c.gap.value <= c.epsilon_r);
    }
    let eps: Vec<f64> = (2..=10).map(|r| i.epsilon_r(&g, r).unwrap()).collect();
    assert!(eps.windows(2).all(|w| w[1] < w[0]), "{eps:?}");
}

#[test]
fn periodic_factorization() {
    let c = check_lemma2(&dyson3(), 2, 48, &[2, 4, 8, 16], opts()).unwrap();
    assert!(c.reports.iter().all(|r| r.satisfied));
    assert!(c.tau <= c.eta);
    assert!(c.d_hat > 0.0);
}

#[test]
fn mixing_envelope_covers_tail() {
    let i = dyson3();
    let g = i.default_growth();
    let grid: Vec<usize> = (1..=12).map(|k| 4 * k).collect();
    let c = check_theorem2(&i, &g, &grid, 0.5, Schedule::Power { xi: 0.5 }, 10, opts()).unwrap();
    let s_star = c.s_star.expect("envelope covers a tail");
    assert!(c.fitted_c > 0.0);
    for p in c.points.iter().filter(|p| p.s >= s_star) {
        assert_ne!(p.covered, Some(false), "s={}", p.s);
    }
}

#[test]
fn entropy_and_pressure_convergence() {
    let i = dyson3();
    let g = i.default_growth();
    let c = check_theorem3(&i, &g, &[2, 3, 4, 5, 6, 7, 8], 10, opts()).unwrap();
    assert!(c.fitted_eps > 0.0);
    for t in &c.thermo {
        assert!(
            (t.entropy_variational - t.entropy_conditional).abs() < 1e-8,
            "r={}",
            t.r
        );
    }
    assert!(c.reports.iter().all(|r| r.satisfied));
}

#[test]
fn zero_model_measures_nothing() {
    let zero = PairInteraction::zero(Alphabet::spins());
    for rep in check_lemma1(&zero, 2, 24, 4, opts()).unwrap() {
        assert!(rep.measured.abs() < 1e-12);
        assert!(rep.satisfied);
    }
    for rep in check_lemma2(&zero, 2, 24, &[2, 4], opts()).unwrap().reports {
        assert!(rep.measured.abs() < 1e-12);
    }
}

#[test]
fn override_models_are_refused() {
    let i = PairInteraction::new(
        gibbsline::InteractionKind::Dyson {
            alpha: 1.5,
            beta: 1.0,
            coupling: 1.0,
        },
        Alphabet::spins(),
        None,
        true,
    );
    let i = match i {
        Ok(i) => i,
        Err(e) => panic!("override should construct: {e}"),
    };
    let err = check_lemma1(&i, 2, 24, 4, opts()).unwrap_err();
    assert!(
        matches!(err, gibbsline::Error::Divergent(_) | gibbsline::Error::Refused(_)),
        "{err}"
    );
}
