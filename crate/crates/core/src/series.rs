//! Tail sums `Σ_{s≥from} s^γ·exp(−c·s^δ)` with a direct head and an
//! Euler–Maclaurin remainder.
//!
//! Every tail that appears in the interaction constants has this shape: power
//! tails of the couplings (`c = 0`), geometric couplings (`δ = 1`) and the
//! stretched terms `s·η^(s^δ)` of the projective-convergence rate. The
//! remainder uses the exact integral (an upper incomplete gamma function when
//! `c > 0`) plus the `f/2`, `f′/12` and `f‴/720` corrections; the magnitude of
//! the last correction is reported as the error estimate and the cut point is
//! pushed out until it is below the requested tolerance.

use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const MIN_CUT: u64 = 64;
const MAX_CUT: u64 = 1 << 24;

/// `f(s) = s^γ · exp(−c · s^δ)` on `s ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Term {
    pub gamma: f64,
    pub c: f64,
    pub delta: f64,
}

impl Term {
    pub fn power(gamma: f64) -> Self {
        Self {
            gamma,
            c: 0.0,
            delta: 1.0,
        }
    }

    pub fn converges(&self) -> bool {
        if self.c > 0.0 && self.delta > 0.0 {
            true
        } else {
            self.gamma < -1.0
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        if self.c == 0.0 {
            s.powf(self.gamma)
        } else {
            (self.gamma * s.ln() - self.c * s.powf(self.delta)).exp()
        }
    }

    /// `(f, f′, f‴)` at `s`.
    fn derivatives(&self, s: f64) -> (f64, f64, f64) {
        let f = self.value(s);
        let (g, c, d) = (self.gamma, self.c, self.delta);
        let h1 = g / s - c * d * s.powf(d - 1.0);
        let h2 = -g / (s * s) - c * d * (d - 1.0) * s.powf(d - 2.0);
        let h3 = 2.0 * g / (s * s * s) - c * d * (d - 1.0) * (d - 2.0) * s.powf(d - 3.0);
        (f, f * h1, f * (h3 + 3.0 * h1 * h2 + h1 * h1 * h1))
    }

    /// `∫_k^∞ f(s) ds`.
    fn integral_from(&self, k: f64) -> f64 {
        if self.c == 0.0 {
            k.powf(self.gamma + 1.0) / (-self.gamma - 1.0)
        } else {
            let a = (self.gamma + 1.0) / self.delta;
            let x = self.c * k.powf(self.delta);
            let q = gamma_ur(a, x);
            if q <= 0.0 {
                return 0.0;
            }
            (ln_gamma(a) + q.ln() - self.delta.ln() - a * self.c.ln()).exp()
        }
    }
}

/// A computed sum with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summed {
    pub value: f64,
    pub error: f64,
}

/// Compensated (Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `Σ_{s=from}^{to} f(s)`, summed from the small end.
pub(crate) fn finite_sum(term: &Term, from: u64, to: u64) -> f64 {
    let mut acc = Neumaier::default();
    let mut s = to;
    while s >= from && s >= 1 {
        acc.add(term.value(s as f64));
        s -= 1;
    }
    acc.total()
}

/// `Σ_{s≥from} f(s)` with absolute error estimate below `max(tol, 1e−15·|sum|)`.
pub(crate) fn tail_sum(term: &Term, from: u64, tol: f64) -> Result<Summed> {
    if !term.converges() {
        return Err(Error::Divergent(format!(
            "Σ s^{} exp(−{}·s^{}) diverges",
            term.gamma, term.c, term.delta
        )));
    }
    let from = from.max(1);
    let mut cut = from.max(MIN_CUT);
    let (remainder, err) = loop {
        let k = cut as f64;
        let (f, f1, f3) = term.derivatives(k);
        let rem = term.integral_from(k) + 0.5 * f - f1 / 12.0 + f3 / 720.0;
        let err = (f3 / 720.0).abs();
        let scale = rem.abs().max(f * (k - from as f64 + 1.0));
        if err <= tol.max(1e-15 * scale) || cut >= MAX_CUT {
            break (rem, err);
        }
        cut *= 2;
    };
    let head = if cut > from {
        finite_sum(term, from, cut - 1)
    } else {
        0.0
    };
    let value = head + remainder;
    Ok(Summed {
        value,
        error: err + 4.0 * f64::EPSILON * value.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Oracle: plain summation far out plus the integral bound on what is left.
    fn brute_power(e: f64, from: u64, terms: u64) -> f64 {
        let mut acc = Neumaier::default();
        for k in (from..from + terms).rev() {
            acc.add((k as f64).powf(-e));
        }
        let last = (from + terms) as f64;
        acc.total() + last.powf(1.0 - e) / (e - 1.0) - 0.5 * last.powf(-e)
    }

    #[test]
    fn zeta_values() {
        let z2 = tail_sum(&Term::power(-2.0), 1, 1e-14).unwrap();
        assert!((z2.value - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
        let z3 = tail_sum(&Term::power(-3.0), 1, 1e-14).unwrap();
        assert!((z3.value - 1.202_056_903_159_594_2).abs() < 1e-13);
        let z4 = tail_sum(&Term::power(-4.0), 1, 1e-14).unwrap();
        assert!((z4.value - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-13);
    }

    #[test]
    fn power_tail_against_direct_summation() {
        let direct = brute_power(3.0, 10, 1_000_000);
        let t = tail_sum(&Term::power(-3.0), 10, 1e-12).unwrap();
        assert!((t.value - direct).abs() < 1e-12, "{} vs {}", t.value, direct);
    }

    #[test]
    fn geometric_tail_closed_form() {
        for &theta in &[0.1f64, 0.5, 0.9, 0.99] {
            let c = -theta.ln();
            let t = tail_sum(
                &Term {
                    gamma: 0.0,
                    c,
                    delta: 1.0,
                },
                5,
                1e-14,
            )
            .unwrap();
            let exact = theta.powi(5) / (1.0 - theta);
            assert!((t.value - exact).abs() < 1e-12 * exact.max(1.0), "θ={theta}");
            let t1 = tail_sum(
                &Term {
                    gamma: 1.0,
                    c,
                    delta: 1.0,
                },
                1,
                1e-14,
            )
            .unwrap();
            let exact1 = theta / (1.0 - theta).powi(2);
            assert!((t1.value - exact1).abs() < 1e-11 * exact1, "θ={theta}");
        }
    }

    #[test]
    fn stretched_tail_against_long_direct_sum() {
        // Σ s η^{√s} with η = 0.5: terms vanish below 1e-300 long before 10^6.
        let eta: f64 = 0.5;
        let term = Term {
            gamma: 1.0,
            c: -eta.ln(),
            delta: 0.5,
        };
        let direct = finite_sum(&term, 3, 2_000_000);
        let t = tail_sum(&term, 3, 1e-12).unwrap();
        assert!((t.value - direct).abs() < 1e-9 * direct, "{} vs {}", t.value, direct);
    }

    #[test]
    fn divergence_detected() {
        assert!(matches!(
            tail_sum(&Term::power(-1.0), 1, 1e-12),
            Err(Error::Divergent(_))
        ));
        assert!(matches!(
            tail_sum(&Term::power(-0.7), 1, 1e-12),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn tails_telescope() {
        let term = Term::power(-2.5);
        let full = tail_sum(&term, 1, 1e-14).unwrap().value;
        for r in 1..64u64 {
            let tail = tail_sum(&term, r, 1e-14).unwrap().value;
            let head = if r > 1 { finite_sum(&term, 1, r - 1) } else { 0.0 };
            assert!((tail + head - full).abs() < 1e-13);
        }
    }
}
