//! Pair interactions `ψ_k`, their norms and tail sums, the truncated potential
//! `φ_r`, the decay condition and the constants that enter the bounds.
//!
//! The local energy at site 0 is `φ(x) = onsite[x_0] + Σ_{k≥1} ψ_k(x_0, x_k)`;
//! its range-`r` truncation keeps `k < r`. Spin models (Dyson and exponential)
//! use `σ(0) = +1`, `σ(1) = −1`.

use crate::error::{Error, Result};
use crate::lattice::{Alphabet, Word};
use crate::series::{finite_sum, tail_sum, Neumaier, Term};

/// Tolerance used for the constants of [`PairInteraction::constants`] and ε_r.
pub const SERIES_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub enum InteractionKind {
    Zero,
    /// `ψ_k(a,b) = −β·J·σ(a)σ(b)·k^(−α)`.
    Dyson {
        alpha: f64,
        beta: f64,
        coupling: f64,
    },
    /// `ψ_k(a,b) = −β·J·σ(a)σ(b)·θ^k`.
    Exponential {
        theta: f64,
        beta: f64,
        coupling: f64,
    },
    /// Explicit `|A|×|A|` arrays for `k = 1, …, m`; zero beyond `m`.
    Table(Vec<Vec<Vec<f64>>>),
}

/// Norm sequence `‖ψ_k‖`, `k ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
enum Norms {
    Zero,
    Power { scale: f64, alpha: f64 },
    Geometric { scale: f64, theta: f64 },
    Finite(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairInteraction {
    kind: InteractionKind,
    onsite: Vec<f64>,
    alphabet: Alphabet,
    condition_override: bool,
    norms: Norms,
}

/// Growth function `p(r)` of the decay condition.
#[derive(Clone, Debug, PartialEq)]
pub enum GrowthSpec {
    /// `p(r) = r^(1+δ)`.
    Power { delta: f64 },
    /// `p(1), p(2), …` from the table, then `r^(1+tail_delta)`.
    Table { values: Vec<f64>, tail_delta: f64 },
}

impl GrowthSpec {
    pub fn power(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Growth(format!("δ must be positive, got {delta}")));
        }
        Ok(Self::Power { delta })
    }

    pub fn table(values: Vec<f64>, tail_delta: f64) -> Result<Self> {
        if !(tail_delta.is_finite() && tail_delta > 0.0) {
            return Err(Error::Growth(format!("tail δ must be positive, got {tail_delta}")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Growth(format!(
                "table values must be finite and nonnegative, got {v}"
            )));
        }
        Ok(Self::Table { values, tail_delta })
    }

    /// Exponent governing `p(r)/r → ∞` in the tail.
    pub fn delta(&self) -> f64 {
        match self {
            Self::Power { delta } => *delta,
            Self::Table { tail_delta, .. } => *tail_delta,
        }
    }

    pub fn p(&self, r: usize) -> f64 {
        match self {
            Self::Table { values, .. } if r >= 1 && r <= values.len() => values[r - 1],
            _ => (r as f64).powf(1.0 + self.delta()),
        }
    }

    /// Last index covered by an explicit table (0 for the power form).
    fn table_len(&self) -> usize {
        match self {
            Self::Power { .. } => 0,
            Self::Table { values, .. } => values.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionConstants {
    pub r: usize,
    /// `Σ_{k=1}^r k‖ψ_k‖`
    pub c_r: f64,
    /// `Σ_{k≥1} k‖ψ_k‖`
    pub c_inf: f64,
    /// `1 − exp(−2 C_∞)`
    pub eta: f64,
    /// `C_∞ · exp(2 C_∞)`
    pub big_r: f64,
    /// `Σ_{k≥r} ‖ψ_k‖`
    pub tail_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionCheck {
    pub satisfied: bool,
    /// `Σ_{r≥1} p(r)‖ψ_r‖`, `+∞` when divergent.
    pub value: f64,
}

/// Potential of a periodic point together with the truncation used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicPotential {
    pub value: f64,
    /// Upper bound on the neglected tail `Σ_{k>K} ‖ψ_k‖`.
    pub truncation: f64,
}

/// Couplings folded onto the residues of a period `p`.
#[derive(Clone, Debug)]
pub struct PeriodicCouplings {
    period: usize,
    size: usize,
    /// `[m][a][b] ↦ Σ_{1≤k≤K, k≡m (mod p)} ψ_k(a,b)`, flattened.
    folded: Vec<f64>,
    onsite: Vec<f64>,
    pub cutoff: usize,
    pub truncation: f64,
}

impl PeriodicCouplings {
    /// `φ(T^j y)` for the periodic point with window `y`.
    pub fn phi_at(&self, y: &[u8], j: usize) -> f64 {
        let p = self.period;
        let a = y[j] as usize;
        let mut acc = self.onsite[a];
        for m in 0..p {
            let b = y[(j + m) % p] as usize;
            acc += self.folded[(m * self.size + a) * self.size + b];
        }
        acc
    }

    /// Birkhoff sum `S_p φ(y)` over one full period.
    pub fn birkhoff_sum(&self, y: &[u8]) -> f64 {
        (0..self.period).map(|j| self.phi_at(y, j)).sum()
    }
}

fn spin(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

impl PairInteraction {
    /// Builds and validates an interaction. `onsite = None` means all zeros.
    pub fn new(
        kind: InteractionKind,
        alphabet: Alphabet,
        onsite: Option<Vec<f64>>,
        condition_override: bool,
    ) -> Result<Self> {
        let n = alphabet.size();
        let onsite = onsite.unwrap_or_else(|| vec![0.0; n]);
        if onsite.len() != n {
            return Err(Error::Interaction(format!(
                "onsite vector has {} entries, alphabet has {n}",
                onsite.len()
            )));
        }
        if onsite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Interaction("onsite energies must be finite".into()));
        }
        let norms = match &kind {
            InteractionKind::Zero => Norms::Zero,
            InteractionKind::Dyson { alpha, beta, coupling } => {
                if n != 2 {
                    return Err(Error::Interaction("Dyson model needs a two-letter alphabet".into()));
                }
                check_spin_params(*beta, *coupling)?;
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::Interaction(format!("α must be positive, got {alpha}")));
                }
                if *alpha <= 2.0 && !condition_override {
                    return Err(Error::Interaction(format!(
                        "α = {alpha} violates the decay condition Σ p(r)‖ψ_r‖ < ∞ (needs α > 2); \
                         use the condition override for diagnostic runs"
                    )));
                }
                Norms::Power {
                    scale: (beta * coupling).abs(),
                    alpha: *alpha,
                }
            }
            InteractionKind::Exponential { theta, beta, coupling } => {
                if n != 2 {
                    return Err(Error::Interaction(
                        "exponential model needs a two-letter alphabet".into(),
                    ));
                }
                check_spin_params(*beta, *coupling)?;
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::Interaction(format!("θ must lie in (0,1), got {theta}")));
                }
                Norms::Geometric {
                    scale: (beta * coupling).abs(),
                    theta: *theta,
                }
            }
            InteractionKind::Table(tables) => {
                let mut norms = Vec::with_capacity(tables.len());
                for (i, t) in tables.iter().enumerate() {
                    if t.len() != n || t.iter().any(|row| row.len() != n) {
                        return Err(Error::Interaction(format!("ψ_{} is not a {n}×{n} array", i + 1)));
                    }
                    if t.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(Error::Interaction(format!("ψ_{} has a non-finite entry", i + 1)));
                    }
                    norms.push(t.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())));
                }
                Norms::Finite(norms)
            }
        };
        Ok(Self {
            kind,
            onsite,
            alphabet,
            condition_override,
            norms,
        })
    }

    pub fn zero(alphabet: Alphabet) -> Self {
        Self::new(InteractionKind::Zero, alphabet, None, false).expect("zero interaction is always valid")
    }

    pub fn dyson(alpha: f64, beta: f64, coupling: f64) -> Result<Self> {
        Self::new(
            InteractionKind::Dyson { alpha, beta, coupling },
            Alphabet::spins(),
            None,
            false,
        )
    }

    pub fn exponential(theta: f64, beta: f64, coupling: f64) -> Result<Self> {
        Self::new(
            InteractionKind::Exponential { theta, beta, coupling },
            Alphabet::spins(),
            None,
            false,
        )
    }

    pub fn table(alphabet: Alphabet, tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(InteractionKind::Table(tables), alphabet, None, false)
    }

    pub fn with_onsite(self, onsite: Vec<f64>) -> Result<Self> {
        Self::new(self.kind, self.alphabet, Some(onsite), self.condition_override)
    }

    pub fn kind(&self) -> &InteractionKind {
        &self.kind
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn onsite(&self) -> &[f64] {
        &self.onsite
    }

    pub fn condition_override(&self) -> bool {
        self.condition_override
    }

    /// Largest `k` with a possibly nonzero `ψ_k`, or `None` for infinite range.
    pub fn max_range(&self) -> Option<usize> {
        match &self.norms {
            Norms::Zero => Some(0),
            Norms::Finite(v) => Some(v.len()),
            Norms::Power { scale, .. } | Norms::Geometric { scale, .. } if *scale == 0.0 => Some(0),
            _ => None,
        }
    }

    /// `ψ_k(a, b)`; `k = 0` returns the on-site energy of `a`.
    pub fn psi(&self, k: usize, a: usize, b: usize) -> f64 {
        if k == 0 {
            debug_assert_eq!(a, b, "ψ_0 is only evaluated on the diagonal");
            return self.onsite[a];
        }
        match &self.kind {
            InteractionKind::Zero => 0.0,
            InteractionKind::Dyson { alpha, beta, coupling } => {
                -beta * coupling * spin(a) * spin(b) * (k as f64).powf(-alpha)
            }
            InteractionKind::Exponential { theta, beta, coupling } => {
                -beta * coupling * spin(a) * spin(b) * theta.powi(k as i32)
            }
            InteractionKind::Table(tables) => tables.get(k - 1).map_or(0.0, |t| t[a][b]),
        }
    }

    /// `‖ψ_k‖ = max_{a,b} |ψ_k(a,b)|` for `k ≥ 1`.
    pub fn psi_norm(&self, k: usize) -> f64 {
        assert!(k >= 1, "norms are defined for k ≥ 1");
        match &self.norms {
            Norms::Zero => 0.0,
            Norms::Power { scale, alpha } => scale * (k as f64).powf(-alpha),
            Norms::Geometric { scale, theta } => scale * theta.powi(k as i32),
            Norms::Finite(v) => v.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    /// `Σ_{k≥from} k^w ‖ψ_k‖`.
    fn weighted_norm_tail(&self, from: usize, w: f64, tol: f64) -> Result<f64> {
        let from = from.max(1);
        match &self.norms {
            Norms::Zero => Ok(0.0),
            Norms::Finite(v) => Ok(v
                .iter()
                .enumerate()
                .skip(from - 1)
                .map(|(i, n)| ((i + 1) as f64).powf(w) * n)
                .sum()),
            Norms::Power { scale, .. } | Norms::Geometric { scale, .. } if *scale == 0.0 => Ok(0.0),
            Norms::Power { scale, alpha } => {
                let s = tail_sum(&Term::power(w - alpha), from as u64, tol / scale)?;
                Ok(scale * s.value)
            }
            Norms::Geometric { scale, theta } => {
                let term = Term {
                    gamma: w,
                    c: -theta.ln(),
                    delta: 1.0,
                };
                Ok(scale * tail_sum(&term, from as u64, tol / scale)?.value)
            }
        }
    }

    /// `Σ_{s≥from} p(s)‖ψ_s‖`.
    fn growth_weighted_tail(&self, g: &GrowthSpec, from: usize, tol: f64) -> Result<f64> {
        let from = from.max(1);
        let table_len = g.table_len();
        let mut acc = Neumaier::default();
        for s in from..=table_len {
            acc.add(g.p(s) * self.psi_norm(s));
        }
        let tail = self.weighted_norm_tail(from.max(table_len + 1), 1.0 + g.delta(), tol)?;
        acc.add(tail);
        Ok(acc.total())
    }

    /// `Σ_{s≥from} s·η^(p(s)/s)`.
    fn eta_tail(g: &GrowthSpec, eta: f64, from: usize, tol: f64) -> Result<f64> {
        if eta <= 0.0 {
            return Ok(0.0);
        }
        let from = from.max(1);
        let table_len = g.table_len();
        let mut acc = Neumaier::default();
        for s in from..=table_len {
            acc.add(s as f64 * eta.powf(g.p(s) / s as f64));
        }
        let term = Term {
            gamma: 1.0,
            c: -eta.ln(),
            delta: g.delta(),
        };
        acc.add(tail_sum(&term, from.max(table_len + 1) as u64, tol)?.value);
        Ok(acc.total())
    }

    /// `Σ_{k≥r} ‖ψ_k‖` to absolute accuracy `tol` (relative 1e−15 for large sums).
    pub fn tail_norm_sum(&self, r: usize, tol: f64) -> Result<f64> {
        if r == 0 {
            return Err(Error::InvalidArgument("tail sums start at r ≥ 1".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if let Norms::Geometric { scale, theta } = &self.norms {
            return Ok(scale * theta.powi(r as i32) / (1.0 - theta));
        }
        self.weighted_norm_tail(r, 0.0, tol)
    }

    pub fn constants(&self, r: usize) -> Result<InteractionConstants> {
        let c_inf = self.weighted_norm_tail(1, 1.0, SERIES_TOL)?;
        let c_r = match &self.norms {
            Norms::Power { scale, alpha } if *scale > 0.0 => scale * finite_sum(&Term::power(1.0 - alpha), 1, r as u64),
            _ => (1..=r).map(|k| k as f64 * self.psi_norm(k)).sum(),
        };
        let tail_norm = if r == 0 {
            0.0
        } else {
            self.tail_norm_sum(r, SERIES_TOL)?
        };
        Ok(InteractionConstants {
            r,
            c_r: c_r.min(c_inf),
            c_inf,
            eta: -(-2.0 * c_inf).exp_m1(),
            big_r: c_inf * (2.0 * c_inf).exp(),
            tail_norm,
        })
    }

    /// Growth function used when none is configured: `δ = min(0.5, (α−2)/2)` for Dyson.
    pub fn default_growth(&self) -> GrowthSpec {
        let delta = match &self.kind {
            InteractionKind::Dyson { alpha, .. } if *alpha > 2.0 => (0.5f64).min((alpha - 2.0) / 2.0),
            _ => 0.5,
        };
        GrowthSpec::Power { delta }
    }

    pub fn check_condition(&self, g: &GrowthSpec) -> ConditionCheck {
        let value = self.growth_weighted_tail(g, 1, SERIES_TOL).unwrap_or(f64::INFINITY);
        ConditionCheck {
            satisfied: value.is_finite() && g.delta() > 0.0,
            value,
        }
    }

    /// Fails with [`Error::Refused`] unless the default growth certifies the condition.
    pub fn require_condition(&self) -> Result<()> {
        self.require_condition_with(&self.default_growth())
    }

    pub fn require_condition_with(&self, g: &GrowthSpec) -> Result<()> {
        let check = self.check_condition(g);
        if check.satisfied {
            Ok(())
        } else {
            Err(Error::Refused(format!(
                "interaction fails the decay condition (Σ p(r)‖ψ_r‖ = {})",
                check.value
            )))
        }
    }

    /// `ε_r = 2Σ_{s≥r} p(s)‖ψ_s‖ + 24R Σ_{s≥r} s η^(p(s)/s)`.
    pub fn epsilon_r(&self, g: &GrowthSpec, r: usize) -> Result<f64> {
        self.require_condition_with(g)?;
        let k = self.constants(r.max(1))?;
        let first = self.growth_weighted_tail(g, r, SERIES_TOL)?;
        let second = if k.big_r == 0.0 {
            0.0
        } else {
            Self::eta_tail(g, k.eta, r, SERIES_TOL / (24.0 * k.big_r))?
        };
        Ok(2.0 * first + 24.0 * k.big_r * second)
    }

    /// Finite-window version `2Σ_{s=r}^{r'} p(s)‖ψ_s‖ + 24R Σ_{s=r}^{r'} s η^(p(s)/s)`.
    pub fn epsilon_between(&self, g: &GrowthSpec, r: usize, r_prime: usize) -> Result<f64> {
        self.require_condition_with(g)?;
        let k = self.constants(r.max(1))?;
        let mut first = Neumaier::default();
        let mut second = Neumaier::default();
        for s in r.max(1)..=r_prime {
            first.add(g.p(s) * self.psi_norm(s));
            if k.eta > 0.0 {
                second.add(s as f64 * k.eta.powf(g.p(s) / s as f64));
            }
        }
        Ok(2.0 * first.total() + 24.0 * k.big_r * second.total())
    }

    /// `φ̃_r(w) = onsite[w_0] + Σ_{k=1}^{r−1} ψ_k(w_0, w_k)` with `r = |w|`.
    pub fn phi_r_word(&self, w: &Word) -> Result<f64> {
        if w.is_empty() {
            return Err(Error::LengthMismatch { expected: 1, actual: 0 });
        }
        Ok(self.phi_r_symbols(w.symbols()))
    }

    pub(crate) fn phi_r_symbols(&self, s: &[u8]) -> f64 {
        let a = s[0] as usize;
        let mut acc = self.onsite[a];
        for (k, &b) in s.iter().enumerate().skip(1) {
            acc += self.psi(k, a, b as usize);
        }
        acc
    }

    /// Smallest cutoff `K` with `Σ_{k>K} ‖ψ_k‖ < tol`, and that tail.
    pub fn truncation_cutoff(&self, tol: f64) -> Result<(usize, f64)> {
        if let Some(m) = self.max_range() {
            return Ok((m, 0.0));
        }
        let tail_after = |k: usize| self.tail_norm_sum(k + 1, tol * 1e-3);
        let mut hi = 1usize;
        while tail_after(hi)? >= tol {
            hi = hi
                .checked_mul(2)
                .filter(|&h| h <= 1 << 30)
                .ok_or_else(|| Error::Divergent(format!("tail Σ‖ψ_k‖ does not fall below {tol}")))?;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail_after(mid)? < tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((hi, tail_after(hi)?))
    }

    /// `φ(y)` for the periodic point with window `y`, truncated where the tail drops below `tol`.
    pub fn phi_periodic(&self, y: &Word, tol: f64) -> Result<PeriodicPotential> {
        if y.is_empty() {
            return Err(Error::InvalidArgument("period window must be nonempty".into()));
        }
        let (cutoff, truncation) = self.truncation_cutoff(tol)?;
        let a = y.symbols()[0] as usize;
        let mut acc = Neumaier::default();
        for k in (1..=cutoff).rev() {
            acc.add(self.psi(k, a, y.periodic_at(k) as usize));
        }
        acc.add(self.onsite[a]);
        Ok(PeriodicPotential {
            value: acc.total(),
            truncation,
        })
    }

    /// Folds `ψ_1, …, ψ_K` onto the residues mod `p`, with `K` from [`Self::truncation_cutoff`].
    pub fn periodic_couplings(&self, p: usize, tol: f64) -> Result<PeriodicCouplings> {
        if p == 0 {
            return Err(Error::InvalidArgument("period must be at least 1".into()));
        }
        let n = self.alphabet.size();
        let (cutoff, truncation) = self.truncation_cutoff(tol)?;
        let mut acc = vec![Neumaier::default(); p * n * n];
        for k in (1..=cutoff).rev() {
            let m = k % p;
            for a in 0..n {
                for b in 0..n {
                    acc[(m * n + a) * n + b].add(self.psi(k, a, b));
                }
            }
        }
        Ok(PeriodicCouplings {
            period: p,
            size: n,
            folded: acc.iter().map(Neumaier::total).collect(),
            onsite: self.onsite.clone(),
            cutoff,
            truncation,
        })
    }

    /// `‖φ‖_∞ ≤ max|onsite| + Σ_{k≥1} ‖ψ_k‖`.
    pub fn sup_norm_bound(&self) -> Result<f64> {
        let onsite = self.onsite.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(onsite + self.tail_norm_sum(1, SERIES_TOL)?)
    }
}

fn check_spin_params(beta: f64, coupling: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Interaction(format!(
            "β must be finite and nonnegative, got {beta}"
        )));
    }
    if !coupling.is_finite() {
        return Err(Error::Interaction("coupling must be finite".into()));
    }
    Ok(())
}
