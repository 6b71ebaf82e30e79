//! Cylinder probabilities of the r-step Markov measure, of periodic measures
//! and of product measures, plus the distances between them.
//!
//! All joint-cylinder and correlation formulas assume the spectral gauge of
//! [`SpectralData`]: `μ[a] = L(a)·R(a)` for `|a| = r`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interactions::{PairInteraction, PeriodicCouplings};
use crate::lattice::{decode, enumerate_periodic_points, Alphabet, StateSpace, Word};
use crate::series::Neumaier;
use crate::transfer::{hilbert_metric, matrix_power, perron, PerronOptions, SpectralData, TransferMatrix};

/// Words longer than this are evaluated in log space.
const LOG_SPACE_LEN: usize = 32;

/// A probability measure that can be evaluated on cylinders `[a_0 … a_{n−1}]`.
pub trait CylinderMeasure: Sync {
    fn alphabet_size(&self) -> usize;

    /// `μ[a]` for a word given as symbol indices.
    fn prob(&self, symbols: &[u8]) -> Result<f64>;

    fn cylinder(&self, w: &Word) -> Result<f64> {
        check_symbols(w.symbols(), self.alphabet_size())?;
        self.prob(w.symbols())
    }

    /// `μ[a]` for every `a ∈ A^n`, in word-index order.
    fn level(&self, n: usize) -> Result<Vec<f64>> {
        let base = self.alphabet_size();
        let count = base
            .checked_pow(n as u32)
            .ok_or_else(|| Error::InvalidArgument(format!("|A|^{n} overflows")))?;
        (0..count)
            .into_par_iter()
            .map(|i| self.prob(&decode(i, n, base)))
            .collect()
    }
}

fn check_symbols(s: &[u8], size: usize) -> Result<()> {
    match s.iter().find(|&&c| c as usize >= size) {
        Some(&c) => Err(Error::SymbolOutOfRange {
            symbol: c as usize,
            size,
        }),
        None => Ok(()),
    }
}

/// Product measure with i.i.d. symbols.
#[derive(Clone, Debug)]
pub struct BernoulliMeasure {
    probs: Vec<f64>,
}

impl BernoulliMeasure {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.len() < 2 || probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("not a probability vector: {probs:?}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::new(vec![1.0 / size as f64; size])
    }
}

impl CylinderMeasure for BernoulliMeasure {
    fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    fn prob(&self, symbols: &[u8]) -> Result<f64> {
        Ok(symbols.iter().map(|&c| self.probs[c as usize]).product())
    }
}

/// The r-step Markov measure `μ_{φ_r}`.
#[derive(Clone, Debug)]
pub struct MarkovMeasure {
    interaction: PairInteraction,
    transfer: TransferMatrix,
    spectral: SpectralData,
}

impl MarkovMeasure {
    pub fn new(interaction: &PairInteraction, r: usize, opts: PerronOptions) -> Result<Self> {
        let transfer = TransferMatrix::build(interaction, r)?;
        let spectral = perron(&transfer, opts)?;
        Ok(Self::from_parts(interaction, transfer, spectral))
    }

    pub fn from_parts(interaction: &PairInteraction, transfer: TransferMatrix, spectral: SpectralData) -> Self {
        Self {
            interaction: interaction.clone(),
            transfer,
            spectral,
        }
    }

    pub fn r(&self) -> usize {
        self.transfer.r()
    }

    pub fn interaction(&self) -> &PairInteraction {
        &self.interaction
    }

    pub fn transfer(&self) -> &TransferMatrix {
        &self.transfer
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    /// `μ[a] = L(a)R(a)` for a state `a ∈ A^r`.
    pub fn state_mass(&self, state: usize) -> f64 {
        self.spectral.left[state] * self.spectral.right[state]
    }

    fn product_form(&self, s: &[u8]) -> f64 {
        let sp = self.transfer.space();
        let r = sp.r;
        let rho = self.spectral.rho;
        let mut state = sp.encode(&s[..r]);
        let steps = s.len() - r;
        if s.len() > LOG_SPACE_LEN {
            let mut acc = Neumaier::default();
            acc.add(self.spectral.left[state].ln());
            for j in 0..steps {
                acc.add(self.transfer.weight(state).ln() - rho.ln());
                state = sp.successor(state, s[j + r] as usize);
            }
            acc.add(self.spectral.right[state].ln());
            acc.total().exp()
        } else {
            let mut v = self.spectral.left[state];
            for j in 0..steps {
                v *= self.transfer.weight(state) / rho;
                state = sp.successor(state, s[j + r] as usize);
            }
            v * self.spectral.right[state]
        }
    }

    /// `μ([a] ∩ T^{−s}[b])` for `|a|, |b| ≤ r`, marginalizing through length-r refinements.
    pub fn joint_cylinder(&self, a: &Word, b: &Word, s: u64) -> Result<f64> {
        let sp = self.transfer.space();
        let (ra, rb) = (refinement_block(sp, a)?, refinement_block(sp, b)?);
        let p = self.scaled_power(s);
        let mut acc = Neumaier::default();
        for x in ra.clone() {
            for y in rb.clone() {
                acc.add(self.spectral.left[x] * p[[x, y]] * self.spectral.right[y]);
            }
        }
        Ok(acc.total())
    }

    /// `μ([a] ∩ T^{−s}[b]) / (μ[a]μ[b])`.
    pub fn correlation_ratio(&self, a: &Word, b: &Word, s: u64) -> Result<f64> {
        let (ma, mb) = (self.cylinder(a)?, self.cylinder(b)?);
        for (w, m) in [(a, ma), (b, mb)] {
            if !(m > 0.0) {
                return Err(Error::ZeroCylinder(w.to_string()));
            }
        }
        Ok(self.joint_cylinder(a, b, s)? / (ma * mb))
    }

    /// Correlation ratios for all `a, b ∈ A^r` at gap `s`: `(M/ρ)^s(a,b) / (R(a)L(b))`.
    pub fn correlation_matrix(&self, s: u64) -> Array2<f64> {
        let mut p = self.scaled_power(s);
        for ((a, b), v) in p.indexed_iter_mut() {
            *v /= self.spectral.right[a] * self.spectral.left[b];
        }
        p
    }

    fn scaled_power(&self, s: u64) -> Array2<f64> {
        let rho = self.spectral.rho;
        matrix_power(&self.transfer.entries().mapv(|x| x / rho), s)
    }
}

/// States of `A^r` whose length-`|w|` prefix is `w`.
fn refinement_block(sp: &StateSpace, w: &Word) -> Result<std::ops::Range<usize>> {
    let n = w.len();
    if n == 0 || n > sp.r {
        return Err(Error::InvalidArgument(format!(
            "joint cylinders take words of length 1..={}, got {n}",
            sp.r
        )));
    }
    check_symbols(w.symbols(), sp.base)?;
    let width = sp.base.pow((sp.r - n) as u32);
    let start = StateSpace::new(sp.base, n).expect("n ≤ r").encode(w.symbols()) * width;
    Ok(start..start + width)
}

impl CylinderMeasure for MarkovMeasure {
    fn alphabet_size(&self) -> usize {
        self.transfer.alphabet_size()
    }

    fn prob(&self, s: &[u8]) -> Result<f64> {
        let sp = self.transfer.space();
        if s.is_empty() {
            return Ok(1.0);
        }
        if s.len() >= sp.r {
            return Ok(self.product_form(s));
        }
        let block = refinement_block(sp, &Word::from_symbols(s.to_vec()))?;
        let mut acc = Neumaier::default();
        for x in block {
            acc.add(self.state_mass(x));
        }
        Ok(acc.total())
    }
}

/// Which Birkhoff sum weights a periodic point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PeriodicWeighting {
    /// `e^{S_p φ(y)}` over the full period.
    #[default]
    FullPeriod,
    /// `e^{S_n φ(y)}` with `n` the length of the queried word (bruteforce only).
    WordLength,
}

#[derive(Clone, Debug)]
enum PeriodicEngine {
    Transfer {
        transfer: TransferMatrix,
        rho: f64,
        trace: f64,
        powers: Arc<Mutex<BTreeMap<usize, Arc<Array2<f64>>>>>,
    },
    Bruteforce {
        /// Normalized `S_p` weights in window-index order.
        probs: Vec<f64>,
        weighting: PeriodicWeighting,
        site: SiteEnergy,
    },
}

#[derive(Clone, Debug)]
enum SiteEnergy {
    Truncated(PairInteraction, usize),
    Full(PeriodicCouplings),
}

impl SiteEnergy {
    /// `φ(T^j y)` (or `φ̃_r`) for the periodic point with window `y`.
    fn at(&self, y: &[u8], j: usize) -> f64 {
        match self {
            Self::Full(c) => c.phi_at(y, j),
            Self::Truncated(i, r) => {
                let p = y.len();
                let a = y[j] as usize;
                let mut acc = i.onsite()[a];
                for k in 1..*r {
                    acc += i.psi(k, a, y[(j + k) % p] as usize);
                }
                acc
            }
        }
    }

    fn birkhoff(&self, y: &[u8], n: usize) -> f64 {
        (0..n).map(|j| self.at(y, j)).sum()
    }
}

/// Periodic measure `P^{(p)}` of the truncated potential `φ_r` (or of the full `φ`).
#[derive(Clone, Debug)]
pub struct PeriodicMeasure {
    alphabet_size: usize,
    period: usize,
    range: Option<usize>,
    engine: PeriodicEngine,
}

impl PeriodicMeasure {
    /// Closed-form evaluation through powers of `M_r`.
    pub fn transfer(interaction: &PairInteraction, r: usize, p: usize, opts: PerronOptions) -> Result<Self> {
        if p < r {
            return Err(Error::InvalidArgument(format!(
                "period {p} is shorter than the range {r}"
            )));
        }
        let transfer = TransferMatrix::build(interaction, r)?;
        let rho = perron(&transfer, opts)?.rho;
        let full = matrix_power(&transfer.entries().mapv(|x| x / rho), p as u64);
        let trace = full.diag().sum();
        let mut cache = BTreeMap::new();
        cache.insert(p, Arc::new(full));
        Ok(Self {
            alphabet_size: transfer.alphabet_size(),
            period: p,
            range: Some(r),
            engine: PeriodicEngine::Transfer {
                transfer,
                rho,
                trace,
                powers: Arc::new(Mutex::new(cache)),
            },
        })
    }

    /// Direct enumeration of all `|A|^p` periodic windows. `range = None`
    /// uses the full potential, truncated where its tail drops below `tol`.
    pub fn bruteforce(
        interaction: &PairInteraction,
        range: Option<usize>,
        p: usize,
        p_max: usize,
        weighting: PeriodicWeighting,
        tol: f64,
    ) -> Result<Self> {
        let alphabet: &Alphabet = interaction.alphabet();
        let points = enumerate_periodic_points(p, alphabet, p_max)?;
        let site = match range {
            Some(r) if r >= 1 && r <= p => SiteEnergy::Truncated(interaction.clone(), r),
            Some(r) => return Err(Error::InvalidArgument(format!("range {r} must lie in 1..={p}"))),
            None => SiteEnergy::Full(interaction.periodic_couplings(p, tol)?),
        };
        let base = alphabet.size();
        let count = points.len();
        let log_w: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|i| site.birkhoff(&decode(i, p, base), p))
            .collect();
        Ok(Self {
            alphabet_size: base,
            period: p,
            range,
            engine: PeriodicEngine::Bruteforce {
                probs: normalize_log_weights(&log_w),
                weighting,
                site,
            },
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn range(&self) -> Option<usize> {
        self.range
    }

    fn transfer_power(&self, k: usize) -> Arc<Array2<f64>> {
        let PeriodicEngine::Transfer {
            transfer, rho, powers, ..
        } = &self.engine
        else {
            unreachable!("transfer_power is only called in transfer mode")
        };
        let mut cache = powers.lock().expect("power cache poisoned");
        cache
            .entry(k)
            .or_insert_with(|| Arc::new(matrix_power(&transfer.entries().mapv(|x| x / rho), k as u64)))
            .clone()
    }

    /// `P^{(p)}([a] ∩ T^{−s}[b])` for `a, b ∈ A^r`, `s ≤ p` (transfer mode).
    pub fn joint_states(&self, a: usize, b: usize, s: usize) -> Result<f64> {
        let PeriodicEngine::Transfer { trace, .. } = &self.engine else {
            return Err(Error::InvalidArgument(
                "joint periodic cylinders need transfer mode".into(),
            ));
        };
        if s > self.period {
            return Err(Error::InvalidArgument(format!(
                "gap {s} exceeds the period {}",
                self.period
            )));
        }
        let fwd = self.transfer_power(s);
        let back = self.transfer_power(self.period - s);
        Ok(fwd[[a, b]] * back[[b, a]] / trace)
    }

    /// `P^{(p)}[a]` for every `a ∈ A^r` (transfer mode).
    pub fn state_masses(&self) -> Result<Vec<f64>> {
        let PeriodicEngine::Transfer { trace, .. } = &self.engine else {
            return Err(Error::InvalidArgument("state masses need transfer mode".into()));
        };
        let full = self.transfer_power(self.period);
        Ok(full.diag().iter().map(|d| d / trace).collect())
    }
}

fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let mut z = Neumaier::default();
    for v in &w {
        z.add(*v);
    }
    let z = z.total();
    w.into_iter().map(|v| v / z).collect()
}

impl CylinderMeasure for PeriodicMeasure {
    fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    fn prob(&self, s: &[u8]) -> Result<f64> {
        let n = s.len();
        let p = self.period;
        if n > p {
            return Err(Error::InvalidArgument(format!(
                "word length {n} exceeds the period {p}"
            )));
        }
        if n == 0 {
            return Ok(1.0);
        }
        let base = self.alphabet_size;
        match &self.engine {
            PeriodicEngine::Transfer {
                transfer, rho, trace, ..
            } => {
                let sp = transfer.space();
                let r = sp.r;
                if n < r {
                    let block = refinement_block(sp, &Word::from_symbols(s.to_vec()))?;
                    let full = self.transfer_power(p);
                    let mut acc = Neumaier::default();
                    for x in block {
                        acc.add(full[[x, x]]);
                    }
                    return Ok(acc.total() / trace);
                }
                let first = sp.encode(&s[..r]);
                let mut state = first;
                let mut v = 1.0;
                for j in 0..n - r {
                    v *= transfer.weight(state) / rho;
                    state = sp.successor(state, s[j + r] as usize);
                }
                Ok(v * self.transfer_power(p - n + r)[[state, first]] / trace)
            }
            PeriodicEngine::Bruteforce { probs, weighting, site } => {
                let width = base.pow((p - n) as u32);
                let start = StateSpace::new(base, n).expect("n ≤ p").encode(s) * width;
                match weighting {
                    PeriodicWeighting::FullPeriod => {
                        let mut acc = Neumaier::default();
                        for v in &probs[start..start + width] {
                            acc.add(*v);
                        }
                        Ok(acc.total())
                    }
                    PeriodicWeighting::WordLength => {
                        let log_w: Vec<f64> = (0..probs.len())
                            .into_par_iter()
                            .map(|i| site.birkhoff(&decode(i, p, base), n))
                            .collect();
                        let q = normalize_log_weights(&log_w);
                        let mut acc = Neumaier::default();
                        for v in &q[start..start + width] {
                            acc.add(*v);
                        }
                        Ok(acc.total())
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceKind {
    Projective,
    Weakstar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureDistanceReport {
    pub kind: DistanceKind,
    pub horizon: usize,
    pub value: f64,
    pub worst_word: Word,
    /// Bound on the part of the series beyond `horizon` (weak-* only).
    pub truncation_error: f64,
}

/// `max_{1≤n≤n_max, a∈A^n} (1/n)|log(m1[a]/m2[a])|`.
pub fn projective_gap(
    m1: &dyn CylinderMeasure,
    m2: &dyn CylinderMeasure,
    n_max: usize,
) -> Result<MeasureDistanceReport> {
    let base = check_pair(m1, m2)?;
    let mut best = (0.0f64, Word::empty());
    for n in 1..=n_max {
        let (l1, l2) = (m1.level(n)?, m2.level(n)?);
        for (i, (a, b)) in l1.iter().zip(&l2).enumerate() {
            if !(*a > 0.0 && *b > 0.0) {
                return Err(Error::ZeroCylinder(Word::from_symbols(decode(i, n, base)).to_string()));
            }
            let v = (a.ln() - b.ln()).abs() / n as f64;
            if v > best.0 {
                best = (v, Word::from_symbols(decode(i, n, base)));
            }
        }
    }
    Ok(MeasureDistanceReport {
        kind: DistanceKind::Projective,
        horizon: n_max,
        value: best.0,
        worst_word: best.1,
        truncation_error: 0.0,
    })
}

/// `Σ_{k=1}^{k_max} 2^{−(k+1)} Σ_{a∈A^k} |m1[a] − m2[a]|`; the omitted tail is at most `2^{−k_max}`.
pub fn weakstar_distance(
    m1: &dyn CylinderMeasure,
    m2: &dyn CylinderMeasure,
    k_max: usize,
) -> Result<MeasureDistanceReport> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let base = check_pair(m1, m2)?;
    let mut total = Neumaier::default();
    let mut worst = (0.0f64, Word::empty());
    for k in 1..=k_max {
        let weight = 0.5f64.powi(k as i32 + 1);
        let (l1, l2) = (m1.level(k)?, m2.level(k)?);
        let mut level = Neumaier::default();
        for (i, (a, b)) in l1.iter().zip(&l2).enumerate() {
            let d = (a - b).abs();
            level.add(d);
            if weight * d > worst.0 {
                worst = (weight * d, Word::from_symbols(decode(i, k, base)));
            }
        }
        total.add(weight * level.total());
    }
    Ok(MeasureDistanceReport {
        kind: DistanceKind::Weakstar,
        horizon: k_max,
        value: total.total(),
        worst_word: worst.1,
        truncation_error: 0.5f64.powi(k_max as i32),
    })
}

fn check_pair(m1: &dyn CylinderMeasure, m2: &dyn CylinderMeasure) -> Result<usize> {
    if m1.alphabet_size() != m2.alphabet_size() {
        return Err(Error::InvalidArgument(format!(
            "measures live on alphabets of size {} and {}",
            m1.alphabet_size(),
            m2.alphabet_size()
        )));
    }
    Ok(m1.alphabet_size())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GibbsConstants {
    pub c_low: f64,
    pub c_high: f64,
}

/// Bracket of `μ[a] / exp(S_nφ_r(y) − n log ρ)` over `r ≤ |a| ≤ n_max`, with `y`
/// the periodic extension of `a`.
pub fn gibbs_constant_scan(m: &MarkovMeasure, n_max: usize) -> Result<GibbsConstants> {
    let r = m.r();
    if n_max < r {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} is below the range {r}"
        )));
    }
    let base = m.alphabet_size();
    let site = SiteEnergy::Truncated(m.interaction.clone(), r);
    let log_rho = m.spectral.rho.ln();
    let mut out = GibbsConstants {
        c_low: f64::INFINITY,
        c_high: 0.0,
    };
    for n in r..=n_max {
        let level = m.level(n)?;
        let (lo, hi) = level
            .par_iter()
            .enumerate()
            .map(|(i, mu)| {
                let y = decode(i, n, base);
                let c = mu / (site.birkhoff(&y, n) - n as f64 * log_rho).exp();
                (c, c)
            })
            .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        out.c_low = out.c_low.min(lo);
        out.c_high = out.c_high.max(hi);
    }
    Ok(out)
}

/// Computable stand-in for the mixing constant: `max_x δ(M^r e_x, M^{2r} e_x)`.
pub fn d_hat(transfer: &TransferMatrix, spectral: &SpectralData) -> Result<f64> {
    let r = transfer.r() as u64;
    let base = transfer.entries().mapv(|x| x / spectral.rho);
    let p1 = matrix_power(&base, r);
    let p2 = p1.dot(&p1);
    let mut d = 0.0f64;
    for x in 0..transfer.dim() {
        let u: Vec<f64> = p1.column(x).to_vec();
        let v: Vec<f64> = p2.column(x).to_vec();
        d = d.max(hilbert_metric(&u, &v)?);
    }
    Ok(d)
}
