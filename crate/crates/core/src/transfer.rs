//! Transfer matrices on `A^r`, their Perron data, scaled powers and the
//! Hilbert-metric machinery (projective distance and Birkhoff coefficient).

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interactions::PairInteraction;
use crate::lattice::{decode, StateSpace};

/// Largest dense state space accepted (`2^12`).
pub const DENSE_DIM_CAP: usize = 4096;

/// Dense transfer matrix `M_r(a, b) = exp φ̃_r(a)` on overlapping pairs, zero elsewhere.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    space: StateSpace,
    /// `exp φ̃_r(a)` per state.
    weights: Vec<f64>,
    entries: Array2<f64>,
}

impl TransferMatrix {
    pub fn build(interaction: &PairInteraction, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument("range r must be at least 1".into()));
        }
        let base = interaction.alphabet().size();
        let space = StateSpace::new(base, r)
            .filter(|s| s.dim <= DENSE_DIM_CAP)
            .ok_or(Error::DimensionCap {
                r,
                dim: base.checked_pow(r as u32).unwrap_or(usize::MAX),
                cap: DENSE_DIM_CAP,
            })?;
        let weights: Vec<f64> = (0..space.dim)
            .map(|i| interaction.phi_r_symbols(&decode(i, r, base)).exp())
            .collect();
        let mut entries = Array2::zeros((space.dim, space.dim));
        for (a, &w) in weights.iter().enumerate() {
            for c in 0..base {
                entries[[a, space.successor(a, c)]] = w;
            }
        }
        Ok(Self {
            space,
            weights,
            entries,
        })
    }

    pub fn r(&self) -> usize {
        self.space.r
    }

    pub fn alphabet_size(&self) -> usize {
        self.space.base
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.entries[[a, b]]
    }

    /// `exp φ̃_r` of a state; equals every nonzero entry of its row.
    pub fn weight(&self, state: usize) -> f64 {
        self.weights[state]
    }

    pub(crate) fn space(&self) -> &StateSpace {
        &self.space
    }

    /// `out = M v`, using the overlap structure.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let sp = &self.space;
        for (a, o) in out.iter_mut().enumerate() {
            let s: f64 = (0..sp.base).map(|c| v[sp.successor(a, c)]).sum();
            *o = self.weights[a] * s;
        }
    }

    /// `out = Mᵀ u`.
    pub fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        let sp = &self.space;
        for (b, o) in out.iter_mut().enumerate() {
            *o = (0..sp.base)
                .map(|c| {
                    let a = sp.predecessor(b, c);
                    self.weights[a] * u[a]
                })
                .sum();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerronOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PerronOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 200_000,
        }
    }
}

/// Perron root and eigenvectors, gauged so that `max R = 1` and `Σ L·R = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub rho: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Estimated `|λ_2|`.
    pub lambda2_mod: f64,
    /// `max(‖M R − ρR‖_∞, ‖Mᵀ L̂ − ρL̂‖_∞)` with `L̂ = L / max L`.
    pub residual: f64,
    pub iterations: usize,
}

impl SpectralData {
    /// `|λ_2| / ρ`.
    pub fn spectral_ratio(&self) -> f64 {
        self.lambda2_mod / self.rho
    }
}

const STAGNATION_WINDOW: usize = 2000;
/// Consecutive steps the `|λ_2|` estimate must hold still before it is accepted.
const SETTLE_STEPS: usize = 5;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Deterministic, asymmetric start columns so no eigendirection is missed by symmetry.
fn start_vectors(dim: usize) -> (Vec<f64>, Vec<f64>) {
    let v1 = (0..dim)
        .map(|i| 1.0 + 0.5 * (i as f64 * 0.618_033_988_749_895).fract())
        .collect();
    let v2 = (0..dim)
        .map(|i| (i as f64 * 0.754_877_666_246_693 + 0.3).fract() - 0.5)
        .collect();
    (v1, v2)
}

/// Gram–Schmidt on `(a, b)`. A second column that collapses onto the first
/// (rank deficiency) is replaced by `fallback`. Returns `false` if `a` vanishes.
fn orthonormalize(a: &mut [f64], b: &mut [f64], fallback: &[f64]) -> bool {
    let na = dot(a, a).sqrt();
    if !(na > 0.0 && na.is_finite()) {
        return false;
    }
    a.iter_mut().for_each(|x| *x /= na);
    for attempt in 0..2 {
        let before = dot(b, b).sqrt();
        let c = dot(a, b);
        b.iter_mut().zip(a.iter()).for_each(|(y, x)| *y -= c * x);
        let nb = dot(b, b).sqrt();
        if nb > 1e-12 * before && nb.is_finite() {
            b.iter_mut().for_each(|x| *x /= nb);
            return true;
        }
        if attempt == 0 {
            b.copy_from_slice(fallback);
        }
    }
    // `fallback` is parallel to `a`: any unit vector orthogonal to it will do.
    b.iter_mut().for_each(|x| *x = 0.0);
    let k = if a.len() > 1 && a[0].abs() > 0.5 { 1 } else { 0 };
    b[k] = 1.0;
    let c = dot(a, b);
    b.iter_mut().zip(a.iter()).for_each(|(y, x)| *y -= c * x);
    let nb = dot(b, b).sqrt();
    b.iter_mut().for_each(|x| *x /= nb);
    true
}

/// Rayleigh–Ritz on a two-dimensional subspace: the dominant real Ritz value
/// and its coefficient vector (if the pair is real), and the largest modulus.
fn ritz(h: [[f64; 2]; 2]) -> (Option<(f64, [f64; 2])>, f64) {
    let [[a, b], [c, d]] = h;
    let half = 0.5 * (a + d);
    let disc = (0.5 * (a - d)).powi(2) + b * c;
    if disc < 0.0 {
        return (None, (a * d - b * c).abs().sqrt());
    }
    let s = disc.sqrt();
    let (t1, t2) = (half + s, half - s);
    let u = [b, t1 - a];
    let v = [t1 - d, c];
    let y = if u[0].hypot(u[1]) >= v[0].hypot(v[1]) { u } else { v };
    let y = if y == [0.0, 0.0] { [1.0, 0.0] } else { y };
    (Some((t1, y)), t1.abs().max(t2.abs()))
}

struct Iterate {
    rho: f64,
    vector: Vec<f64>,
    iterations: usize,
}

/// Two-column subspace iteration; the Perron pair converges at rate `|λ_3|/ρ`,
/// so a near-degenerate `λ_2` does not stall it.
fn perron_side(dim: usize, apply: impl Fn(&[f64], &mut [f64]), tol: f64, max_iter: usize) -> Result<Iterate> {
    let (mut q1, mut q2) = start_vectors(dim);
    let fallback = q2.clone();
    orthonormalize(&mut q1, &mut q2, &fallback);
    let (mut w1, mut w2) = (vec![0.0; dim], vec![0.0; dim]);
    let mut x = vec![0.0; dim];
    let mut mx = vec![0.0; dim];
    let (mut best, mut best_at) = (f64::INFINITY, 0usize);
    for k in 1..=max_iter {
        apply(&q1, &mut w1);
        apply(&q2, &mut w2);
        let h = [[dot(&q1, &w1), dot(&q1, &w2)], [dot(&q2, &w1), dot(&q2, &w2)]];
        let mut rel = f64::INFINITY;
        if let (Some((theta, y)), _) = ritz(h) {
            for i in 0..dim {
                x[i] = y[0] * q1[i] + y[1] * q2[i];
                mx[i] = y[0] * w1[i] + y[1] * w2[i];
            }
            let scale = max_abs(&x);
            if theta > 0.0 && scale > 0.0 {
                let res = x.iter().zip(&mx).fold(0.0f64, |m, (a, b)| m.max((b - theta * a).abs()));
                rel = res / (scale * theta);
                if rel <= tol {
                    // One power step: removes rounding-level sign noise and only
                    // damps the remaining error.
                    let sign = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                    let top = max_abs(&mx);
                    let vector = mx.iter().map(|v| sign * v / top).collect();
                    return Ok(Iterate {
                        rho: theta,
                        vector,
                        iterations: k,
                    });
                }
            }
        }
        if rel < best {
            best = rel;
            best_at = k;
        } else if k - best_at > STAGNATION_WINDOW {
            return Err(Error::Stagnated {
                iterations: k,
                residual: best,
            });
        }
        std::mem::swap(&mut q1, &mut w1);
        std::mem::swap(&mut q2, &mut w2);
        if !orthonormalize(&mut q1, &mut q2, &fallback) {
            return Err(Error::NoConvergence {
                iterations: k,
                residual: best,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: best,
    })
}

/// `|λ_2|` from subspace iteration on `(I − R Lᵀ) M`, which removes the Perron
/// direction; a 2×2 Ritz block also resolves complex-conjugate pairs.
fn subdominant_modulus(
    dim: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    rho: f64,
    left: &[f64],
    right: &[f64],
    max_iter: usize,
) -> f64 {
    let deflate = |v: &mut [f64]| {
        let c = dot(left, v);
        v.iter_mut().zip(right).for_each(|(x, r)| *x -= c * r);
    };
    let (mut q1, mut q2) = start_vectors(dim);
    let mut fallback = q2.clone();
    for v in [&mut q1, &mut q2, &mut fallback] {
        deflate(v);
    }
    if !orthonormalize(&mut q1, &mut q2, &fallback) {
        return 0.0;
    }
    let (mut w1, mut w2) = (vec![0.0; dim], vec![0.0; dim]);
    let (mut prev, mut settled) = (f64::NAN, 0usize);
    for _ in 0..max_iter {
        apply(&q1, &mut w1);
        apply(&q2, &mut w2);
        deflate(&mut w1);
        deflate(&mut w2);
        if dot(&w1, &w1).max(dot(&w2, &w2)).sqrt() <= 1e-13 * rho {
            return 0.0;
        }
        let h = [[dot(&q1, &w1), dot(&q1, &w2)], [dot(&q2, &w1), dot(&q2, &w2)]];
        let modulus = ritz(h).1;
        if (modulus - prev).abs() <= 1e-13 * rho {
            settled += 1;
            if settled >= SETTLE_STEPS {
                return modulus;
            }
        } else {
            settled = 0;
        }
        prev = modulus;
        std::mem::swap(&mut q1, &mut w1);
        std::mem::swap(&mut q2, &mut w2);
        if !orthonormalize(&mut q1, &mut q2, &fallback) {
            return 0.0;
        }
    }
    prev
}

fn max_residual(dim: usize, apply: impl Fn(&[f64], &mut [f64]), v: &[f64], rho: f64) -> f64 {
    let mut w = vec![0.0; dim];
    apply(v, &mut w);
    w.iter().zip(v).fold(0.0f64, |m, (a, b)| m.max((a - rho * b).abs()))
}

/// Subspace iteration on `M` and `Mᵀ` until both residuals are below `tol·ρ`.
pub fn perron(m: &TransferMatrix, opts: PerronOptions) -> Result<SpectralData> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let dim = m.dim();
    let inner = opts.tol / 4.0;
    let right = perron_side(dim, |v, o| m.apply(v, o), inner, opts.max_iter)?;
    let left = perron_side(dim, |v, o| m.apply_transpose(v, o), inner, opts.max_iter)?;
    let rho = right.rho;

    let rmax = right.vector.iter().fold(0.0f64, |a, b| a.max(*b));
    let r_vec: Vec<f64> = right.vector.iter().map(|x| x / rmax).collect();
    let lmax = left.vector.iter().fold(0.0f64, |a, b| a.max(*b));
    let l_hat: Vec<f64> = left.vector.iter().map(|x| x / lmax).collect();

    let residual = max_residual(dim, |v, o| m.apply(v, o), &r_vec, rho).max(max_residual(
        dim,
        |v, o| m.apply_transpose(v, o),
        &l_hat,
        rho,
    ));
    if residual > opts.tol * rho {
        return Err(Error::NoConvergence {
            iterations: right.iterations + left.iterations,
            residual,
        });
    }
    let norm = dot(&l_hat, &r_vec);
    let l_vec: Vec<f64> = l_hat.iter().map(|x| x / norm).collect();
    if l_vec.iter().chain(&r_vec).any(|x| !(*x > 0.0)) {
        return Err(Error::NoConvergence {
            iterations: right.iterations + left.iterations,
            residual,
        });
    }
    let lambda2_mod = subdominant_modulus(dim, |v, o| m.apply(v, o), rho, &l_vec, &r_vec, opts.max_iter);
    Ok(SpectralData {
        rho,
        left: l_vec,
        right: r_vec,
        lambda2_mod,
        residual,
        iterations: right.iterations + left.iterations,
    })
}

/// `(M/ρ)^s`, computed by repeated squaring.
#[derive(Clone, Debug)]
pub struct ScaledPower {
    pub s: u64,
    pub base_rho: f64,
    pub entries: Array2<f64>,
}

impl ScaledPower {
    /// `max |(M/ρ)^s − R Lᵀ|`.
    pub fn distance_to_projector(&self, spectral: &SpectralData) -> f64 {
        let mut d = 0.0f64;
        for ((i, j), v) in self.entries.indexed_iter() {
            d = d.max((v - spectral.right[i] * spectral.left[j]).abs());
        }
        d
    }
}

pub fn scaled_power(m: &TransferMatrix, spectral: &SpectralData, s: u64) -> ScaledPower {
    let rho = spectral.rho;
    ScaledPower {
        s,
        base_rho: rho,
        entries: matrix_power(&m.entries().mapv(|x| x / rho), s),
    }
}

pub(crate) fn matrix_power(base: &Array2<f64>, mut s: u64) -> Array2<f64> {
    let mut result: Option<Array2<f64>> = None;
    let mut sq = base.clone();
    loop {
        if s & 1 == 1 {
            result = Some(match result {
                None => sq.clone(),
                Some(r) => r.dot(&sq),
            });
        }
        s >>= 1;
        if s == 0 {
            break;
        }
        sq = sq.dot(&sq);
    }
    result.unwrap_or_else(|| Array2::eye(base.nrows()))
}

/// Hilbert projective distance `log max_{i,j} (u_i v_j)/(u_j v_i)`.
pub fn hilbert_metric(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::InvalidArgument("empty vectors".into()));
    }
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, b) in u.iter().zip(v) {
        if !(*a > 0.0 && *b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InfiniteHilbertDistance);
        }
        let q = a.ln() - b.ln();
        hi = hi.max(q);
        lo = lo.min(q);
    }
    Ok(hi - lo)
}

/// Birkhoff contraction coefficient `(1 − √φ)/(1 + √φ)`, with
/// `φ = min (P_ik P_jl)/(P_jk P_il)` over all index quadruples.
pub fn birkhoff_coefficient(p: ArrayView2<f64>) -> Result<f64> {
    let n = p.nrows();
    if let Some(((i, j), _)) = p.indexed_iter().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotPositive { row: i, col: j });
    }
    // For each row pair the cross ratio is min_k(P_ik/P_jk) / max_l(P_il/P_jl).
    let log_phi = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in (i + 1)..n {
                let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..p.ncols() {
                    let q = p[[i, k]].ln() - p[[j, k]].ln();
                    hi = hi.max(q);
                    lo = lo.min(q);
                }
                best = best.min(lo - hi);
            }
            best
        })
        .reduce(|| 0.0, f64::min);
    let sqrt_phi = (0.5 * log_phi).exp();
    Ok((1.0 - sqrt_phi) / (1.0 + sqrt_phi))
}

const DUMP_MAGIC: &[u8; 8] = b"GBLTMAT\0";
const DUMP_VERSION: u32 = 1;

/// Writes `M_r` and its spectral data: magic, version, r, |A|, dim, then
/// row-major `M`, then ρ, |λ_2|, residual, iterations, L, R (all little-endian).
pub fn write_dump<W: Write>(mut out: W, m: &TransferMatrix, spectral: &SpectralData) -> Result<()> {
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&(m.r() as u32).to_le_bytes())?;
    out.write_all(&(m.alphabet_size() as u32).to_le_bytes())?;
    out.write_all(&(m.dim() as u64).to_le_bytes())?;
    for v in m.entries().iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in [spectral.rho, spectral.lambda2_mod, spectral.residual] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&(spectral.iterations as u64).to_le_bytes())?;
    for v in spectral.left.iter().chain(&spectral.right) {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Contents of a transfer dump.
#[derive(Clone, Debug)]
pub struct TransferDump {
    pub r: usize,
    pub alphabet_size: usize,
    pub entries: Array2<f64>,
    pub spectral: SpectralData,
}

impl TransferDump {
    /// Rebuilds the matrix, checking the stored entries against `interaction`.
    pub fn restore(self, interaction: &PairInteraction) -> Result<(TransferMatrix, SpectralData)> {
        let m = TransferMatrix::build(interaction, self.r)?;
        if m.alphabet_size() != self.alphabet_size || *m.entries() != self.entries {
            return Err(Error::Dump("stored matrix does not match the interaction".into()));
        }
        Ok((m, self.spectral))
    }
}

pub fn read_dump<R: Read>(mut input: R) -> Result<TransferDump> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != DUMP_VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let r = read_u32(&mut input)? as usize;
    let alphabet_size = read_u32(&mut input)? as usize;
    let dim = read_u64(&mut input)? as usize;
    let expected = StateSpace::new(alphabet_size, r).map(|s| s.dim);
    if expected != Some(dim) || dim > DENSE_DIM_CAP {
        return Err(Error::Dump(format!(
            "inconsistent header: r={r}, |A|={alphabet_size}, dim={dim}"
        )));
    }
    let mut flat = vec![0.0; dim * dim];
    for v in flat.iter_mut() {
        *v = read_f64(&mut input)?;
    }
    let entries = Array2::from_shape_vec((dim, dim), flat).map_err(|e| Error::Dump(e.to_string()))?;
    let rho = read_f64(&mut input)?;
    let lambda2_mod = read_f64(&mut input)?;
    let residual = read_f64(&mut input)?;
    let iterations = read_u64(&mut input)? as usize;
    let mut left = vec![0.0; dim];
    let mut right = vec![0.0; dim];
    for v in left.iter_mut().chain(right.iter_mut()) {
        *v = read_f64(&mut input)?;
    }
    Ok(TransferDump {
        r,
        alphabet_size,
        entries,
        spectral: SpectralData {
            rho,
            left,
            right,
            lambda2_mod,
            residual,
            iterations,
        },
    })
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
