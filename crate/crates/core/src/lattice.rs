//! Alphabets, words and the base-|A| state indexing used by transfer matrices.
//!
//! Words of length `r` are identified with transfer-matrix states through a
//! big-endian base-|A| encoding, so lexicographic word order and state order
//! coincide. Words whose first `n` symbols equal a prefix `a` therefore occupy
//! the contiguous index block `[idx(a)·|A|^(r−n), (idx(a)+1)·|A|^(r−n))`, a fact
//! several kernels rely on.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Default cap on the period accepted by brute-force enumeration.
pub const DEFAULT_P_MAX: usize = 22;

/// Finite, ordered alphabet of at least two distinct labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::Alphabet(format!(
                "need at least two symbols, got {}",
                labels.len()
            )));
        }
        if labels.len() > u8::MAX as usize {
            return Err(Error::Alphabet(format!("too many symbols ({})", labels.len())));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Alphabet(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// The spin alphabet `{+1, −1}`; index 0 carries σ = +1, index 1 carries σ = −1.
    pub fn spins() -> Self {
        Self {
            labels: vec!["+1".to_string(), "-1".to_string()],
        }
    }

    /// Alphabet `{0, 1, …, size−1}` labelled by decimal digits.
    pub fn numeric(size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| i.to_string()))
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `|A|^len`, or `None` on overflow.
    pub fn word_count(&self, len: usize) -> Option<usize> {
        let len = u32::try_from(len).ok()?;
        self.size().checked_pow(len)
    }

    /// Canonical state index of a word of length `r`.
    pub fn word_index(&self, w: &Word, r: usize) -> Result<usize> {
        if w.len() != r {
            return Err(Error::LengthMismatch {
                expected: r,
                actual: w.len(),
            });
        }
        let base = self.size();
        let mut idx = 0usize;
        for &s in w.symbols() {
            let s = s as usize;
            if s >= base {
                return Err(Error::SymbolOutOfRange { symbol: s, size: base });
            }
            idx = idx
                .checked_mul(base)
                .and_then(|v| v.checked_add(s))
                .ok_or_else(|| Error::InvalidArgument(format!("word of length {r} overflows the index type")))?;
        }
        Ok(idx)
    }

    /// Inverse of [`Alphabet::word_index`].
    pub fn index_word(&self, index: usize, r: usize) -> Result<Word> {
        let count = self
            .word_count(r)
            .ok_or_else(|| Error::InvalidArgument(format!("|A|^{r} overflows")))?;
        if index >= count {
            return Err(Error::IndexOutOfRange { index, len: r, count });
        }
        Ok(Word(decode(index, r, self.size())))
    }

    /// Render a word with this alphabet's labels.
    pub fn render(&self, w: &Word) -> String {
        w.symbols()
            .iter()
            .map(|&s| self.labels[s as usize].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub(crate) fn decode(mut index: usize, r: usize, base: usize) -> Vec<u8> {
    let mut out = vec![0u8; r];
    for slot in out.iter_mut().rev() {
        *slot = (index % base) as u8;
        index /= base;
    }
    out
}

/// Finite sequence of alphabet indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<u8>);

impl Word {
    /// Builds a word, checking every symbol against the alphabet.
    pub fn new(symbols: Vec<u8>, alphabet: &Alphabet) -> Result<Self> {
        if let Some(&s) = symbols.iter().find(|&&s| s as usize >= alphabet.size()) {
            return Err(Error::SymbolOutOfRange {
                symbol: s as usize,
                size: alphabet.size(),
            });
        }
        Ok(Self(symbols))
    }

    /// Builds a word without an alphabet check. Callers guarantee range.
    pub fn from_symbols(symbols: Vec<u8>) -> Self {
        Self(symbols)
    }

    /// Parses a string of decimal digits, one per symbol (`"0110"`).
    pub fn from_digits(digits: &str, alphabet: &Alphabet) -> Result<Self> {
        let symbols = digits
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::InvalidArgument(format!("not a digit: {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols, alphabet)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n].to_vec())
    }

    pub fn suffix(&self, n: usize) -> Word {
        Word(self.0[self.0.len() - n..].to_vec())
    }

    /// Window `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Word {
        Word(self.0[start..start + len].to_vec())
    }

    pub fn push(&mut self, symbol: u8) {
        self.0.push(symbol);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// First `len` symbols of the periodic sequence obtained by repeating this word.
    pub fn periodic_extension(&self, len: usize) -> Word {
        assert!(!self.is_empty(), "cannot extend the empty word");
        Word((0..len).map(|i| self.0[i % self.0.len()]).collect())
    }

    /// Symbol at lattice position `i` of the periodic point this word represents.
    pub fn periodic_at(&self, i: usize) -> u8 {
        self.0[i % self.0.len()]
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// A cylinder `T^{−offset}[word]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylinderSpec {
    pub word: Word,
    pub offset: usize,
}

impl CylinderSpec {
    pub fn plain(word: Word) -> Self {
        Self { word, offset: 0 }
    }

    pub fn shifted(word: Word, offset: usize) -> Self {
        Self { word, offset }
    }
}

/// True iff the length-(r−1) suffix of `a` equals the length-(r−1) prefix of `b`.
pub fn overlap_compatible(a: &Word, b: &Word) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("overlap needs words of length ≥ 1".into()));
    }
    Ok(a.symbols()[1..] == b.symbols()[..b.len() - 1])
}

/// Iterator over the period windows of all period-`p` points.
#[derive(Clone, Debug)]
pub struct PeriodicPoints {
    period: usize,
    base: usize,
    next: usize,
    count: usize,
}

impl Iterator for PeriodicPoints {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.next >= self.count {
            return None;
        }
        let w = Word(decode(self.next, self.period, self.base));
        self.next += 1;
        Some(w)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.count - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for PeriodicPoints {}

/// All `|A|^p` period windows, in lexicographic order.
pub fn enumerate_periodic_points(p: usize, alphabet: &Alphabet, p_max: usize) -> Result<PeriodicPoints> {
    if p == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    if p > p_max {
        return Err(Error::PeriodCap { period: p, cap: p_max });
    }
    let count = alphabet
        .word_count(p)
        .ok_or(Error::PeriodCap { period: p, cap: p_max })?;
    Ok(PeriodicPoints {
        period: p,
        base: alphabet.size(),
        next: 0,
        count,
    })
}

/// Index arithmetic on the de Bruijn state space `A^r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct StateSpace {
    pub base: usize,
    pub r: usize,
    pub dim: usize,
    /// `|A|^(r−1)`
    pub high: usize,
}

impl StateSpace {
    pub fn new(base: usize, r: usize) -> Option<Self> {
        let dim = base.checked_pow(u32::try_from(r).ok()?)?;
        Some(Self {
            base,
            r,
            dim,
            high: dim / base,
        })
    }

    /// State reached from `state` by appending symbol `c`.
    #[inline]
    pub fn successor(&self, state: usize, c: usize) -> usize {
        (state % self.high) * self.base + c
    }

    /// State that reaches `state` when prefixed by symbol `c`.
    #[inline]
    pub fn predecessor(&self, state: usize, c: usize) -> usize {
        c * self.high + state / self.base
    }

    /// Leading symbol of a state.
    #[cfg(test)]
    pub fn first(&self, state: usize) -> usize {
        state / self.high
    }

    /// Index of the window `symbols[start..start + r]`.
    #[inline]
    pub fn encode(&self, symbols: &[u8]) -> usize {
        symbols.iter().fold(0, |acc, &s| acc * self.base + s as usize)
    }
}
