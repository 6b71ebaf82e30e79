//! Run configuration: a strict TOML schema, validation that reports every
//! problem at once, and a canonical normalized form with a stable digest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interactions::{GrowthSpec, InteractionKind, PairInteraction};
use crate::lattice::Alphabet;
use crate::transfer::{PerronOptions, DENSE_DIM_CAP};

/// Largest number of periodic windows a brute-force enumeration may visit.
pub const WINDOW_CAP: usize = 1 << 26;
pub const N_MAX_CAP: usize = 16;
pub const MAX_ITER_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Zero,
    Dyson,
    Exponential,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onsite: Option<Vec<f64>>,
    #[serde(default)]
    pub override_condition: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub r_max: usize,
    pub p_max: usize,
    pub n_max: usize,
    pub perron_tol: f64,
    pub max_iter: usize,
    /// Tail cutoff for the full potential on periodic points.
    pub series_tol: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            r_max: 10,
            p_max: 22,
            n_max: 8,
            perron_tol: 1e-13,
            max_iter: 200_000,
            series_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumScan {
    pub r: Vec<usize>,
}

impl Default for SpectrumScan {
    fn default() -> Self {
        Self { r: (1..=8).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureScan {
    pub r: usize,
    pub max_len: usize,
    /// Period of the comparison periodic measure; `0` disables it.
    pub period: usize,
}

impl Default for MeasureScan {
    fn default() -> Self {
        Self {
            r: 3,
            max_len: 4,
            period: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeScan {
    pub r: Vec<usize>,
    /// Reference range; `0` means `limits.r_max`.
    pub r_ref: usize,
    /// Word-length horizon; `0` means `limits.n_max`.
    pub n_max: usize,
}

impl Default for ConvergeScan {
    fn default() -> Self {
        Self {
            r: (2..=8).collect(),
            r_ref: 0,
            n_max: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingScan {
    pub s: Vec<usize>,
    pub xi: f64,
    /// Fixed range instead of the `⌈s^{1−ξ}⌉` schedule; `0` uses the schedule.
    pub r_fixed: usize,
}

impl Default for MixingScan {
    fn default() -> Self {
        Self {
            s: (1..=12).map(|k| 4 * k).collect(),
            xi: 0.5,
            r_fixed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyScan {
    pub r: Vec<usize>,
    /// Reference range; `0` means `limits.r_max`.
    pub r_ref: usize,
}

impl Default for EntropyScan {
    fn default() -> Self {
        Self {
            r: (2..=9).collect(),
            r_ref: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsScan {
    pub lemma1_r: Vec<usize>,
    pub lemma1_p: Vec<usize>,
    pub lemma1_n_max: usize,
    pub lemma2_r: Vec<usize>,
    pub lemma2_p: usize,
    pub lemma2_s: Vec<usize>,
}

impl Default for BoundsScan {
    fn default() -> Self {
        Self {
            lemma1_r: vec![2, 3],
            lemma1_p: vec![24, 36, 48],
            lemma1_n_max: 4,
            lemma2_r: vec![2],
            lemma2_p: 48,
            lemma2_s: vec![2, 4, 8, 16],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "gibbsline-out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub growth: GrowthConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub spectrum: SpectrumScan,
    #[serde(default)]
    pub measure: MeasureScan,
    #[serde(default)]
    pub converge: ConvergeScan,
    #[serde(default)]
    pub mixing: MixingScan,
    #[serde(default)]
    pub entropy: EntropyScan,
    #[serde(default)]
    pub check_bounds: BoundsScan,
    #[serde(default)]
    pub output: OutputConfig,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "kind",
            "alphabet",
            "alpha",
            "theta",
            "beta",
            "coupling",
            "tables",
            "onsite",
            "override_condition",
        ],
    ),
    ("growth", &["delta", "table", "tail_delta"]),
    (
        "limits",
        &["r_max", "p_max", "n_max", "perron_tol", "max_iter", "series_tol"],
    ),
    ("spectrum", &["r"]),
    ("measure", &["r", "max_len", "period"]),
    ("converge", &["r", "r_ref", "n_max"]),
    ("mixing", &["s", "xi", "r_fixed"]),
    ("entropy", &["r", "r_ref"]),
    (
        "check_bounds",
        &[
            "lemma1_r",
            "lemma1_p",
            "lemma1_n_max",
            "lemma2_r",
            "lemma2_p",
            "lemma2_s",
        ],
    ),
    ("output", &["dir", "formats"]),
];

/// Every unknown section or key in the raw document.
fn unknown_keys(doc: &toml::Table) -> Vec<String> {
    let mut errs = Vec::new();
    for (name, value) in doc {
        match SECTIONS.iter().find(|(s, _)| s == name) {
            None => errs.push(format!("unknown section `{name}`")),
            Some((_, keys)) => match value.as_table() {
                Some(t) => {
                    for k in t.keys().filter(|k| !keys.contains(&k.as_str())) {
                        errs.push(format!("unknown key `{name}.{k}`"));
                    }
                }
                None => errs.push(format!("`{name}` must be a table")),
            },
        }
    }
    errs
}

/// Reads, validates and normalizes a config file.
pub fn parse_config(path: &Path, override_condition: bool) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
    parse_config_str(&text, override_condition)
}

pub fn parse_config_str(text: &str, override_condition: bool) -> Result<RunConfig> {
    let doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
    let unknown = unknown_keys(&doc);
    if !unknown.is_empty() {
        return Err(Error::Config(unknown));
    }
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
    cfg.model.override_condition |= override_condition;
    cfg.normalize()?;
    Ok(cfg)
}

impl RunConfig {
    /// Fills documented defaults and validates every block, collecting all errors.
    pub fn normalize(&mut self) -> Result<()> {
        let mut errs = Vec::new();
        self.fill_model_defaults();
        let interaction = match self.interaction() {
            Ok(i) => Some(i),
            Err(e) => {
                errs.push(format!("model: {e}"));
                None
            }
        };
        if let Some(i) = &interaction {
            if self.growth == GrowthConfig::default() {
                if let GrowthSpec::Power { delta } = i.default_growth() {
                    self.growth.delta = Some(delta);
                }
            }
        }
        if let Err(e) = self.growth_spec() {
            errs.push(format!("growth: {e}"));
        }
        let size = self.model.alphabet.as_ref().map_or(2, Vec::len).max(2);
        self.validate_limits(size, &mut errs);
        let l = self.limits.clone();
        if self.converge.r_ref == 0 {
            self.converge.r_ref = l.r_max;
        }
        if self.converge.n_max == 0 {
            self.converge.n_max = l.n_max;
        }
        if self.entropy.r_ref == 0 {
            self.entropy.r_ref = l.r_max;
        }
        // Default grids shrink to fit a smaller range budget.
        if self.spectrum == SpectrumScan::default() {
            self.spectrum.r.retain(|&r| r <= l.r_max);
        }
        if self.converge.r == ConvergeScan::default().r {
            let top = self.converge.r_ref;
            self.converge.r.retain(|&r| r < top);
        }
        if self.entropy.r == EntropyScan::default().r {
            let top = self.entropy.r_ref;
            self.entropy.r.retain(|&r| r < top);
        }
        self.validate_scans(&mut errs);
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                errs.push(format!("output.formats: unknown format `{f}` (csv, json)"));
            }
        }
        if self.output.dir.is_empty() {
            errs.push("output.dir must not be empty".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn fill_model_defaults(&mut self) {
        let m = &mut self.model;
        match m.kind {
            ModelKind::Dyson | ModelKind::Exponential => {
                m.alphabet.get_or_insert_with(|| Alphabet::spins().labels().to_vec());
                m.beta.get_or_insert(1.0);
                m.coupling.get_or_insert(1.0);
            }
            ModelKind::Table => {
                if m.alphabet.is_none() {
                    let n = m.tables.as_ref().and_then(|t| t.first()).map_or(2, Vec::len);
                    m.alphabet = Some((0..n).map(|i| i.to_string()).collect());
                }
            }
            ModelKind::Zero => {
                m.alphabet.get_or_insert_with(|| vec!["0".into(), "1".into()]);
            }
        }
    }

    fn validate_limits(&self, size: usize, errs: &mut Vec<String>) {
        let l = &self.limits;
        match size.checked_pow(l.r_max as u32) {
            Some(d) if l.r_max >= 1 && d <= DENSE_DIM_CAP => {}
            _ if l.r_max == 0 => errs.push("limits.r_max must be at least 1".into()),
            _ => errs.push(format!(
                "limits.r_max = {}: dimension {size}^{} exceeds the dense budget of {DENSE_DIM_CAP} states",
                l.r_max, l.r_max
            )),
        }
        match size.checked_pow(l.p_max as u32) {
            Some(c) if l.p_max >= 1 && c <= WINDOW_CAP => {}
            _ => errs.push(format!(
                "limits.p_max = {}: {size}^{} periodic windows exceeds the cap of {WINDOW_CAP}",
                l.p_max, l.p_max
            )),
        }
        if l.n_max == 0 || l.n_max > N_MAX_CAP {
            errs.push(format!("limits.n_max = {} must lie in 1..={N_MAX_CAP}", l.n_max));
        }
        if !(l.perron_tol > 0.0 && l.perron_tol <= 1e-6) {
            errs.push(format!("limits.perron_tol = {} must lie in (0, 1e-6]", l.perron_tol));
        }
        if l.max_iter == 0 || l.max_iter > MAX_ITER_CAP {
            errs.push(format!(
                "limits.max_iter = {} must lie in 1..={MAX_ITER_CAP}",
                l.max_iter
            ));
        }
        if !(l.series_tol > 0.0 && l.series_tol < 1.0) {
            errs.push(format!("limits.series_tol = {} must lie in (0, 1)", l.series_tol));
        }
    }

    fn validate_scans(&self, errs: &mut Vec<String>) {
        let r_max = self.limits.r_max;
        let check_r = |name: &str, r: usize, errs: &mut Vec<String>| {
            if r == 0 || r > r_max {
                errs.push(format!("{name}: range {r} must lie in 1..={r_max}"));
            }
        };
        for &r in &self.spectrum.r {
            check_r("spectrum.r", r, errs);
        }

        let m = &self.measure;
        check_r("measure.r", m.r, errs);
        if m.max_len == 0 || m.max_len > N_MAX_CAP {
            errs.push(format!("measure.max_len = {} must lie in 1..={N_MAX_CAP}", m.max_len));
        }
        if m.period != 0 && m.period < m.r.max(m.max_len) {
            errs.push(format!(
                "measure.period = {} must be at least max(r, max_len) = {}",
                m.period,
                m.r.max(m.max_len)
            ));
        }

        let c = &self.converge;
        check_r("converge.r_ref", c.r_ref, errs);
        for &r in &c.r {
            check_r("converge.r", r, errs);
            if r >= c.r_ref {
                errs.push(format!("converge.r: range {r} must be below r_ref = {}", c.r_ref));
            }
        }
        if c.n_max > N_MAX_CAP {
            errs.push(format!("converge.n_max = {} must be at most {N_MAX_CAP}", c.n_max));
        }

        let x = &self.mixing;
        if !(x.xi > 0.0 && x.xi < 1.0) {
            errs.push(format!("mixing.xi = {} must lie in (0, 1)", x.xi));
        }
        if x.s.contains(&0) {
            errs.push("mixing.s: gaps must be positive".into());
        }
        if x.r_fixed != 0 {
            check_r("mixing.r_fixed", x.r_fixed, errs);
        }

        let e = &self.entropy;
        check_r("entropy.r_ref", e.r_ref, errs);
        for &r in &e.r {
            check_r("entropy.r", r, errs);
            if r >= e.r_ref {
                errs.push(format!("entropy.r: range {r} must be below r_ref = {}", e.r_ref));
            }
        }

        let b = &self.check_bounds;
        for &r in &b.lemma1_r {
            check_r("check_bounds.lemma1_r", r, errs);
            for &p in &b.lemma1_p {
                if p <= b.lemma1_n_max + r {
                    errs.push(format!(
                        "check_bounds.lemma1_p: period {p} must exceed lemma1_n_max + r = {}",
                        b.lemma1_n_max + r
                    ));
                }
            }
        }
        let s_top = b.lemma2_s.iter().copied().max().unwrap_or(0);
        for &r in &b.lemma2_r {
            check_r("check_bounds.lemma2_r", r, errs);
            if b.lemma2_p <= s_top + 2 * r {
                errs.push(format!(
                    "check_bounds.lemma2_p = {} must exceed max(lemma2_s) + 2r = {}",
                    b.lemma2_p,
                    s_top + 2 * r
                ));
            }
        }
    }

    pub fn interaction(&self) -> Result<PairInteraction> {
        let m = &self.model;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Interaction(format!("`{name}` is required")));
        let alphabet = Alphabet::new(m.alphabet.clone().unwrap_or_else(|| vec!["0".into(), "1".into()]))?;
        let kind = match m.kind {
            ModelKind::Zero => InteractionKind::Zero,
            ModelKind::Dyson => InteractionKind::Dyson {
                alpha: need(m.alpha, "alpha")?,
                beta: need(m.beta, "beta")?,
                coupling: need(m.coupling, "coupling")?,
            },
            ModelKind::Exponential => InteractionKind::Exponential {
                theta: need(m.theta, "theta")?,
                beta: need(m.beta, "beta")?,
                coupling: need(m.coupling, "coupling")?,
            },
            ModelKind::Table => InteractionKind::Table(
                m.tables
                    .clone()
                    .ok_or_else(|| Error::Interaction("`tables` is required".into()))?,
            ),
        };
        PairInteraction::new(kind, alphabet, m.onsite.clone(), m.override_condition)
    }

    pub fn growth_spec(&self) -> Result<GrowthSpec> {
        let g = &self.growth;
        match (&g.table, g.delta) {
            (Some(values), None) => GrowthSpec::table(values.clone(), g.tail_delta.unwrap_or(0.5)),
            (None, Some(delta)) if g.tail_delta.is_none() => GrowthSpec::power(delta),
            (None, None) => GrowthSpec::power(0.5),
            _ => Err(Error::Growth(
                "give either `delta` or `table` (with optional `tail_delta`)".into(),
            )),
        }
    }

    pub fn perron_options(&self) -> PerronOptions {
        PerronOptions {
            tol: self.limits.perron_tol,
            max_iter: self.limits.max_iter,
        }
    }

    /// Canonical TOML text: defaults filled, fixed key order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nkind = \"dyson\"\nalpha = 3.0\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL, false).unwrap();
        assert_eq!(c.model.beta, Some(1.0));
        assert_eq!(
            c.model.alphabet.as_deref(),
            Some(&["+1".to_string(), "-1".to_string()][..])
        );
        assert_eq!(c.growth.delta, Some(0.5));
        assert_eq!(c.limits, Limits::default());
        assert_eq!(c.converge.r_ref, 10);
        assert_eq!(c.converge.n_max, 8);
        assert_eq!(c.entropy.r_ref, 10);
    }

    #[test]
    fn canonical_round_trip() {
        let c = parse_config_str(MINIMAL, false).unwrap();
        let again = parse_config_str(&c.canonical(), false).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.canonical(), c.canonical());
        assert_eq!(again.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        let other = parse_config_str("[model]\nkind = \"dyson\"\nalpha = 4.0\n", false).unwrap();
        assert_ne!(other.hash(), c.hash());
    }

    #[test]
    fn dense_budget_enforced() {
        let text = format!("{MINIMAL}[limits]\nr_max = 20\n");
        let Err(Error::Config(errs)) = parse_config_str(&text, false) else {
            panic!("expected a config error")
        };
        assert!(errs.iter().any(|e| e.contains("dense budget")), "{errs:?}");
    }

    #[test]
    fn condition_violation_needs_override() {
        let text = "[model]\nkind = \"dyson\"\nalpha = 1.5\n";
        let Err(Error::Config(errs)) = parse_config_str(text, false) else {
            panic!("expected a config error")
        };
        assert!(errs.iter().any(|e| e.contains("decay condition")), "{errs:?}");
        assert!(parse_config_str(text, true).unwrap().model.override_condition);
    }

    #[test]
    fn all_unknown_keys_reported() {
        let text = format!("{MINIMAL}bogus = 1\n[limits]\nfoo = 2\nbar = 3\n[extra]\n");
        let Err(Error::Config(errs)) = parse_config_str(&text, false) else {
            panic!("expected a config error")
        };
        assert_eq!(errs.len(), 4, "{errs:?}");
    }

    #[test]
    fn all_validation_errors_reported() {
        let text = format!(
            "{MINIMAL}[limits]\nn_max = 0\nperron_tol = 1.0\n[mixing]\nxi = 1.5\n[output]\nformats = [\"xml\"]\n"
        );
        let Err(Error::Config(errs)) = parse_config_str(&text, false) else {
            panic!("expected a config error")
        };
        assert!(errs.len() >= 4, "{errs:?}");
    }

    #[test]
    fn table_model_infers_alphabet() {
        let text = "[model]\nkind = \"table\"\ntables = [[[0.1, 0.0, 0.0], [0.0, 0.2, 0.0], [0.0, 0.0, 0.3]]]\n[limits]\nr_max = 6\np_max = 12\n";
        let c = parse_config_str(text, false).unwrap();
        assert_eq!(c.model.alphabet.as_ref().unwrap().len(), 3);
        assert_eq!(c.interaction().unwrap().alphabet().size(), 3);
    }
}
