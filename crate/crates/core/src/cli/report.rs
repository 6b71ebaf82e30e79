use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subcommand {
    Spectrum,
    Measure,
    Converge,
    Mixing,
    Entropy,
    CheckBounds,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Spectrum,
        Subcommand::Measure,
        Subcommand::Converge,
        Subcommand::Mixing,
        Subcommand::Entropy,
        Subcommand::CheckBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Measure => "measure",
            Subcommand::Converge => "converge",
            Subcommand::Mixing => "mixing",
            Subcommand::Entropy => "entropy",
            Subcommand::CheckBounds => "check-bounds",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown subcommand `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn int(v: usize) -> Self {
        Cell::Int(v as i64)
    }

    pub fn opt_real(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Real(v) if v.is_finite() => json!(v),
            Cell::Real(v) => json!(format_real(*v)),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Seventeen significant digits, which round-trips every `f64`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Rows of one subcommand run plus the metadata mirrored into JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportEnvelope {
    pub tool_version: String,
    pub config_hash: String,
    pub subcommand: Subcommand,
    pub timestamp: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Scalar results that do not fit the row schema (fits, constants).
    pub summary: Vec<(String, Cell)>,
    pub violations: usize,
    pub refusals: usize,
}

impl ReportEnvelope {
    /// 0 when every check holds, 2 when any bound is violated or refused.
    pub fn exit_status(&self) -> u8 {
        if self.violations + self.refusals > 0 {
            2
        } else {
            0
        }
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_csv(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json_value(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let m: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                Value::Object(m)
            })
            .collect();
        let summary: Map<String, Value> = self.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
        json!({
            "tool": "gibbsline",
            "version": self.tool_version,
            "config_hash": self.config_hash,
            "subcommand": self.subcommand.name(),
            "timestamp": self.timestamp,
            "exit_status": self.exit_status(),
            "violations": self.violations,
            "refusals": self.refusals,
            "summary": summary,
            "columns": self.columns,
            "rows": rows,
        })
    }
}

/// Writes `<dir>/<subcommand>.csv` and/or `.json`; returns the paths written.
pub fn emit_reports(env: &ReportEnvelope, dir: &Path, formats: &[String]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for f in formats {
        let path = dir.join(format!("{}.{f}", env.subcommand.name()));
        match f.as_str() {
            "csv" => std::fs::write(&path, env.csv_string()?)?,
            "json" => {
                let mut text = serde_json::to_string_pretty(&env.json_value())?;
                text.push('\n');
                std::fs::write(&path, text)?;
            }
            other => return Err(Error::InvalidArgument(format!("unknown output format `{other}`"))),
        }
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn envelope(rows: Vec<Vec<Cell>>) -> ReportEnvelope {
        ReportEnvelope {
            tool_version: "0.0.0".into(),
            config_hash: "abc".into(),
            subcommand: Subcommand::Converge,
            timestamp: "2026-01-01T00:00:00Z".into(),
            columns: vec!["r", "epsilon_r", "projective_gap", "worst_word", "satisfied"],
            rows,
            summary: vec![],
            violations: 0,
            refusals: 0,
        }
    }

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(1.0), "1.0000000000000000e0");
        assert_eq!(format_real(-0.375), "-3.7500000000000000e-1");
        assert_eq!(format_real(f64::INFINITY), "inf");
        let x = 0.1 + 0.2;
        assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn empty_rows_give_header_only() {
        let env = envelope(vec![]);
        assert_eq!(
            env.csv_string().unwrap(),
            "r,epsilon_r,projective_gap,worst_word,satisfied\n"
        );
        assert_eq!(env.json_value()["rows"], json!([]));
    }

    #[test]
    fn files_written() {
        let dir = tempfile::tempdir().unwrap();
        let env = envelope(vec![vec![
            Cell::int(2),
            Cell::Real(0.5),
            Cell::Real(0.25),
            Cell::text("01"),
            Cell::Bool(true),
        ]]);
        let paths = emit_reports(&env, dir.path(), &["csv".into(), "json".into()]).unwrap();
        assert_eq!(paths.len(), 2);
        let csv = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(csv.ends_with("2,5.0000000000000000e-1,2.5000000000000000e-1,01,true\n"));
        let json: Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(json["rows"][0]["worst_word"], "01");
        assert_eq!(json["config_hash"], "abc");
    }

    #[test]
    fn subcommand_names_round_trip() {
        for c in Subcommand::ALL {
            assert_eq!(c.name().parse::<Subcommand>().unwrap(), c);
        }
        assert!("bogus".parse::<Subcommand>().is_err());
    }
}
