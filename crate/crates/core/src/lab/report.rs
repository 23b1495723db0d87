//! Study reports and their CSV, JSON and plot-data renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StudyKind {
    Corrector,
    HeatObstacle,
    Eigen,
    Pme,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Corrector => "corrector",
            StudyKind::HeatObstacle => "heat_obstacle",
            StudyKind::Eigen => "eigen",
            StudyKind::Pme => "pme",
        }
    }
}

impl FromStr for StudyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "corrector" => Ok(StudyKind::Corrector),
            "heat_obstacle" | "heat" => Ok(StudyKind::HeatObstacle),
            "eigen" => Ok(StudyKind::Eigen),
            "pme" => Ok(StudyKind::Pme),
            other => Err(Error::Config(format!("unknown study kind '{other}'"))),
        }
    }
}

/// One ε row. Missing values (failed rows, undefined diagnostics) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub eps: f64,
    #[serde(with = "cells")]
    pub values: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub config_hash: String,
}

impl Row {
    pub fn ok(eps: f64, values: Vec<f64>) -> Self {
        Row {
            eps,
            values: values.into_iter().map(Some).collect(),
            error: None,
            config_hash: String::new(),
        }
    }

    pub fn partial(eps: f64, values: Vec<Option<f64>>) -> Self {
        Row {
            eps,
            values,
            error: None,
            config_hash: String::new(),
        }
    }

    /// Row carrying only `eps` and the failure message.
    pub fn failed(eps: f64, columns: &[&str], error: String) -> Self {
        let values = columns.iter().map(|c| (*c == "eps").then_some(eps)).collect();
        Row {
            eps,
            values,
            error: Some(error),
            config_hash: String::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub kind: StudyKind,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    /// Fitted constants such as decay exponents or residual prefactors.
    #[serde(with = "float_map")]
    pub constants: BTreeMap<String, f64>,
    pub meta: BTreeMap<String, String>,
    pub config_hash: String,
}

impl StudyReport {
    pub fn new(kind: StudyKind, columns: &[&str]) -> Self {
        let mut meta = BTreeMap::new();
        meta.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
        StudyReport {
            schema_version: SCHEMA_VERSION,
            kind,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            constants: BTreeMap::new(),
            meta,
            config_hash: String::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn set_constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    /// Values of column `name` across rows; `None` for missing entries or an
    /// unknown column.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        let pos = self.columns.iter().position(|c| c == name);
        self.rows
            .iter()
            .map(|r| pos.and_then(|p| r.values.get(p).copied().flatten()))
            .collect()
    }

    /// Column with every entry present, or `None`.
    pub fn full_column(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).into_iter().collect()
    }

    pub fn set_config_hash(&mut self, hash: &str) {
        self.config_hash = hash.to_string();
    }

    /// Stamps rows with the config hash and rejects a study whose rows all failed.
    pub fn finalize(&mut self) -> Result<()> {
        for r in &mut self.rows {
            r.config_hash = self.config_hash.clone();
        }
        if !self.rows.is_empty() && self.rows.iter().all(|r| !r.is_ok()) {
            let first = self.rows[0].error.clone().unwrap_or_default();
            return Err(Error::StudyFailed(format!(
                "all {} rows failed; first: {first}",
                self.rows.len()
            )));
        }
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.values.iter().map(|v| v.map(fmt_num).unwrap_or_default()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: StudyReport = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported report schema version {} (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }

    /// Whitespace-separated columns: `eps` followed by one column per curve.
    pub fn to_plotdata(&self) -> String {
        let curves = self.plot_curves();
        let mut out = String::new();
        let _ = writeln!(out, "# {} study, {} curves", self.kind.name(), curves.len());
        let _ = writeln!(
            out,
            "# eps {}",
            curves.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(" ")
        );
        for r in &self.rows {
            out.push_str(&fmt_num(r.eps));
            for &(_, p) in &curves {
                out.push(' ');
                out.push_str(&r.values[p].map(fmt_num).unwrap_or_else(|| "nan".into()));
            }
            out.push('\n');
        }
        out
    }

    /// Columns plotted against `eps`.
    pub fn plot_curves(&self) -> Vec<(String, usize)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.as_str() != "eps")
            .map(|(i, c)| (c.clone(), i))
            .collect()
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
    Plot,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Plot => "dat",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "plot" | "plotdata" => Ok(ReportFormat::Plot),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

/// Writes `<kind>.<ext>` into `dir` through a temporary file and rename.
pub fn emit_report(report: &StudyReport, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    let body = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Plot => report.to_plotdata(),
    };
    let path = dir.join(format!("{}.{}", report.kind.name(), format.extension()));
    write_atomic(&path, body.as_bytes())?;
    Ok(path)
}

/// Finds the single JSON report in `dir`.
pub fn load_report(dir: &Path) -> Result<StudyReport> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for e in entries {
        let path = e.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json")
            && path
                .file_stem()
                .and_then(|s| s.to_str())
                .is_some_and(|s| s.parse::<StudyKind>().is_ok())
        {
            found.push(path);
        }
    }
    found.sort();
    match found.as_slice() {
        [one] => {
            let text = std::fs::read_to_string(one).map_err(|e| Error::io(one, e))?;
            StudyReport::from_json(&text)
        }
        [] => Err(Error::Config(format!("no JSON report in {}", dir.display()))),
        _ => Err(Error::Config(format!("several JSON reports in {}", dir.display()))),
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// JSON numbers cannot hold non-finite values; these are written as strings.
fn encode(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::Value::from(x)
    } else {
        serde_json::Value::from(fmt_num(x))
    }
}

fn decode<E: serde::de::Error>(v: &serde_json::Value) -> std::result::Result<f64, E> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| E::custom("bad number")),
        serde_json::Value::String(s) => match s.as_str() {
            "nan" => Ok(f64::NAN),
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => Err(E::custom(format!("bad number '{s}'"))),
        },
        _ => Err(E::custom("expected a number")),
    }
}

mod cells {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
        let vals: Vec<Value> = v.iter().map(|x| x.map_or(Value::Null, super::encode)).collect();
        vals.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<f64>>, D::Error> {
        let vals = Vec::<Value>::deserialize(d)?;
        vals.iter()
            .map(|v| {
                if v.is_null() {
                    Ok(None)
                } else {
                    super::decode(v).map(Some)
                }
            })
            .collect()
    }
}

mod float_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let vals: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, super::encode(*v))).collect();
        vals.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let vals = BTreeMap::<String, Value>::deserialize(d)?;
        vals.into_iter()
            .map(|(k, v)| super::decode(&v).map(|x| (k, x)))
            .collect()
    }
}
