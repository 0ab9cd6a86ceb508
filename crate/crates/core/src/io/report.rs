//! JSON reports and plot-ready CSV files.
//!
//! A report is an object `{"meta": {...}, "result": {...}}`. Keys appear in
//! a fixed order. `meta` always carries every field of [`ReportMeta`]; fields
//! that do not apply to a report kind are `null`. See `docs/report-schema.md`.

use crate::engine::PosteriorDraws;
use crate::error::{Error, Result};
use crate::glm::Family;
use crate::rng::GENERATOR;
use crate::summaries::{BandTable, Ecdf, KdeCurve};
use crate::Scalar;
use serde::Serialize;
use serde_json::Value;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const TOOL: &str = "bbglm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const KINDS: [&str; 7] = [
    "tabulate",
    "fit",
    "posterior",
    "bands",
    "density",
    "elimination",
    "mean-ci",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub data: String,
    pub generator: String,
    pub master_seed: Option<u64>,
    pub draws_requested: Option<usize>,
    pub draws_effective: Option<usize>,
    pub excluded: Option<usize>,
    pub family: Option<Family>,
    pub terms: Vec<String>,
    pub spec_hash: Option<String>,
}

impl ReportMeta {
    pub fn new(kind: &str, data: &str) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            kind: kind.to_string(),
            data: data.to_string(),
            generator: GENERATOR.to_string(),
            master_seed: None,
            draws_requested: None,
            draws_effective: None,
            excluded: None,
            family: None,
            terms: Vec::new(),
            spec_hash: None,
        }
    }

    /// Fills the posterior fields from a run.
    pub fn with_draws<T: Scalar>(mut self, draws: &PosteriorDraws<T>) -> Self {
        self.master_seed = Some(draws.master_seed);
        self.draws_requested = Some(draws.requested);
        self.draws_effective = Some(draws.effective());
        self.excluded = Some(draws.excluded.len());
        self.family = Some(draws.family);
        self.terms = draws.names.clone();
        self.spec_hash = Some(draws.spec_hash.clone());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<R> {
    pub meta: ReportMeta,
    pub result: R,
}

impl<R: Serialize> Report<R> {
    pub fn new(meta: ReportMeta, result: R) -> Self {
        Self { meta, result }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

const META_FIELDS: [&str; 12] = [
    "tool",
    "version",
    "kind",
    "data",
    "generator",
    "master_seed",
    "draws_requested",
    "draws_effective",
    "excluded",
    "family",
    "terms",
    "spec_hash",
];

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidReport(msg.into())
}

/// Checks a report's structure and required metadata.
pub fn validate_report(text: &str) -> Result<Value> {
    let v: Value = serde_json::from_str(text)?;
    let obj = v.as_object().ok_or_else(|| invalid("top level is not an object"))?;
    let meta = obj
        .get("meta")
        .and_then(Value::as_object)
        .ok_or_else(|| invalid("missing `meta` object"))?;
    if !obj.contains_key("result") {
        return Err(invalid("missing `result`"));
    }
    for f in META_FIELDS {
        if !meta.contains_key(f) {
            return Err(invalid(format!("meta lacks `{f}`")));
        }
    }
    if meta["tool"] != TOOL {
        return Err(invalid("meta.tool is not bbglm"));
    }
    let kind = meta["kind"]
        .as_str()
        .ok_or_else(|| invalid("meta.kind is not a string"))?;
    if !KINDS.contains(&kind) {
        return Err(invalid(format!("unknown kind `{kind}`")));
    }
    if !meta["terms"].is_array() {
        return Err(invalid("meta.terms is not an array"));
    }
    let posterior = matches!(kind, "posterior" | "bands" | "elimination");
    for f in ["master_seed", "draws_requested", "draws_effective", "excluded"] {
        let val = &meta[f];
        if !(val.is_u64() || (!posterior && val.is_null())) {
            return Err(invalid(format!("meta.{f} must be a non-negative integer")));
        }
    }
    if posterior {
        let req = meta["draws_requested"].as_u64().unwrap_or(0);
        let eff = meta["draws_effective"].as_u64().unwrap_or(0);
        let exc = meta["excluded"].as_u64().unwrap_or(0);
        if req != eff + exc {
            return Err(invalid("draws_requested != draws_effective + excluded"));
        }
    }
    Ok(v)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Writes CSV rows to `path`; `rows` yields the numeric cells of each row.
fn write_table<T: Scalar>(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<T>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per retained draw, one column per coefficient.
pub fn write_draws_csv<T: Scalar>(path: impl AsRef<Path>, draws: &PosteriorDraws<T>) -> Result<()> {
    write_table(path.as_ref(), &draws.names, draws.beta.outer_iter().map(|r| r.to_vec()))
}

pub fn write_bands_csv<T: Scalar>(path: impl AsRef<Path>, bands: &BandTable<T>) -> Result<()> {
    let mut header = bands.grid_columns.clone();
    header.extend(
        [
            "ml_fit",
            "ml_lower",
            "ml_upper",
            "bayes_median",
            "bayes_lower",
            "bayes_upper",
        ]
        .map(String::from),
    );
    let rows = bands.grid.outer_iter().zip(&bands.rows).map(|(g, r)| {
        let mut v = g.to_vec();
        v.extend([
            r.ml_fit,
            r.ml_lower,
            r.ml_upper,
            r.bayes_median,
            r.bayes_lower,
            r.bayes_upper,
        ]);
        v
    });
    write_table(path.as_ref(), &header, rows)
}

/// Long format: `curve,x,y` with the ECDF steps then the KDE grid.
pub fn write_density_csv<T: Scalar>(path: impl AsRef<Path>, ecdf: &Ecdf<T>, kde: &KdeCurve<T>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["curve", "x", "y"])?;
    for (x, p) in ecdf.values.iter().zip(&ecdf.probs) {
        w.write_record(["ecdf".to_string(), x.to_string(), p.to_string()])?;
    }
    for (x, d) in kde.grid.iter().zip(&kde.density) {
        w.write_record(["kde".to_string(), x.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `text` to `path`, creating or truncating it.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
