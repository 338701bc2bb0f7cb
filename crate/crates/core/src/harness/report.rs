use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::studies::ConvergenceRow;

/// A CSV table. Cells are preformatted so that output is byte-stable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn convergence(name: impl Into<String>, rows: &[ConvergenceRow]) -> Self {
        let mut t = Self::new(name, &["n1", "statistic", "empirical", "theoretical", "ratio", "std_error"]);
        for r in rows {
            t.push(vec![
                r.n1.to_string(),
                r.statistic.clone(),
                num(r.empirical),
                num(r.theoretical),
                num(r.ratio),
                num(r.std_error),
            ]);
        }
        t
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::io(format!("{}.csv", self.name), e.into_error()))
    }
}

/// Shortest round-trip formatting, scientific outside `[1e-4, 1e15)`;
/// non-finite values become `NaN`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// One polyline per JSON line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolylineRecord {
    pub label: String,
    pub n: [u64; 2],
    pub replicate: u64,
    pub vertices: Vec<[i64; 2]>,
    pub endpoint: [i64; 2],
    /// Euclidean length of the unscaled line.
    pub length: f64,
}

/// Overlay of scaled lines on the target curve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub curve: Vec<[f64; 2]>,
    pub lines: Vec<Vec<[f64; 2]>>,
}

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 24.0;
const LINE_COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

impl Plot {
    pub fn to_svg(&self) -> String {
        let pts = self.curve.iter().chain(self.lines.iter().flatten());
        let (mut xmax, mut ymax) = (0.0f64, 0.0f64);
        for p in pts {
            xmax = xmax.max(p[0]);
            ymax = ymax.max(p[1]);
        }
        let span = xmax.max(ymax).max(f64::MIN_POSITIVE);
        let k = (SVG_SIZE - 2.0 * SVG_MARGIN) / span;
        let path = |pts: &[[f64; 2]]| {
            let mut d = String::new();
            for (i, p) in pts.iter().enumerate() {
                let x = SVG_MARGIN + p[0] * k;
                let y = SVG_SIZE - SVG_MARGIN - p[1] * k;
                let _ = write!(d, "{}{:.3},{:.3}", if i == 0 { "M" } else { " L" }, x, y);
            }
            d
        };
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
        );
        let _ = writeln!(s, "<title>{}</title>", xml_escape(&self.title));
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (i, line) in self.lines.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1" stroke-opacity="0.8"/>"#,
                path(line),
                LINE_COLOURS[i % LINE_COLOURS.len()]
            );
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="black" stroke-width="2"/>"#, path(&self.curve));
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub mode: String,
    pub tables: Vec<Table>,
    /// JSON documents written as `<name>.json`.
    pub documents: Vec<(String, serde_json::Value)>,
    /// Polyline dumps written as `<name>.jsonl`.
    pub polylines: Vec<(String, Vec<PolylineRecord>)>,
    pub plots: Vec<Plot>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(mode: impl Into<String>) -> Self {
        Self { mode: mode.into(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# limitshape {}\n", self.mode);
        let verdict = if self.checks.is_empty() {
            "no checks"
        } else if self.passed() {
            "PASS"
        } else {
            "FAIL"
        };
        let _ = writeln!(s, "Result: **{verdict}**\n");
        if !self.checks.is_empty() {
            s.push_str("| check | result | detail |\n|---|---|---|\n");
            for c in &self.checks {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} |",
                    c.name,
                    if c.passed { "pass" } else { "FAIL" },
                    c.detail.replace('|', "\\|")
                );
            }
            s.push('\n');
        }
        if !self.tables.is_empty() {
            s.push_str("Tables:\n\n");
            for t in &self.tables {
                let _ = writeln!(s, "- `{}.csv` ({} rows)", t.name, t.rows.len());
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "{n}\n");
        }
        s
    }
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes every artifact of `report` into `dir` and returns the paths in
/// write order.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for t in &report.tables {
        out.push(write(dir.join(format!("{}.csv", t.name)), &t.to_csv()?)?);
    }
    for (name, doc) in &report.documents {
        let mut text = serde_json::to_string_pretty(doc)?;
        text.push('\n');
        out.push(write(dir.join(format!("{name}.json")), text.as_bytes())?);
    }
    for (name, recs) in &report.polylines {
        let mut text = String::new();
        for r in recs {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        out.push(write(dir.join(format!("{name}.jsonl")), text.as_bytes())?);
    }
    for p in &report.plots {
        out.push(write(dir.join(format!("{}.svg", p.name)), p.to_svg().as_bytes())?);
    }
    out.push(write(dir.join("summary.md"), report.summary_markdown().as_bytes())?);
    Ok(out)
}
