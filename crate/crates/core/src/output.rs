//! CSV and JSON writers for run records and Monte Carlo summaries.
//!
//! Floating-point CSV fields use `{:.16e}` (17 significant digits), which
//! parses back to the identical `f64`. JSON rows carry the same fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{RunRecord, RunRow, Summary, SummaryRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid("format", format!("expected csv or json, got `{other}`"))),
        }
    }
}

impl Format {
    /// Guesses from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub const RECORD_COLUMNS: [&str; 20] = [
    "frame", "target", "truth_x", "truth_vx", "truth_y", "truth_vy", "est_x", "est_vx", "est_y",
    "est_vy", "p_x", "p_vx", "p_y", "p_vy", "bound_x", "bound_vx", "bound_y", "bound_vy", "nees",
    "beta_none",
];

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "frame",
    "target",
    "runs",
    "position_rmse",
    "velocity_rmse",
    "mean_nees",
    "mean_bound_trace",
    "position_bound",
    "velocity_bound",
];

fn push_float(line: &mut String, v: f64) {
    line.push(',');
    write!(line, "{v:.16e}").expect("write to String");
}

pub fn record_to_csv(rows: &[RunRow]) -> String {
    let mut out = RECORD_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let mut line = format!("{},{}", r.frame, r.target);
        for v in r
            .truth
            .iter()
            .chain(&r.estimate)
            .chain(&r.cov_diag)
            .chain(&r.bound_diag)
            .chain([&r.nees, &r.beta_none])
        {
            push_float(&mut line, *v);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = SUMMARY_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let mut line = format!("{},{},{}", r.frame, r.target, r.runs);
        for v in [
            r.position_rmse,
            r.velocity_rmse,
            r.mean_nees,
            r.mean_bound_trace,
            r.position_bound,
            r.velocity_bound,
        ] {
            push_float(&mut line, v);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn split_rows<'a>(text: &'a str, header: &[&str]) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    let got = lines.next().unwrap_or_default();
    if got != header.join(",") {
        return Err(Error::Parse(format!("unexpected CSV header `{got}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == header.len() {
                Ok(fields)
            } else {
                Err(Error::Parse(format!(
                    "line {}: expected {} fields, got {}",
                    i + 2,
                    header.len(),
                    fields.len()
                )))
            }
        })
        .collect()
}

fn parse<T: FromStr>(field: &str, column: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("column {column}: cannot parse `{field}`")))
}

pub fn record_from_csv(text: &str) -> Result<Vec<RunRow>> {
    split_rows(text, &RECORD_COLUMNS)?
        .into_iter()
        .map(|f| {
            let mut v = [0.0; 18];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = parse(f[i + 2], RECORD_COLUMNS[i + 2])?;
            }
            let four = |o: usize| [v[o], v[o + 1], v[o + 2], v[o + 3]];
            Ok(RunRow {
                frame: parse(f[0], "frame")?,
                target: parse(f[1], "target")?,
                truth: four(0),
                estimate: four(4),
                cov_diag: four(8),
                bound_diag: four(12),
                nees: v[16],
                beta_none: v[17],
            })
        })
        .collect()
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SummaryRow>> {
    split_rows(text, &SUMMARY_COLUMNS)?
        .into_iter()
        .map(|f| {
            Ok(SummaryRow {
                frame: parse(f[0], "frame")?,
                target: parse(f[1], "target")?,
                runs: parse(f[2], "runs")?,
                position_rmse: parse(f[3], "position_rmse")?,
                velocity_rmse: parse(f[4], "velocity_rmse")?,
                mean_nees: parse(f[5], "mean_nees")?,
                mean_bound_trace: parse(f[6], "mean_bound_trace")?,
                position_bound: parse(f[7], "position_bound")?,
                velocity_bound: parse(f[8], "velocity_bound")?,
            })
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_record(record: &RunRecord, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => record_to_csv(&record.rows),
        Format::Json => serde_json::to_string_pretty(record).expect("record serializes") + "\n",
    };
    write_file(path, &text)
}

pub fn emit_summary(summary: &Summary, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => summary_to_csv(&summary.rows),
        Format::Json => serde_json::to_string_pretty(summary).expect("summary serializes") + "\n",
    };
    write_file(path, &text)
}
