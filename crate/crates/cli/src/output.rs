use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qubit_aging::analysis::JumpEvent;

use crate::args::Format;
use crate::config::{CliError, RunConfig};

/// Rounds to 12 significant digits, so every printed float has at most 12.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub nbar: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep2dRow {
    pub x: f64,
    pub p: f64,
    pub nbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinRow {
    pub q0: f64,
    pub a0: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub p_cmin: f64,
    pub p_cmax: f64,
    pub clamped_upper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub nbar: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub p: f64,
    pub nbar_collective: f64,
    pub nbar_meanfield: f64,
    /// Empty when N is too large for the exact solver.
    pub nbar_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRow {
    pub location: f64,
    pub drop: f64,
}

impl From<&JumpEvent> for JumpRow {
    fn from(j: &JumpEvent) -> Self {
        Self {
            location: sig12(j.location),
            drop: sig12(j.drop),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Sweep(Vec<SweepRow>),
    Sweep2d(Vec<Sweep2dRow>),
    Basin(Vec<BasinRow>),
    Interval(Vec<IntervalRow>),
    Size(Vec<SizeRow>),
    Compare(Vec<CompareRow>),
}

pub struct Report {
    pub table: Table,
    /// `Some` for one-dimensional scans, which carry transition detection.
    pub jumps: Option<Vec<JumpRow>>,
}

#[derive(Serialize)]
struct JsonDoc<'a, T: Serialize> {
    meta: &'a RunConfig,
    rows: &'a [T],
    #[serde(skip_serializing_if = "Option::is_none")]
    jumps: Option<&'a [JumpRow]>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn csv_bytes<T: Serialize>(rows: &[T], headers: &[&str]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(headers)
            .map_err(|e| io_err(Path::new("<csv>"), e))?;
    }
    for row in rows {
        w.serialize(row)
            .map_err(|e| io_err(Path::new("<csv>"), e))?;
    }
    w.into_inner().map_err(|e| io_err(Path::new("<csv>"), e))
}

fn json_bytes<T: Serialize>(meta: &RunConfig, rows: &[T], jumps: Option<&[JumpRow]>) -> Vec<u8> {
    let mut out =
        serde_json::to_vec_pretty(&JsonDoc { meta, rows, jumps }).expect("plain data serializes");
    out.push(b'\n');
    out
}

fn jumps_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_jumps.csv"))
}

fn emit(target: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match target {
        Some(path) => std::fs::write(path, bytes).map_err(|e| io_err(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

impl Report {
    fn encode<T: Serialize>(
        &self,
        cfg: &RunConfig,
        rows: &[T],
        headers: &[&str],
    ) -> Result<Vec<u8>, CliError> {
        Ok(match cfg.format {
            Format::Csv => csv_bytes(rows, headers)?,
            Format::Json => json_bytes(cfg, rows, self.jumps.as_deref()),
            Format::Svg => crate::svg::render(&self.table).into_bytes(),
        })
    }

    /// Writes the table to `--output` (or stdout). For CSV files with
    /// transition detection, the jumps go to `<stem>_jumps.csv` alongside.
    pub fn write(&self, cfg: &RunConfig) -> Result<(), CliError> {
        let bytes = match &self.table {
            Table::Sweep(r) => self.encode(cfg, r, &["p", "nbar", "converged"])?,
            Table::Sweep2d(r) => self.encode(cfg, r, &["x", "p", "nbar"])?,
            Table::Basin(r) => self.encode(cfg, r, &["q0", "a0", "label"])?,
            Table::Interval(r) => self.encode(cfg, r, &["p_cmin", "p_cmax", "clamped_upper"])?,
            Table::Size(r) => self.encode(cfg, r, &["N", "nbar", "converged"])?,
            Table::Compare(r) => self.encode(
                cfg,
                r,
                &["p", "nbar_collective", "nbar_meanfield", "nbar_exact"],
            )?,
        };
        emit(cfg.output.as_deref(), &bytes)?;
        if let (Some(path), Some(jumps), Format::Csv) = (&cfg.output, &self.jumps, cfg.format) {
            let side = jumps_path(path);
            emit(Some(&side), &csv_bytes(jumps, &["location", "drop"])?)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        if let Some(jumps) = &self.jumps {
            if jumps.is_empty() {
                s.push_str("no jumps detected\n");
            }
            for j in jumps {
                let _ = writeln!(s, "jump at {} (drop {})", j.location, j.drop);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.123456789012345), 0.123456789012);
        assert_eq!(sig12(1234.5678901234567), 1234.56789012);
        assert_eq!(sig12(0.0), 0.0);
        assert_eq!(
            sig12(sig12(std::f64::consts::PI)),
            sig12(std::f64::consts::PI)
        );
    }

    #[test]
    fn empty_tables_keep_headers() {
        let bytes = csv_bytes::<SweepRow>(&[], &["p", "nbar", "converged"]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "p,nbar,converged\n");
    }

    #[test]
    fn missing_exact_column_is_empty() {
        let rows = [CompareRow {
            p: 0.5,
            nbar_collective: 0.4,
            nbar_meanfield: 0.41,
            nbar_exact: None,
        }];
        let bytes = csv_bytes(&rows, &[]).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "p,nbar_collective,nbar_meanfield,nbar_exact\n0.5,0.4,0.41,\n"
        );
    }

    #[test]
    fn jump_file_sits_next_to_output() {
        assert_eq!(
            jumps_path(Path::new("/tmp/run/scan.csv")),
            Path::new("/tmp/run/scan_jumps.csv")
        );
    }
}
