//! Artifact formats: CSV tables, Wigner text grids, JSON basis exports and
//! the TOML manifest. Every file is written to a temporary sibling first and
//! renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::WignerGrid;

use super::config::{ExperimentKind, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

/// A keyed table: one key column (time or branch index) and data columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub key: String,
    pub keys: Vec<f64>,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(key: impl Into<String>, keys: Vec<f64>) -> Self {
        Self { key: key.into(), keys, columns: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>, stderr: Option<Vec<f64>>) {
        self.columns.push(Column { name: name.into(), values, stderr });
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn values(&self, name: &str) -> Option<&[f64]> {
        self.column(name).map(|c| c.values.as_slice())
    }

    /// Header names in file order.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec![self.key.clone()];
        for c in &self.columns {
            h.push(c.name.clone());
            if c.stderr.is_some() {
                h.push(format!("{}_stderr", c.name));
            }
        }
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).map_err(csv_err)?;
        for (r, key) in self.keys.iter().enumerate() {
            let mut row = vec![fmt(*key)];
            for c in &self.columns {
                row.push(fmt(c.values[r]));
                if let Some(s) = &c.stderr {
                    row.push(fmt(s[r]));
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::usage(e.to_string()))
    }

    /// Inverse of [`Table::to_csv`]; `*_stderr` columns attach to the
    /// column they follow.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let rows: Vec<Vec<f64>> = r
            .records()
            .map(|rec| {
                rec.map_err(csv_err)?
                    .iter()
                    .map(|s| s.parse::<f64>().map_err(|e| Error::usage(format!("bad number `{s}`: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let col = |j: usize| rows.iter().map(|row| row[j]).collect::<Vec<f64>>();
        let key = header.first().cloned().ok_or_else(|| Error::usage("empty CSV header"))?;
        let mut table = Table::new(key, col(0));
        for (j, name) in header.iter().enumerate().skip(1) {
            match name.strip_suffix("_stderr") {
                Some(base) if table.columns.last().is_some_and(|c| c.name == base) => {
                    table.columns.last_mut().unwrap().stderr = Some(col(j));
                }
                _ => table.push(name.clone(), col(j), None),
            }
        }
        Ok(table)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::usage(format!("csv: {e}"))
}

/// Shortest representation that parses back to the same `f64`.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn wigner_to_text(grid: &WignerGrid, title: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {title}\n"));
    out.push_str("# rows: x = Re(beta); columns: p = Im(beta); values W(x, p)\n");
    out.push_str(&format!("# padded_dim = {}\n", grid.padded_dim));
    out.push_str(&format!("# max_tail = {}\n", fmt(grid.max_tail)));
    out.push_str(&format!("# integral = {}\n", fmt(grid.integral)));
    out.push_str(&format!("# tail_warning = {}\n", grid.tail_warning));
    out.push_str(&format!("# coverage_warning = {}\n", grid.coverage_warning));
    out.push_str("x\\p");
    for p in &grid.p_axis {
        out.push(' ');
        out.push_str(&fmt(*p));
    }
    out.push('\n');
    for (i, x) in grid.x_axis.iter().enumerate() {
        out.push_str(&fmt(*x));
        for j in 0..grid.p_axis.len() {
            out.push(' ');
            out.push_str(&fmt(grid.values[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Axes and values of a Wigner text grid.
pub fn wigner_from_text(text: &str) -> Result<(Vec<f64>, Vec<f64>, DMatrix<f64>)> {
    let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::usage(format!("bad number `{s}`: {e}")));
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::usage("wigner grid has no header"))?;
    let p_axis: Vec<f64> = head.split_whitespace().skip(1).map(parse).collect::<Result<_>>()?;
    let mut x_axis = Vec::new();
    let mut data = Vec::new();
    for line in lines {
        let mut it = line.split_whitespace();
        x_axis.push(parse(it.next().unwrap_or_default())?);
        let row: Vec<f64> = it.map(parse).collect::<Result<_>>()?;
        if row.len() != p_axis.len() {
            return Err(Error::usage(format!("wigner row has {} values, header has {}", row.len(), p_axis.len())));
        }
        data.extend(row);
    }
    let values = DMatrix::from_row_slice(x_axis.len(), p_axis.len(), &data);
    Ok((x_axis, p_axis, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalesReport {
    pub field_dim: usize,
    pub particle_dim: usize,
    pub xi_ref: Option<f64>,
    /// `ξ(0)`
    pub xi_0: f64,
    /// `Ω(0) = 2√(ω_rec |V0|)`
    pub omega_0: f64,
    /// `|η/κ|²`, the empty-cavity photon number
    pub pump_photons: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub checked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fock: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_levels: Option<usize>,
    #[serde(default)]
    pub max_deviation: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileList {
    pub table: String,
    #[serde(default)]
    pub wigner: Vec<String>,
    #[serde(default)]
    pub bases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub name: String,
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub scales: ScalesReport,
    pub files: FileList,
    /// Header name to description for the table file.
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    pub convergence: ConvergenceReport,
    pub config: RunConfig,
}

impl Manifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse { path: "<manifest>".into(), message: e.to_string() })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::Parse { path: "<manifest>".into(), message: e.to_string() })?;
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })
    }
}

/// Write `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
