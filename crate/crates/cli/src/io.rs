//! CSV input, matrix output and atomic file writes.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use tempfile::NamedTempFile;

use crate::error::{input, CliError, CliResult};

/// Name of the class column.
pub const GROUP_COLUMN: &str = "group";

/// Rows of a CSV file with an optional `group` column.
#[derive(Debug, Clone)]
pub struct Table {
    pub features: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Label per row, when the file has a `group` column.
    pub labels: Option<Vec<String>>,
}

impl Table {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// Rows split by label, labels in order of first appearance.
    pub fn grouped(&self) -> CliResult<(Vec<String>, Vec<DMatrix<f64>>)> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| input(format!("input has no '{GROUP_COLUMN}' column")))?;
        let mut order: Vec<String> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let k = *index.entry(l.as_str()).or_insert_with(|| {
                order.push(l.clone());
                members.push(Vec::new());
                order.len() - 1
            });
            members[k].push(i);
        }
        let p = self.dim();
        let groups = members
            .iter()
            .map(|idx| DMatrix::from_fn(idx.len(), p, |i, j| self.rows[idx[i]][j]))
            .collect();
        Ok((order, groups))
    }
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input(format!("--input {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| input(format!("--input {}: {e}", path.display())))?
        .clone();
    let group_col = headers.iter().position(|h| h == GROUP_COLUMN);
    let features: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != group_col)
        .map(|(_, h)| h.to_string())
        .collect();
    if features.is_empty() {
        return Err(input(format!("--input {}: no feature columns", path.display())));
    }
    let mut rows = Vec::new();
    let mut labels = group_col.map(|_| Vec::new());
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| input(format!("--input {} line {line}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(features.len());
        for (i, field) in record.iter().enumerate() {
            if Some(i) == group_col {
                if field.is_empty() {
                    return Err(input(format!("line {line}: missing value in column '{GROUP_COLUMN}'")));
                }
                labels.as_mut().expect("group column present").push(field.to_string());
                continue;
            }
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| input(format!("line {line}: column '{}' has invalid value '{field}'", headers[i].to_string())))?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(input(format!("--input {}: no data rows", path.display())));
    }
    Ok(Table { features, rows, labels })
}

/// Row-major CSV with 17 significant digits per entry.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Files to be written together once every one of them is ready.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    /// Stages every file in `dir` and renames them into place.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let io = |e: std::io::Error| CliError::Input(format!("--out-dir {}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, contents) in self.files {
            let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(&contents).map_err(io)?;
            tmp.as_file().sync_all().map_err(io)?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            tmp.persist(&target).map_err(|e| io(e.error))?;
            written.push(target);
        }
        Ok(written)
    }
}
