//! Differences between two run directories.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::io::{IoError, Manifest, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum FileStatus {
    Identical,
    /// Same columns and row count; largest absolute difference per column.
    Differs { max_abs_diff: Vec<(String, f64)> },
    /// Different shape, or not a data table.
    Incomparable,
    OnlyA,
    OnlyB,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileComparison {
    pub path: String,
    #[serde(flatten)]
    pub status: FileStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunComparison {
    pub files: Vec<FileComparison>,
}

impl RunComparison {
    pub fn identical(&self) -> bool {
        self.files.iter().all(|f| f.status == FileStatus::Identical)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for f in &self.files {
            let detail = match &f.status {
                FileStatus::Identical => "identical".to_string(),
                FileStatus::Differs { max_abs_diff } => {
                    let cols: Vec<String> = max_abs_diff.iter().map(|(c, d)| format!("{c}={d:.3e}")).collect();
                    format!("differs  max|a-b|: {}", cols.join(" "))
                }
                FileStatus::Incomparable => "differs (not comparable)".into(),
                FileStatus::OnlyA => "only in A".into(),
                FileStatus::OnlyB => "only in B".into(),
            };
            s.push_str(&format!("{:<24} {detail}\n", f.path));
        }
        s
    }
}

fn table_diff(a: &Path, b: &Path) -> FileStatus {
    let (Ok(ta), Ok(tb)) = (Table::read(a), Table::read(b)) else { return FileStatus::Incomparable };
    if ta.columns != tb.columns || ta.rows.len() != tb.rows.len() {
        return FileStatus::Incomparable;
    }
    let max_abs_diff = ta
        .columns
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let d = ta.rows.iter().zip(&tb.rows).map(|(ra, rb)| (ra[k] - rb[k]).abs()).fold(0.0, f64::max);
            (c.clone(), d)
        })
        .collect();
    FileStatus::Differs { max_abs_diff }
}

/// Compares the manifests of two runs; differing data tables are compared
/// column by column.
pub fn compare_runs(a: &Path, b: &Path) -> Result<RunComparison, IoError> {
    let (ma, mb) = (Manifest::read(a)?, Manifest::read(b)?);
    let names: BTreeSet<&str> = ma.files.iter().chain(&mb.files).map(|f| f.path.as_str()).collect();
    let files = names
        .into_iter()
        .map(|name| {
            let fa = ma.files.iter().find(|f| f.path == name);
            let fb = mb.files.iter().find(|f| f.path == name);
            let status = match (fa, fb) {
                (Some(x), Some(y)) if x.sha256 == y.sha256 => FileStatus::Identical,
                (Some(_), Some(_)) if name.ends_with(".csv") || name.ends_with(".bin") => {
                    table_diff(&a.join(name), &b.join(name))
                }
                (Some(_), Some(_)) => FileStatus::Incomparable,
                (Some(_), None) => FileStatus::OnlyA,
                _ => FileStatus::OnlyB,
            };
            FileComparison { path: name.to_string(), status }
        })
        .collect();
    Ok(RunComparison { files })
}
