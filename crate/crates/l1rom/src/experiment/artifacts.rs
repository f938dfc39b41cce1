//! CSV/manifest emission and numeric run comparison.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ExperimentError;

/// A value in a CSV cell. Floats render with 17 significant digits so a
/// round trip through text is exact.
#[derive(Debug, Clone)]
pub enum CsvValue {
    Text(String),
    Int(i64),
    Num(f64),
}

impl CsvValue {
    fn render(&self) -> String {
        match self {
            CsvValue::Text(s) => s.clone(),
            CsvValue::Int(i) => i.to_string(),
            CsvValue::Num(v) => format!("{v:.16e}"),
        }
    }
}

impl From<&str> for CsvValue {
    fn from(s: &str) -> Self {
        CsvValue::Text(s.to_string())
    }
}

impl From<f64> for CsvValue {
    fn from(v: f64) -> Self {
        CsvValue::Num(v)
    }
}

impl From<usize> for CsvValue {
    fn from(v: usize) -> Self {
        CsvValue::Int(v as i64)
    }
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<CsvValue>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<CsvValue>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(CsvValue::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Write the tables plus a manifest listing every file with its content
/// hash, the echoed configuration and per-functional statuses.
pub fn write_run(
    out_dir: &Path,
    tables: &[(String, CsvTable)],
    config_echo: serde_json::Value,
    seed: u64,
    statuses: &BTreeMap<String, String>,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(out_dir)?;
    let mut files = BTreeMap::new();
    for (name, table) in tables {
        let body = table.render();
        fs::write(out_dir.join(name), &body)?;
        files.insert(name.clone(), sha256_hex(body.as_bytes()));
    }
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config_echo,
        "files": files,
        "statuses": statuses,
    });
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Per-cell tolerances for run comparison.
#[derive(Debug, Clone, Copy)]
pub struct DiffTolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for DiffTolerances {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiffReport {
    pub failures: Vec<String>,
    pub files_compared: usize,
}

impl DiffReport {
    pub fn passed(&self) -> bool {
        self.files_compared > 0 && self.failures.is_empty()
    }
}

/// Numeric comparison of every CSV in `reference_dir` against `run_dir`.
/// Cells that parse as numbers compare within tolerance, everything else
/// must match exactly; failures name file, row and column.
pub fn diff_against_reference(
    run_dir: &Path,
    reference_dir: &Path,
    tol: DiffTolerances,
) -> Result<DiffReport, ExperimentError> {
    let mut names: Vec<String> = fs::read_dir(reference_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut failures = Vec::new();
    for name in &names {
        let reference = fs::read_to_string(reference_dir.join(name))?;
        let run = match fs::read_to_string(run_dir.join(name)) {
            Ok(s) => s,
            Err(_) => {
                failures.push(format!("{name}: missing in run directory"));
                continue;
            }
        };
        diff_csv(name, &run, &reference, tol, &mut failures);
    }
    Ok(DiffReport {
        failures,
        files_compared: names.len(),
    })
}

fn diff_csv(name: &str, run: &str, reference: &str, tol: DiffTolerances, out: &mut Vec<String>) {
    let run_lines: Vec<&str> = run.lines().collect();
    let ref_lines: Vec<&str> = reference.lines().collect();
    if run_lines.len() != ref_lines.len() {
        out.push(format!(
            "{name}: {} rows vs {} in reference",
            run_lines.len(),
            ref_lines.len()
        ));
        return;
    }
    for (row, (a_line, b_line)) in run_lines.iter().zip(&ref_lines).enumerate() {
        let a_cells: Vec<&str> = a_line.split(',').collect();
        let b_cells: Vec<&str> = b_line.split(',').collect();
        if a_cells.len() != b_cells.len() {
            out.push(format!("{name}: row {row}: column count mismatch"));
            continue;
        }
        for (col, (a, b)) in a_cells.iter().zip(&b_cells).enumerate() {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    if (x - y).abs() > tol.abs + tol.rel * y.abs() {
                        out.push(format!("{name}: row {row}, col {col}: {x} vs {y}"));
                    }
                }
                _ => {
                    if a != b {
                        out.push(format!("{name}: row {row}, col {col}: '{a}' vs '{b}'"));
                    }
                }
            }
        }
    }
}
