//! Aggregation of study outcomes into `report.json`, `report.md` and one
//! `study_<name>.csv` per study.
//!
//! Outputs contain no wall-clock times or host information, so identical
//! inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Check, DecayStudy, EnergyStudy, KernelSuite, SphereWeightStudy, Status, TractionStudy, TruncationRun, TruncationStudy,
    WellPosednessStudy,
};
use crate::error::{Error, Result};
use crate::fit::DecayFit;

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| other(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| other(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn other(msg: String) -> Error {
    Error::Io(std::io::Error::other(msg))
}

/// Shortest representation that round-trips.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    /// File-name safe identifier, e.g. `truncation`.
    pub name: String,
    pub status: Status,
    pub checks: Vec<Check>,
    /// The full study result.
    pub data: Value,
    pub table: Table,
}

impl StudyOutcome {
    pub fn new<T: Serialize>(name: &str, status: Status, checks: &[Check], data: &T, table: Table) -> Result<Self> {
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::InvalidParameter(format!("study name {name:?} is not file-name safe")));
        }
        let data = serde_json::to_value(data).map_err(|e| other(e.to_string()))?;
        Ok(Self { name: name.into(), status, checks: checks.to_vec(), data, table })
    }

    pub fn failing_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn fit_table(fits: &[DecayFit]) -> Table {
    let mut t = Table::new(&["quantity", "sampling", "radius", "value", "fitted", "exponent", "fit_residual"]);
    for f in fits {
        for (&r, &v) in f.radii.iter().zip(&f.values) {
            t.push(vec![
                f.quantity.clone(),
                f.sampling.clone(),
                num(r),
                num(v),
                num(f.constant * r.powf(f.exponent)),
                num(f.exponent),
                num(f.residual),
            ]);
        }
    }
    t
}

pub fn kernels_outcome(s: &KernelSuite) -> Result<StudyOutcome> {
    let mut t = Table::new(&["check", "index", "x", "y", "z", "parameter", "error"]);
    for k in &s.samples {
        t.push(vec![
            k.check.clone(),
            k.index.to_string(),
            num(k.point[0]),
            num(k.point[1]),
            num(k.point[2]),
            num(k.parameter),
            num(k.error),
        ]);
    }
    StudyOutcome::new("kernels", s.status, &s.checks, s, t)
}

pub fn decay_outcome(s: &DecayStudy) -> Result<StudyOutcome> {
    StudyOutcome::new("decay", s.status, &s.checks, s, fit_table(&s.fits))
}

pub fn sphere_weight_outcome(s: &SphereWeightStudy) -> Result<StudyOutcome> {
    StudyOutcome::new("sphere_weight", s.status, &s.checks, s, fit_table(&s.fits))
}

pub fn traction_outcome(s: &TractionStudy) -> Result<StudyOutcome> {
    StudyOutcome::new("traction", s.status, &s.checks, s, fit_table(&s.fits))
}

pub fn energy_outcome(s: &EnergyStudy) -> Result<StudyOutcome> {
    let mut t = Table::new(&["sample", "residual_default", "residual_refined"]);
    for (i, r) in s.residuals.iter().enumerate() {
        t.push(vec![i.to_string(), num(r[0]), num(r[1])]);
    }
    StudyOutcome::new("energy", s.status, &s.checks, s, t)
}

pub fn wellposed_outcome(s: &WellPosednessStudy) -> Result<StudyOutcome> {
    let mut t = Table::new(&["level", "layers", "velocity_dofs", "pressure_dofs", "infsup"]);
    for r in &s.runs {
        t.push(vec![
            r.level.to_string(),
            r.layers.to_string(),
            r.estimate.velocity_dofs.to_string(),
            r.estimate.pressure_dofs.to_string(),
            num(r.estimate.value),
        ]);
    }
    StudyOutcome::new("infsup", s.status, &s.checks, s, t)
}

fn truncation_row(kind: &str, r: &TruncationRun) -> Vec<String> {
    vec![
        kind.into(),
        num(r.radius),
        r.angular_level.to_string(),
        r.layers.to_string(),
        r.velocity_dofs.to_string(),
        r.pressure_dofs.to_string(),
        num(r.error),
        num(r.reference_norm),
        crate::cli::config::solver_name(r.solver).into(),
        num(r.solver_residual),
        r.iterations.to_string(),
    ]
}

pub fn truncation_outcome(s: &TruncationStudy) -> Result<StudyOutcome> {
    let mut t = Table::new(&[
        "run",
        "radius",
        "angular_level",
        "layers",
        "velocity_dofs",
        "pressure_dofs",
        "error",
        "reference_norm",
        "solver",
        "solver_residual",
        "iterations",
    ]);
    for r in &s.runs {
        t.push(truncation_row("main", r));
    }
    for r in &s.control {
        t.push(truncation_row("control", r));
    }
    StudyOutcome::new("truncation", s.status, &s.checks, s, t)
}

/// Studies in insertion order. Names must be unique.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub studies: Vec<StudyOutcome>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: StudyOutcome) -> Result<()> {
        if self.studies.iter().any(|o| o.name == s.name) {
            return Err(Error::InvalidParameter(format!("duplicate study {}", s.name)));
        }
        self.studies.push(s);
        Ok(())
    }

    /// `Pass` iff every study passed; an empty report passes.
    pub fn status(&self) -> Status {
        if self.studies.iter().all(|s| s.status == Status::Pass) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    /// Names of the studies that did not pass.
    pub fn failing(&self) -> Vec<String> {
        self.studies.iter().filter(|s| s.status != Status::Pass).map(|s| s.name.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let studies: Vec<Value> = self
            .studies
            .iter()
            .map(|s| json!({ "name": s.name, "status": s.status, "checks": s.checks, "data": s.data }))
            .collect();
        let doc = json!({ "status": self.status(), "failing": self.failing(), "studies": studies });
        let mut out = serde_json::to_string_pretty(&doc).map_err(|e| other(e.to_string()))?;
        out.push('\n');
        Ok(out)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = format!("# Report\n\nOverall: **{}**\n", self.status().as_str());
        let failing = self.failing();
        if !failing.is_empty() {
            md.push_str(&format!("\nFailing: {}\n", failing.join(", ")));
        }
        if self.studies.is_empty() {
            md.push_str("\nNo studies.\n");
        }
        for s in &self.studies {
            md.push_str(&format!("\n## {}: {}\n\n| check | value | rule | result |\n|---|---|---|---|\n", s.name, s.status.as_str()));
            for c in &s.checks {
                md.push_str(&format!(
                    "| {} | {:.4e} | {} | {} |\n",
                    c.name,
                    c.value,
                    c.rule,
                    if c.passed { "pass" } else { "FAIL" }
                ));
            }
            md.push_str(&format!("\nTable: `study_{}.csv` ({} rows)\n", s.name, s.table.rows.len()));
        }
        md
    }

    /// Writes all files into `dir`, each through a rename so a rerun never
    /// leaves a partial file. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| other(format!("{}: {e}", dir.display())))?;
        let mut paths = Vec::new();
        for s in &self.studies {
            paths.push(write_atomic(&dir.join(format!("study_{}.csv", s.name)), &s.table.to_csv()?)?);
        }
        paths.push(write_atomic(&dir.join("report.json"), &self.to_json()?)?);
        paths.push(write_atomic(&dir.join("report.md"), &self.to_markdown())?);
        Ok(paths)
    }
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let name = path.file_name().ok_or_else(|| other(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let io = |e: std::io::Error| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())));
    fs::write(&tmp, contents.as_ref()).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })?;
    Ok(path.to_path_buf())
}
