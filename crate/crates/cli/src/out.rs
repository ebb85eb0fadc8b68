//! Artifact writers and the file-facing report types. JSON is pretty
//! printed with a trailing newline and CSV floats use the shortest
//! round-trip form; nothing here emits a timestamp, so equal settings
//! produce byte-equal files.

use std::fmt::Write as _;
use std::path::Path;

use senscale::*;
use std::result::Result;
use serde::{Deserialize, Serialize};

use crate::pipeline::{Gates, PdfTable, PipelineOut};
use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid JSON in {}: {e}", path.display())))
}

pub fn si_csv(sens: &SensitivityResult) -> String {
    let mut s = String::from("name,s_total,ci_lo,ci_hi\n");
    for i in &sens.inputs {
        let _ = writeln!(s, "{},{},{},{}", i.name, i.s_total, i.ci[0], i.ci[1]);
    }
    s
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut s = String::from(
        "time,mean_full,std_full,mean_reduced,std_reduced,rel_err_mean,rel_err_std\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.time, r.mean_full, r.std_full, r.mean_reduced, r.std_reduced, r.rel_err_mean,
            r.rel_err_std
        );
    }
    s
}

pub fn pdf_csv(t: &PdfTable) -> String {
    let mut s = String::from("value,ecdf_full,ecdf_reduced,pdf_full,pdf_reduced\n");
    for i in 0..t.centers.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t.centers[i], t.ecdf_full[i], t.ecdf_reduced[i], t.pdf_full[i], t.pdf_reduced[i]
        );
    }
    s
}

#[derive(Serialize)]
pub struct Tests<'a> {
    /// Output time the two-sample tests were run at (the last one).
    pub time: f64,
    pub ks: &'a TestResult,
    pub levene: &'a TestResult,
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub config_hash: String,
    pub model: &'a str,
    pub n: usize,
    pub seed: u64,
    pub sensitivity: &'a SensitivityResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<&'a CouplingBoundReport>,
    pub plan: &'a ReductionPlan,
    pub series: &'a [SeriesRow],
    pub tests: Tests<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_check: Option<&'a BoundCheck>,
    pub gates: &'a Gates,
}

/// Writes the full validation artifact set into `dir`.
pub fn write_validation(
    dir: &Path,
    hash: String,
    model: &str,
    n: usize,
    seed: u64,
    res: &PipelineOut,
) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let last_time = res.series.last().map_or(0.0, |r| r.time);
    let tests = Tests { time: last_time, ks: &res.ks, levene: &res.levene };
    let report = Report {
        config_hash: hash,
        model,
        n,
        seed,
        sensitivity: &res.sensitivity,
        bounds: res.bounds.as_ref(),
        plan: &res.plan,
        series: &res.series,
        tests,
        bound_check: res.bound_check.as_ref(),
        gates: &res.gates,
    };
    write_json(&dir.join("report.json"), &report)?;
    write_json(
        &dir.join("tests.json"),
        &Tests { time: last_time, ks: &res.ks, levene: &res.levene },
    )?;
    write_text(&dir.join("series.csv"), &series_csv(&res.series))?;
    write_text(&dir.join("pdf_cdf.csv"), &pdf_csv(&res.pdf))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Read-back mirrors. The core result types serialize but do not
// deserialize, so files fed back in through --si / --bounds go through
// these and are rebuilt field by field.

#[derive(Deserialize)]
pub struct SiFile {
    pub inputs: Vec<SiInput>,
    pub variance: f64,
    pub mean: f64,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
pub struct SiInput {
    pub name: String,
    pub s_total: f64,
    pub ci: [f64; 2],
}

impl SiFile {
    pub fn into_result(self) -> SensitivityResult {
        SensitivityResult {
            inputs: self
                .inputs
                .into_iter()
                .map(|i| InputSensitivity { name: i.name, s_total: i.s_total, ci: i.ci })
                .collect(),
            variance: self.variance,
            mean: self.mean,
            n: self.n,
            seed: self.seed,
            warnings: self.warnings,
        }
    }
}

#[derive(Deserialize)]
pub struct BoundsFile {
    pub form: String,
    #[serde(default)]
    pub factor: Option<f64>,
    pub conditions: Vec<CondIn>,
    pub per_input: Vec<BoundIn>,
}

#[derive(Deserialize)]
pub struct CondIn {
    pub name: String,
    pub ok: bool,
    pub margin: f64,
}

#[derive(Deserialize)]
pub struct BoundIn {
    pub name: String,
    pub sf: f64,
    #[serde(default)]
    pub sg_upper: Option<f64>,
    #[serde(default)]
    pub sg_lower: Option<f64>,
    pub exact: bool,
}

impl BoundsFile {
    pub fn into_report(self) -> CouplingBoundReport {
        CouplingBoundReport {
            form: self.form,
            factor: self.factor,
            conditions: self
                .conditions
                .into_iter()
                .map(|c| Condition { name: c.name, ok: c.ok, margin: c.margin })
                .collect(),
            per_input: self
                .per_input
                .into_iter()
                .map(|b| InputBound {
                    name: b.name,
                    sf: b.sf,
                    sg_upper: b.sg_upper,
                    sg_lower: b.sg_lower,
                    exact: b.exact,
                })
                .collect(),
        }
    }
}
