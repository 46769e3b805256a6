//! CSV and JSON artifacts written by the command-line tool.
//!
//! CSV outputs contain no timings so that identical runs produce identical
//! bytes; wall times live only in the JSON summaries. Floats are written
//! with 17 significant digits and indices are 1-based.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cli::BenchOutcome;
use crate::cv::CVResult;
use crate::error::{Error, Result};
use crate::path::CoefPath;
use crate::sim::{ExperimentSummary, ReplicateStats};

/// Version of the JSON summary layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Full-precision float formatting.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt_bool(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "true",
        Some(false) => "false",
        None => "NA",
    }
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// `<prefix>_<suffix>`, or `<prefix>/<suffix>` when the prefix is a directory.
pub fn output_path(prefix: &Path, suffix: &str) -> PathBuf {
    if prefix.is_dir() {
        return prefix.join(suffix);
    }
    let mut s = prefix.as_os_str().to_os_string();
    s.push("_");
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows<W: Write>(w: W, path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        wtr.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Coefficient path: `lambda, intercept, x1..xp`, one row per lambda.
pub fn write_path_csv<W: Write>(w: W, path: &CoefPath, names: &[String]) -> Result<()> {
    let mut header = vec!["lambda".to_string(), "intercept".to_string()];
    header.extend(names.iter().cloned());
    let rows = (0..path.len()).map(|k| {
        let mut row = Vec::with_capacity(path.p() + 2);
        row.push(fmt_f64(path.lambdas[k]));
        row.push(fmt_f64(path.intercept[k]));
        row.extend(path.beta[k].iter().map(|b| fmt_f64(*b)));
        row
    });
    write_rows(w, Path::new("path"), &header, rows)
}

/// Long-format grouped path: `lambda_index, lambda, variable, group_id,
/// coefficient`, one row per lambda and variable.
pub fn write_group_path_csv<W: Write>(w: W, path: &CoefPath, group_ids: &[usize], names: &[String]) -> Result<()> {
    let header: Vec<String> = ["lambda_index", "lambda", "variable", "group_id", "coefficient"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = (0..path.len()).flat_map(|k| {
        (0..path.p()).map(move |j| {
            vec![
                (k + 1).to_string(),
                fmt_f64(path.lambdas[k]),
                names[j].clone(),
                group_ids[j].to_string(),
                fmt_f64(path.beta[k][j]),
            ]
        })
    });
    write_rows(w, Path::new("group path"), &header, rows)
}

/// Strong-rule violations: `lambda_index, lambda, n_violations,
/// locally_convex, indices` with indices joined by semicolons.
pub fn write_violations_csv<W: Write>(w: W, path: &CoefPath) -> Result<()> {
    let header: Vec<String> = ["lambda_index", "lambda", "n_violations", "locally_convex", "indices"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = path.violations.records.iter().map(|r| {
        let idx: Vec<String> = r.indices.iter().map(|i| (i + 1).to_string()).collect();
        vec![
            (r.lambda_index + 1).to_string(),
            fmt_f64(r.lambda),
            r.count().to_string(),
            fmt_opt_bool(r.locally_convex).to_string(),
            idx.join(";"),
        ]
    });
    write_rows(w, Path::new("violations"), &header, rows)
}

/// Cross-validation curve: `lambda, mean_deviance, se, n_nonzero`.
pub fn write_cv_csv<W: Write>(w: W, cv: &CVResult) -> Result<()> {
    let header: Vec<String> = ["lambda", "mean_deviance", "se", "n_nonzero"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = (0..cv.lambdas.len()).map(|l| {
        vec![
            fmt_f64(cv.lambdas[l]),
            fmt_f64(cv.mean_deviance[l]),
            fmt_f64(cv.se[l]),
            cv.n_nonzero[l].to_string(),
        ]
    });
    write_rows(w, Path::new("cv"), &header, rows)
}

/// One row per experiment, mirroring the strong-rule simulation tables.
pub fn write_simulation_csv<W: Write>(w: W, summaries: &[ExperimentSummary]) -> Result<()> {
    let header: Vec<String> = [
        "model",
        "method",
        "rho",
        "replicates",
        "eliminated",
        "violated_lambdas",
        "violated_variables",
        "violated_lambdas_convex",
        "mean_strong_size",
        "mean_active_size",
        "failed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = summaries.iter().map(|s| {
        vec![
            s.model.clone(),
            s.method.clone(),
            fmt_f64(s.rho),
            s.replicates.to_string(),
            fmt_f64(s.eliminated),
            fmt_f64(s.violated_lambdas),
            fmt_f64(s.violated_variables),
            s.violated_lambdas_convex.map_or("NA".into(), fmt_f64),
            fmt_f64(s.mean_strong_size),
            fmt_f64(s.mean_active_size),
            s.failed.to_string(),
        ]
    });
    write_rows(w, Path::new("simulation"), &header, rows)
}

/// Per-replicate statistics of one experiment.
pub fn write_replicates_csv<W: Write>(w: W, details: &[ReplicateStats]) -> Result<()> {
    let header: Vec<String> = [
        "replicate",
        "eliminated",
        "violated_lambdas",
        "violated_variables",
        "violated_lambdas_convex",
        "mean_strong_size",
        "mean_active_size",
        "path_length",
        "failure",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = details.iter().map(|d| {
        vec![
            (d.replicate + 1).to_string(),
            fmt_f64(d.eliminated),
            d.violated_lambdas.to_string(),
            d.violated_variables.to_string(),
            d.violated_lambdas_convex.map_or("NA".into(), |c| c.to_string()),
            fmt_f64(d.mean_strong_size),
            fmt_f64(d.mean_active_size),
            d.path_length.to_string(),
            d.failure.clone().unwrap_or_default(),
        ]
    });
    write_rows(w, Path::new("replicates"), &header, rows)
}

/// Path-equality report of a benchmark: `strategy, max_deviation,
/// path_length, passed`.
pub fn write_equality_csv<W: Write>(w: W, outcome: &BenchOutcome) -> Result<()> {
    let header: Vec<String> = ["strategy", "max_deviation", "path_length", "passed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = outcome.strategies.iter().map(|t| {
        vec![
            t.strategy.to_string(),
            fmt_f64(t.max_deviation),
            t.path_length.to_string(),
            (t.max_deviation <= outcome.equality_tol).to_string(),
        ]
    });
    write_rows(w, Path::new("equality"), &header, rows)
}

/// Write a CSV artifact to `path` with one of the writers above.
pub fn to_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    let w = create(path)?;
    f(w).map_err(|e| match e {
        Error::Csv { message, .. } => Error::Csv {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io(e.into()))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

/// Per-lambda diagnostics of a fit, as written to the JSON summary.
#[derive(Clone, Debug, Serialize)]
pub struct PathSummary {
    pub lambda_max: f64,
    pub lambda_star: Option<f64>,
    pub kkt_tol: f64,
    pub path_length: usize,
    pub strong_size: Vec<usize>,
    pub active_size: Vec<usize>,
    pub target_size: Vec<usize>,
    pub iterations: Vec<usize>,
    pub inner_violations: Vec<usize>,
    /// `None` where convexity is undefined (groups) or untracked.
    pub locally_convex: Vec<Option<bool>>,
    pub violated_lambdas: usize,
    pub violated_variables: usize,
    pub failure: Option<String>,
}

impl PathSummary {
    pub fn new(path: &CoefPath) -> Self {
        PathSummary {
            lambda_max: path.lambda_max,
            lambda_star: path.lambda_star,
            kkt_tol: path.kkt_tol,
            path_length: path.len(),
            strong_size: path.strong_size.clone(),
            active_size: path.active_size.clone(),
            target_size: path.target_size.clone(),
            iterations: path.iterations.clone(),
            inner_violations: path.inner_violations.clone(),
            locally_convex: path.convexity.iter().map(|c| c.map(|c| c.locally_convex)).collect(),
            violated_lambdas: path.violations.violated_lambdas(),
            violated_variables: path.violations.violated_variables(),
            failure: path.failure.as_ref().map(|f| f.message.clone()),
        }
    }
}

/// Machine-readable error report.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub error: &'static str,
    pub message: String,
}

impl ErrorReport {
    pub fn new(e: &Error) -> Self {
        ErrorReport {
            schema_version: SCHEMA_VERSION,
            error: e.kind(),
            message: e.to_string(),
        }
    }
}
