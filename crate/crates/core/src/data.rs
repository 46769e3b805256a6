//! Dataset ingestion, column standardization and the back-transform of
//! fitted coefficients to the original predictor scale.
//!
//! Columns are scaled with the population convention `||x_j||^2 / n = 1`.
//! The gaussian response is centered (not scaled), so the intercept on the
//! standardized scale is simply the response mean. GLM responses are left
//! untouched and the solver fits an explicit intercept.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, mean, Matrix};
use crate::path::{CoefPath, Scale};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
    Poisson,
}

impl Family {
    pub fn is_glm(self) -> bool {
        !matches!(self, Family::Gaussian)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" | "logistic" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

/// A validated regression problem on the original scale.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub family: Family,
    /// One identifier per column, `1..=G`, in contiguous runs.
    pub groups: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, family: Family, groups: Option<Vec<usize>>) -> Result<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        if n < 2 {
            return Err(Error::DimensionMismatch(format!("need at least 2 observations, got {n}")));
        }
        if p < 1 {
            return Err(Error::DimensionMismatch("design has no columns".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x has {n} rows but y has {} entries",
                y.len()
            )));
        }
        for j in 0..p {
            if let Some(i) = x.col(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite x at row {}, column {}", i + 1, j + 1)));
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidResponse(format!("non-finite y at row {}", i + 1)));
        }
        match family {
            Family::Gaussian => {}
            Family::Binomial => {
                if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::InvalidResponse(format!(
                        "binomial y must be 0 or 1, found {} at row {}",
                        y[i],
                        i + 1
                    )));
                }
            }
            Family::Poisson => {
                if let Some(i) = y.iter().position(|&v| v < 0.0 || v.fract() != 0.0) {
                    return Err(Error::InvalidResponse(format!(
                        "poisson y must be a nonnegative integer, found {} at row {}",
                        y[i],
                        i + 1
                    )));
                }
            }
        }
        if let Some(g) = &groups {
            validate_groups(g, p)?;
        }
        Ok(Dataset { x, y, family, groups })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            family: self.family,
            groups: self.groups.clone(),
        }
    }

    /// Contiguous column ranges, one per group. `None` when ungrouped.
    pub fn group_ranges(&self) -> Option<Vec<std::ops::Range<usize>>> {
        self.groups.as_deref().map(group_ranges)
    }
}

fn validate_groups(groups: &[usize], p: usize) -> Result<()> {
    if groups.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "group file has {} entries but x has {p} columns",
            groups.len()
        )));
    }
    let mut expected = 1usize;
    for (j, &g) in groups.iter().enumerate() {
        if j == 0 {
            if g != 1 {
                return Err(Error::InvalidGroups(format!("group labels must start at 1, found {g}")));
            }
            continue;
        }
        let prev = groups[j - 1];
        if g == prev {
            continue;
        }
        expected += 1;
        if g < prev {
            return Err(Error::InvalidGroups(format!(
                "group {g} reappears at column {} after group {prev}; groups must be contiguous",
                j + 1
            )));
        }
        if g != expected {
            return Err(Error::InvalidGroups(format!(
                "group labels must be consecutive; expected {expected} at column {}, found {g}",
                j + 1
            )));
        }
    }
    Ok(())
}

/// Contiguous column ranges of validated group labels.
pub fn group_ranges(groups: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..=groups.len() {
        if j == groups.len() || groups[j] != groups[start] {
            out.push(start..j);
            start = j;
        }
    }
    out
}

/// Read a headerless (or `header = true`) numeric CSV into rows.
pub fn read_numeric_csv(path: &Path, header: bool) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut rows = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row_no = i + 1 + usize::from(header);
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row: row_no,
                column: c + 1,
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "{}: row {row_no} has {} fields, expected {w}",
                    path.display(),
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Load `x`, `y` and an optional group file into a validated [`Dataset`].
pub fn load_dataset(
    x_path: &Path,
    y_path: &Path,
    family: Family,
    group_path: Option<&Path>,
    header: bool,
) -> Result<Dataset> {
    let rows = read_numeric_csv(x_path, header)?;
    if rows.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} has no rows", x_path.display())));
    }
    let x = Matrix::from_rows(&rows);
    let y = read_single_column(y_path, header)?;
    let groups = match group_path {
        Some(gp) => {
            let raw = read_single_column(gp, header)?;
            let mut g = Vec::with_capacity(raw.len());
            for (i, v) in raw.into_iter().enumerate() {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::InvalidGroups(format!(
                        "group label {v} on line {} is not a positive integer",
                        i + 1
                    )));
                }
                g.push(v as usize);
            }
            Some(g)
        }
        None => None,
    };
    let d = Dataset::new(x, y, family, groups)?;
    log::info!("loaded dataset: n = {}, p = {}", d.n(), d.p());
    Ok(d)
}

fn read_single_column(path: &Path, header: bool) -> Result<Vec<f64>> {
    let rows = read_numeric_csv(path, header)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() == 1 {
                Ok(r[0])
            } else {
                Err(Error::DimensionMismatch(format!(
                    "{}: row {} has {} fields, expected 1",
                    path.display(),
                    i + 1,
                    r.len()
                )))
            }
        })
        .collect()
}

/// Centered and scaled design plus what is needed to undo it.
#[derive(Clone, Debug)]
pub struct StandardizedDesign {
    pub xs: Matrix,
    pub col_center: Vec<f64>,
    pub col_scale: Vec<f64>,
    pub constant: Vec<bool>,
    /// Response as seen by the solver: centered for gaussian, raw otherwise.
    pub y: Vec<f64>,
    pub y_center: f64,
    pub family: Family,
}

impl StandardizedDesign {
    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    pub fn p(&self) -> usize {
        self.xs.ncols()
    }

    /// Indices of non-constant columns, ascending.
    pub fn usable_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.constant[j]).collect()
    }
}

const CONSTANT_SCALE: f64 = 1e-10;
const FIXED_POINT: f64 = 1e-12;

pub fn standardize(d: &Dataset) -> StandardizedDesign {
    let (n, p) = (d.n(), d.p());
    let nf = n as f64;
    let mut xs = Matrix::zeros(n, p);
    let mut col_center = vec![0.0; p];
    let mut col_scale = vec![1.0; p];
    let mut constant = vec![false; p];
    for j in 0..p {
        let col = d.x.col(j);
        let mut m = mean(col);
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        let mut s = (ss / nf).sqrt();
        if s <= CONSTANT_SCALE * m.abs().max(1.0) {
            log::warn!("column {} is constant; its coefficient is pinned to zero", j + 1);
            constant[j] = true;
            col_center[j] = m;
            col_scale[j] = 1.0;
            continue;
        }
        // already standardized: keep it bit-for-bit
        if m.abs() < FIXED_POINT && (s - 1.0).abs() < FIXED_POINT {
            m = 0.0;
            s = 1.0;
        }
        col_center[j] = m;
        col_scale[j] = s;
        for (dst, &v) in xs.col_mut(j).iter_mut().zip(col) {
            *dst = (v - m) / s;
        }
    }
    let (y, y_center) = match d.family {
        Family::Gaussian => {
            let m = mean(&d.y);
            (d.y.iter().map(|v| v - m).collect(), m)
        }
        _ => (d.y.clone(), 0.0),
    };
    StandardizedDesign {
        xs,
        col_center,
        col_scale,
        constant,
        y,
        y_center,
        family: d.family,
    }
}

/// Map a standardized-scale path to the original predictor scale.
pub fn unstandardize(path: &CoefPath, sd: &StandardizedDesign) -> Result<CoefPath> {
    if path.scale != Scale::Standardized {
        return Err(Error::InvalidArgument("path is already on the original scale".into()));
    }
    if path.p() != sd.p() {
        return Err(Error::DimensionMismatch(format!(
            "path has {} coefficients, design has {} columns",
            path.p(),
            sd.p()
        )));
    }
    let mut out = path.clone();
    for (beta, b0) in out.beta.iter_mut().zip(out.intercept.iter_mut()) {
        let mut shift = 0.0;
        for j in 0..beta.len() {
            if sd.constant[j] {
                beta[j] = 0.0;
                continue;
            }
            beta[j] /= sd.col_scale[j];
            shift += sd.col_center[j] * beta[j];
        }
        *b0 -= shift;
    }
    out.scale = Scale::Original;
    Ok(out)
}

/// Linear predictor `b0 + x * beta` for every row of `x`.
pub fn linear_predictor(x: &Matrix, beta: &[f64], intercept: f64) -> Vec<f64> {
    let mut eta = x.mul_vec(beta);
    for e in &mut eta {
        *e += intercept;
    }
    eta
}

/// `x_j' r / n` for every column.
pub fn correlations(x: &Matrix, r: &[f64]) -> Vec<f64> {
    let n = x.nrows() as f64;
    (0..x.ncols()).map(|j| dot(x.col(j), r) / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_small_binomial_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let x = write(&dir, "x.csv", "1,2\n3,4\n5,6\n");
        let y = write(&dir, "y.csv", "1\n0\n1\n");
        let d = load_dataset(&x, &y, Family::Binomial, None, false).unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.x.row(1), vec![3.0, 4.0]);
    }

    #[test]
    fn header_row_is_skipped_on_request() {
        let dir = tempfile::tempdir().unwrap();
        let x = write(&dir, "x.csv", "a,b\n1,2e0\n3,4.5E-1\n");
        let y = write(&dir, "y.csv", "y\n1.5\n-2\n");
        let d = load_dataset(&x, &y, Family::Gaussian, None, true).unwrap();
        assert_eq!(d.x.row(1), vec![3.0, 0.45]);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let x = write(&dir, "x.csv", "1,2\n3,4\n5,6\n");
        let y = write(&dir, "y.csv", "1\n0\n1\n0\n");
        let err = load_dataset(&x, &y, Family::Gaussian, None, false).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)), "{err}");
    }

    #[test]
    fn non_numeric_cell_is_reported_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let x = write(&dir, "x.csv", "1,2\n3,abc\n");
        let y = write(&dir, "y.csv", "1\n0\n");
        match load_dataset(&x, &y, Family::Gaussian, None, false).unwrap_err() {
            Error::NonNumeric { row, column, .. } => assert_eq!((row, column), (2, 2)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn binomial_labels_must_be_binary() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let err = Dataset::new(x, vec![0.0, 2.0, 1.0], Family::Binomial, None).unwrap_err();
        assert!(matches!(err, Error::InvalidResponse(_)));
    }

    #[test]
    fn poisson_counts_must_be_nonnegative_integers() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        assert!(Dataset::new(x.clone(), vec![0.0, 1.5], Family::Poisson, None).is_err());
        assert!(Dataset::new(x, vec![0.0, 3.0], Family::Poisson, None).is_ok());
    }

    #[test]
    fn group_file_defines_contiguous_groups() {
        let dir = tempfile::tempdir().unwrap();
        let x = write(&dir, "x.csv", "1,2,3,4\n5,6,7,9\n");
        let y = write(&dir, "y.csv", "1\n0\n");
        let g = write(&dir, "g.csv", "1\n1\n2\n2\n");
        let d = load_dataset(&x, &y, Family::Gaussian, Some(&g), false).unwrap();
        assert_eq!(d.group_ranges().unwrap(), vec![0..2, 2..4]);
    }

    #[test]
    fn non_contiguous_groups_are_rejected() {
        let x = Matrix::zeros(3, 3);
        let e = Dataset::new(x.clone(), vec![1.0, 2.0, 3.0], Family::Gaussian, Some(vec![1, 2, 1])).unwrap_err();
        assert!(matches!(e, Error::InvalidGroups(_)));
        let e = Dataset::new(x.clone(), vec![1.0, 2.0, 3.0], Family::Gaussian, Some(vec![1, 3, 3])).unwrap_err();
        assert!(matches!(e, Error::InvalidGroups(_)));
        let e = Dataset::new(x, vec![1.0, 2.0, 3.0], Family::Gaussian, Some(vec![1, 1])).unwrap_err();
        assert!(matches!(e, Error::DimensionMismatch(_)));
    }

    #[test]
    fn standardized_column_has_zero_mean_and_unit_scale() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let d = Dataset::new(x, vec![0.0, 1.0, 2.0], Family::Gaussian, None).unwrap();
        let sd = standardize(&d);
        let c = sd.xs.col(0);
        // centered (-1, 0, 1) divided by sqrt(2/3)
        let s = (2.0f64 / 3.0).sqrt();
        for (v, e) in c.iter().zip([-1.0 / s, 0.0, 1.0 / s]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(mean(c).abs() < 1e-10);
        assert!((dot(c, c) / 3.0 - 1.0).abs() < 1e-10);
        assert_eq!(sd.y, vec![-1.0, 0.0, 1.0]);
        assert_eq!(sd.y_center, 1.0);
    }

    #[test]
    fn standardize_is_a_fixed_point_on_its_output() {
        let x = Matrix::from_rows(&[vec![1.0, 0.3], vec![2.0, -1.0], vec![7.0, 2.5], vec![-3.0, 0.0]]);
        let d = Dataset::new(x, vec![1.0, 2.0, 3.0, 4.0], Family::Gaussian, None).unwrap();
        let once = standardize(&d);
        let d2 = Dataset::new(once.xs.clone(), d.y.clone(), Family::Gaussian, None).unwrap();
        let twice = standardize(&d2);
        assert_eq!(twice.xs, once.xs);
        assert_eq!(twice.col_scale, vec![1.0, 1.0]);
        assert_eq!(twice.col_center, vec![0.0, 0.0]);
    }

    #[test]
    fn constant_column_is_flagged_not_fatal() {
        let x = Matrix::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0]]);
        let d = Dataset::new(x, vec![0.0, 1.0, 2.0], Family::Gaussian, None).unwrap();
        let sd = standardize(&d);
        assert_eq!(sd.constant, vec![true, false]);
        assert!(sd.xs.col(0).iter().all(|&v| v == 0.0));
        assert_eq!(sd.usable_columns(), vec![1]);
    }
}
