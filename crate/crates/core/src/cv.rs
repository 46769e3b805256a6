//! Lambda grids and k-fold cross-validation.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{linear_predictor, standardize, unstandardize, Dataset, Family, StandardizedDesign};
use crate::error::{Error, Result};
use crate::group::{fit_group_path, group_lambda_max};
use crate::path::{fit_path, CoefPath, PathOptions, Strategy};
use crate::penalty::PenaltySpec;
use crate::screening::lambda_max;
use crate::solver::softplus;

/// Log-equispaced decreasing lambda values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaPath {
    pub values: Vec<f64>,
    pub min_ratio: f64,
}

impl LambdaPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }
}

/// `m` values from `lmax` down to `min_ratio * lmax`, equally spaced on the
/// log scale.
pub fn lambda_sequence(lmax: f64, min_ratio: f64, m: usize) -> Result<LambdaPath> {
    if !(lmax.is_finite() && lmax > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda_max must be positive, got {lmax}")));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("min_ratio must lie in (0, 1), got {min_ratio}")));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 lambda values, got {m}")));
    }
    let step = min_ratio.ln() / (m - 1) as f64;
    let mut values: Vec<f64> = (0..m).map(|k| lmax * (step * k as f64).exp()).collect();
    values[0] = lmax;
    values[m - 1] = lmax * min_ratio;
    Ok(LambdaPath { values, min_ratio })
}

/// Smallest lambda with an all-zero solution, grouped or not.
pub fn data_lambda_max(sd: &StandardizedDesign, groups: Option<&[Range<usize>]>, spec: &PenaltySpec) -> Result<f64> {
    if spec.is_group() {
        let groups = groups.ok_or_else(|| Error::InvalidGroups("group penalties need a group assignment".into()))?;
        group_lambda_max(sd, groups, spec)
    } else {
        lambda_max(sd, spec)
    }
}

/// Fit a grouped or ungrouped path, as the penalty requires.
pub fn fit_any(
    sd: &StandardizedDesign,
    groups: Option<&[Range<usize>]>,
    spec: &PenaltySpec,
    lambdas: &[f64],
    strategy: Strategy,
    options: &PathOptions,
) -> Result<CoefPath> {
    if spec.is_group() {
        let groups = groups.ok_or_else(|| Error::InvalidGroups("group penalties need a group assignment".into()))?;
        fit_group_path(sd, groups, spec, lambdas, strategy, options)
    } else {
        fit_path(sd, spec, lambdas, strategy, options)
    }
}

/// How observations are split into folds.
#[derive(Clone, Debug, PartialEq)]
pub enum Folds {
    /// `k` random folds; binomial responses are stratified by class.
    Random { k: usize, seed: u64 },
    /// Fold id `0..k` for every observation.
    Explicit(Vec<usize>),
}

/// Fold id per observation.
pub fn assign_folds(y: &[f64], family: Family, folds: &Folds) -> Result<(Vec<usize>, usize)> {
    let n = y.len();
    match folds {
        Folds::Random { k, seed } => {
            let k = *k;
            if k < 2 || k > n {
                return Err(Error::InvalidArgument(format!("need 2 <= folds <= n = {n}, got {k}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut order: Vec<usize> = Vec::with_capacity(n);
            if family == Family::Binomial {
                for class in [0.0, 1.0] {
                    let mut idx: Vec<usize> = (0..n).filter(|&i| y[i] == class).collect();
                    idx.shuffle(&mut rng);
                    order.extend(idx);
                }
            } else {
                order.extend(0..n);
                order.shuffle(&mut rng);
            }
            let mut ids = vec![0; n];
            for (pos, &i) in order.iter().enumerate() {
                ids[i] = pos % k;
            }
            Ok((ids, k))
        }
        Folds::Explicit(ids) => {
            if ids.len() != n {
                return Err(Error::DimensionMismatch(format!("{} fold ids for {n} observations", ids.len())));
            }
            let k = ids.iter().max().map_or(0, |m| m + 1);
            if k < 2 {
                return Err(Error::InvalidArgument("explicit folds need at least 2 distinct ids".into()));
            }
            if let Some(f) = (0..k).find(|f| !ids.contains(f)) {
                return Err(Error::InvalidArgument(format!("fold {f} is empty")));
            }
            Ok((ids.clone(), k))
        }
    }
}

/// Deviance contribution of one observation at linear predictor `eta`.
pub fn deviance(y: f64, eta: f64, family: Family) -> f64 {
    match family {
        Family::Gaussian => (y - eta) * (y - eta),
        Family::Binomial => 2.0 * (softplus(eta) - y * eta),
        Family::Poisson => {
            let mu = eta.exp();
            let ylog = if y > 0.0 { y * (y / mu).ln() } else { 0.0 };
            2.0 * (ylog - (y - mu))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CVResult {
    pub lambdas: Vec<f64>,
    pub mean_deviance: Vec<f64>,
    pub se: Vec<f64>,
    /// Nonzero coefficients of the full-data fit at each lambda.
    pub n_nonzero: Vec<usize>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    /// Largest lambda within one standard error of the minimum.
    pub one_se_index: usize,
    pub folds: Vec<usize>,
    pub k: usize,
}

impl CVResult {
    pub fn selected(&self, one_se: bool) -> (usize, f64) {
        let i = if one_se { self.one_se_index } else { self.selected_index };
        (i, self.lambdas[i])
    }
}

/// k-fold cross-validation of a path over a fixed lambda grid.
///
/// Every fold is standardized and fitted on its own training rows with the
/// shared grid; held-out deviance is averaged per observation. Lambda
/// values a fold could not reach (truncated path) contribute NaN and are
/// skipped by the selection.
pub fn cross_validate(
    data: &Dataset,
    spec: &PenaltySpec,
    lambdas: &[f64],
    strategy: Strategy,
    folds: &Folds,
    options: &PathOptions,
) -> Result<(CVResult, CoefPath)> {
    let n = data.n();
    let m = lambdas.len();
    let (ids, k) = assign_folds(&data.y, data.family, folds)?;
    let groups = data.group_ranges();

    let full_sd = standardize(data);
    let full = fit_any(&full_sd, groups.as_deref(), spec, lambdas, strategy, options)?;

    let per_fold: Vec<Result<Vec<(usize, Vec<f64>)>>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| ids[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| ids[i] == f).collect();
            let td = data.select_rows(&train);
            check_training(&td, f)?;
            let sd = standardize(&td);
            if sd.constant.iter().all(|c| *c) {
                return Err(Error::DegenerateFold {
                    fold: f,
                    reason: "every column is constant in the training rows".into(),
                });
            }
            let path = fit_any(&sd, groups.as_deref(), spec, lambdas, strategy, options)?;
            let orig = unstandardize(&path, &sd)?;
            let xt = data.x.select_rows(&test);
            let mut rows: Vec<(usize, Vec<f64>)> = test.iter().map(|&i| (i, vec![f64::NAN; m])).collect();
            for l in 0..orig.len() {
                let eta = linear_predictor(&xt, &orig.beta[l], orig.intercept[l]);
                for (r, e) in rows.iter_mut().zip(&eta) {
                    r.1[l] = deviance(data.y[r.0], *e, data.family);
                }
            }
            Ok(rows)
        })
        .collect();

    let mut dev = vec![vec![f64::NAN; m]; n];
    for fold in per_fold {
        for (i, row) in fold? {
            dev[i] = row;
        }
    }
    let nf = n as f64;
    let mut mean_deviance = vec![0.0; m];
    let mut se = vec![0.0; m];
    for l in 0..m {
        let mu = dev.iter().map(|d| d[l]).sum::<f64>() / nf;
        let var = dev.iter().map(|d| (d[l] - mu) * (d[l] - mu)).sum::<f64>() / (nf - 1.0);
        mean_deviance[l] = mu;
        se[l] = (var / nf).sqrt();
    }
    let selected_index = (0..m)
        .filter(|&l| mean_deviance[l].is_finite())
        .min_by(|&a, &b| mean_deviance[a].total_cmp(&mean_deviance[b]))
        .ok_or_else(|| Error::DegenerateFold {
            fold: 0,
            reason: "no lambda value was reached by every fold".into(),
        })?;
    let bound = mean_deviance[selected_index] + se[selected_index];
    let one_se_index = (0..=selected_index)
        .find(|&l| mean_deviance[l].is_finite() && mean_deviance[l] <= bound)
        .unwrap_or(selected_index);
    let n_nonzero = (0..m)
        .map(|l| if l < full.len() { full.nonzero(l) } else { 0 })
        .collect();
    Ok((
        CVResult {
            lambdas: lambdas.to_vec(),
            mean_deviance,
            se,
            n_nonzero,
            selected_index,
            selected_lambda: lambdas[selected_index],
            one_se_index,
            folds: ids,
            k,
        },
        full,
    ))
}

fn check_training(td: &Dataset, fold: usize) -> Result<()> {
    let ybar = td.y.iter().sum::<f64>() / td.n() as f64;
    match td.family {
        Family::Binomial if ybar <= 0.0 || ybar >= 1.0 => Err(Error::DegenerateFold {
            fold,
            reason: "training rows contain a single class".into(),
        }),
        Family::Poisson if ybar <= 0.0 => Err(Error::DegenerateFold {
            fold,
            reason: "training response is identically zero".into(),
        }),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn sequence_examples() {
        let p = lambda_sequence(1.0, 0.01, 3).unwrap();
        assert_eq!(p.values[0], 1.0);
        assert!((p.values[1] - 0.1).abs() < 1e-15);
        assert_eq!(p.values[2], 0.01);
        let p = lambda_sequence(2.0, 0.05, 2).unwrap();
        assert_eq!(p.values, vec![2.0, 0.1]);
        assert_eq!(lambda_sequence(1.0, 0.05, 100).unwrap().len(), 100);
        assert!(lambda_sequence(1.0, 1.0, 10).is_err());
        assert!(lambda_sequence(1.0, 0.5, 1).is_err());
        assert!(lambda_sequence(0.0, 0.5, 10).is_err());
    }

    #[test]
    fn random_folds_are_balanced_and_deterministic() {
        let y: Vec<f64> = (0..23).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let (a, k) = assign_folds(&y, Family::Binomial, &Folds::Random { k: 5, seed: 9 }).unwrap();
        let (b, _) = assign_folds(&y, Family::Binomial, &Folds::Random { k: 5, seed: 9 }).unwrap();
        assert_eq!(a, b);
        let sizes: Vec<usize> = (0..k).map(|f| a.iter().filter(|&&i| i == f).count()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let ones: Vec<usize> = (0..k)
            .map(|f| (0..23).filter(|&i| a[i] == f && y[i] == 1.0).count())
            .collect();
        assert!(ones.iter().max().unwrap() - ones.iter().min().unwrap() <= 1);
    }

    #[test]
    fn explicit_folds_are_validated() {
        let y = vec![0.0; 4];
        assert!(assign_folds(&y, Family::Gaussian, &Folds::Explicit(vec![0, 0, 2, 2])).is_err());
        assert!(assign_folds(&y, Family::Gaussian, &Folds::Explicit(vec![0, 0, 0, 0])).is_err());
        assert_eq!(
            assign_folds(&y, Family::Gaussian, &Folds::Explicit(vec![0, 1, 0, 1])).unwrap().1,
            2
        );
        assert!(assign_folds(&y, Family::Gaussian, &Folds::Random { k: 5, seed: 1 }).is_err());
    }

    #[test]
    fn deviance_is_zero_at_perfect_fit() {
        assert_eq!(deviance(2.0, 2.0, Family::Gaussian), 0.0);
        assert!(deviance(3.0, 3f64.ln(), Family::Poisson).abs() < 1e-14);
        assert!((deviance(1.0, 0.0, Family::Binomial) - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_rows_split_by_copy_match_training_deviance() {
        let base = [[0.3, 1.0], [1.2, -0.7], [-0.4, 0.2], [2.0, 0.5], [-1.1, -1.5], [0.9, 0.0]];
        let yb = [1.0, 2.5, -0.3, 3.1, -2.2, 1.4];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..2 {
            for (r, v) in base.iter().zip(yb) {
                rows.push(r.to_vec());
                y.push(v);
            }
        }
        let data = Dataset::new(Matrix::from_rows(&rows), y, Family::Gaussian, None).unwrap();
        let folds = Folds::Explicit((0..12).map(|i| i / 6).collect());
        let spec = PenaltySpec::mcp(3.0);
        let sd = standardize(&data);
        let lmax = lambda_max(&sd, &spec).unwrap();
        let grid = lambda_sequence(lmax, 0.1, 5).unwrap();
        let (cv, full) = cross_validate(&data, &spec, &grid.values, Strategy::Hybrid, &folds, &PathOptions::default()).unwrap();
        let orig = unstandardize(&full, &sd).unwrap();
        for l in 0..5 {
            let eta = linear_predictor(&data.x, &orig.beta[l], orig.intercept[l]);
            let train = eta.iter().zip(&data.y).map(|(e, y)| (y - e) * (y - e)).sum::<f64>() / 12.0;
            assert!((cv.mean_deviance[l] - train).abs() < 1e-8, "lambda {l}");
        }
    }
}
