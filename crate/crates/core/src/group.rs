//! Group MCP / SCAD paths.
//!
//! Each group is whitened so that `X_g'X_g/n = I`; the group update then
//! thresholds the norm of `z_g = X_g'r/n + beta_g` at `lambda * sqrt(p_g)`
//! and keeps its direction. Coefficients are mapped back to the
//! standardized columns before they are returned.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::StandardizedDesign;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::path::{run_path, sweep, CoefPath, PathOptions, Scale, Strategy};
use crate::penalty::PenaltySpec;
use crate::screening::{problem_lambda_max, strong_threshold};
use crate::solver::{Problem, SolverSettings, SolverState};

const IDENTITY_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-8;

/// Per-group whitening map.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTransform {
    /// `p_g x r`: original coefficients are `map * transformed`.
    pub map: DMatrix<f64>,
    /// `r x p_g`: transformed coefficients are `inverse * original` for
    /// coefficient vectors in the column space of `map`.
    pub inverse: DMatrix<f64>,
}

impl GroupTransform {
    pub fn rank(&self) -> usize {
        self.map.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupLayout {
    /// Column ranges in the standardized design.
    pub groups: Vec<Range<usize>>,
    pub sizes: Vec<usize>,
    /// `lambda_g / lambda = sqrt(p_g)`.
    pub multipliers: Vec<f64>,
    pub transforms: Vec<GroupTransform>,
    /// Column ranges of each group in the whitened design.
    pub whitened: Vec<Range<usize>>,
    pub rank_deficient: Vec<bool>,
}

impl GroupLayout {
    pub fn new(groups: Vec<Range<usize>>, p: usize) -> Result<Self> {
        let mut next = 0;
        for g in &groups {
            if g.start != next || g.is_empty() {
                return Err(Error::InvalidGroups("groups must be nonempty contiguous ranges covering every column".into()));
            }
            next = g.end;
        }
        if next != p {
            return Err(Error::InvalidGroups(format!("groups cover {next} of {p} columns")));
        }
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        Ok(GroupLayout {
            multipliers: sizes.iter().map(|&s| (s as f64).sqrt()).collect(),
            transforms: sizes
                .iter()
                .map(|&s| GroupTransform {
                    map: DMatrix::identity(s, s),
                    inverse: DMatrix::identity(s, s),
                })
                .collect(),
            whitened: groups.clone(),
            rank_deficient: vec![false; groups.len()],
            sizes,
            groups,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Map whitened coefficients to standardized-column coefficients.
    pub fn to_original(&self, transformed: &[f64]) -> Vec<f64> {
        let p = self.groups.last().map_or(0, |g| g.end);
        let mut out = vec![0.0; p];
        for (g, t) in self.transforms.iter().enumerate() {
            if t.rank() == 0 {
                continue;
            }
            let b = DVector::from_column_slice(&transformed[self.whitened[g].clone()]);
            let orig = &t.map * b;
            out[self.groups[g].clone()].copy_from_slice(orig.as_slice());
        }
        out
    }

    /// Map standardized-column coefficients to whitened coefficients.
    pub fn to_whitened(&self, original: &[f64]) -> Vec<f64> {
        let q = self.whitened.last().map_or(0, |g| g.end);
        let mut out = vec![0.0; q];
        for (g, t) in self.transforms.iter().enumerate() {
            if t.rank() == 0 {
                continue;
            }
            let b = DVector::from_column_slice(&original[self.groups[g].clone()]);
            let w = &t.inverse * b;
            out[self.whitened[g].clone()].copy_from_slice(w.as_slice());
        }
        out
    }
}

/// Whiten every group of a standardized design.
///
/// Blocks that are already orthonormal keep the identity map. Rank-deficient
/// blocks are reduced to their column space (eigenvalues below `1e-8` times
/// the largest are dropped) with a warning.
pub fn group_orthonormalize(sd: &StandardizedDesign, layout: &GroupLayout) -> (Matrix, GroupLayout) {
    let n = sd.n();
    let mut out = layout.clone();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(sd.p());
    let mut next = 0;
    for (g, range) in layout.groups.iter().enumerate() {
        let cols: Vec<usize> = range.clone().collect();
        let gram = sd.xs.gram(&cols);
        let pg = cols.len();
        let identity = (0..pg).all(|a| (0..pg).all(|b| {
            let target = if a == b { 1.0 } else { 0.0 };
            (gram[(a, b)] - target).abs() <= IDENTITY_TOL
        }));
        let transform = if identity {
            GroupTransform {
                map: DMatrix::identity(pg, pg),
                inverse: DMatrix::identity(pg, pg),
            }
        } else {
            let eig = SymmetricEigen::new(gram);
            let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
            let mut keep: Vec<usize> = (0..pg).filter(|&k| eig.eigenvalues[k] > RANK_TOL * top.max(0.0)).collect();
            if top <= 0.0 {
                keep.clear();
            }
            // descending eigenvalue order, ties by index, for a reproducible layout
            keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
            let r = keep.len();
            if r < pg {
                log::warn!("group {} is rank deficient ({r} of {pg} directions kept)", g + 1);
                out.rank_deficient[g] = true;
            }
            let mut map = DMatrix::zeros(pg, r);
            let mut inverse = DMatrix::zeros(r, pg);
            for (c, &k) in keep.iter().enumerate() {
                let ev = eig.eigenvalues[k];
                let v = eig.eigenvectors.column(k);
                for a in 0..pg {
                    map[(a, c)] = v[a] / ev.sqrt();
                    inverse[(c, a)] = v[a] * ev.sqrt();
                }
            }
            GroupTransform { map, inverse }
        };
        let r = transform.rank();
        for c in 0..r {
            let mut col = vec![0.0; n];
            for (a, &j) in cols.iter().enumerate() {
                let w = transform.map[(a, c)];
                if w != 0.0 {
                    for (o, x) in col.iter_mut().zip(sd.xs.col(j)) {
                        *o += w * x;
                    }
                }
            }
            columns.push(col);
        }
        out.whitened[g] = next..next + r;
        out.transforms[g] = transform;
        next += r;
    }
    (Matrix::from_columns(n, &columns), out)
}

/// Keep-set of the group strong rule from previous residual-correlation
/// norms `||X_g'r/n||`.
pub fn group_strong_set(
    c_prev_norms: &[f64],
    sizes: &[usize],
    lambda_k: f64,
    lambda_prev: f64,
    spec: &PenaltySpec,
) -> Result<Vec<usize>> {
    if c_prev_norms.len() != sizes.len() {
        return Err(Error::DimensionMismatch("one norm per group required".into()));
    }
    if lambda_k > lambda_prev {
        return Err(Error::InvalidArgument(format!(
            "strong rule needs lambda_k <= lambda_prev, got {lambda_k} > {lambda_prev}"
        )));
    }
    let thr = strong_threshold(lambda_k, lambda_prev, spec);
    Ok((0..sizes.len())
        .filter(|&g| c_prev_norms[g] > 0.0 && c_prev_norms[g] >= (sizes[g] as f64).sqrt() * thr)
        .collect())
}

/// Whitened design and layout ready for the group solver.
#[derive(Clone, Debug)]
pub struct GroupDesign {
    pub x: Matrix,
    pub layout: GroupLayout,
}

impl GroupDesign {
    pub fn new(sd: &StandardizedDesign, groups: &[Range<usize>]) -> Result<Self> {
        let layout = GroupLayout::new(groups.to_vec(), sd.p())?;
        let (x, layout) = group_orthonormalize(sd, &layout);
        Ok(GroupDesign { x, layout })
    }

    pub fn problem<'a>(&'a self, sd: &'a StandardizedDesign, spec: &PenaltySpec) -> Result<Problem<'a>> {
        if !spec.is_group() {
            return Err(Error::InvalidPenalty(format!("{} is not a group penalty", spec.family)));
        }
        Problem::grouped(
            &self.x,
            &sd.y,
            sd.family,
            *spec,
            self.layout.whitened.clone(),
            self.layout.multipliers.clone(),
        )
    }
}

/// One group update on a whitened problem; returns the largest change.
pub fn group_update(problem: &Problem<'_>, state: &mut SolverState, g: usize) -> f64 {
    problem.block_update(state, g)
}

/// Smallest lambda with an all-zero group solution.
pub fn group_lambda_max(sd: &StandardizedDesign, groups: &[Range<usize>], spec: &PenaltySpec) -> Result<f64> {
    let gd = GroupDesign::new(sd, groups)?;
    let problem = gd.problem(sd, spec)?;
    let state = problem.null_state(SolverSettings::default())?;
    problem_lambda_max(&problem, &state)
}

/// Group-penalized path. Coefficients are returned on the standardized
/// column scale; `correlations` hold the whitened group norms.
pub fn fit_group_path(
    sd: &StandardizedDesign,
    groups: &[Range<usize>],
    spec: &PenaltySpec,
    lambdas: &[f64],
    strategy: Strategy,
    options: &PathOptions,
) -> Result<CoefPath> {
    let gd = GroupDesign::new(sd, groups)?;
    let problem = gd.problem(sd, spec)?;
    let mut path = run_path(&problem, lambdas, strategy, options, sd.y_center)?;
    for b in &mut path.beta {
        *b = gd.layout.to_original(b);
    }
    path.set_n_coef(sd.p());
    path.groups = Some(groups.to_vec());
    Ok(path)
}

/// Largest blockwise KKT residual at every lambda of a group path.
pub fn group_kkt_sweep(sd: &StandardizedDesign, path: &CoefPath) -> Result<Vec<f64>> {
    let groups = path
        .groups
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("path has no group structure".into()))?;
    if path.scale != Scale::Standardized {
        return Err(Error::InvalidArgument("KKT sweep needs a standardized-scale path".into()));
    }
    let gd = GroupDesign::new(sd, groups)?;
    let problem = gd.problem(sd, &path.penalty)?;
    let betas: Vec<Vec<f64>> = path.beta.iter().map(|b| gd.layout.to_whitened(b)).collect();
    Ok(sweep(&problem, path, &betas, sd.y_center))
}

/// Penalized group objective at standardized-scale coefficients.
pub fn group_objective(
    beta: &[f64],
    intercept: f64,
    sd: &StandardizedDesign,
    groups: &[Range<usize>],
    spec: &PenaltySpec,
    lambda: f64,
) -> Result<f64> {
    let gd = GroupDesign::new(sd, groups)?;
    let problem = gd.problem(sd, spec)?;
    Ok(problem.objective(&gd.layout.to_whitened(beta), intercept, lambda))
}

/// L2 norm of each group's standardized-scale coefficients.
pub fn group_norms(beta: &[f64], groups: &[Range<usize>]) -> Vec<f64> {
    groups
        .iter()
        .map(|g| beta[g.clone()].iter().map(|b| b * b).sum::<f64>().sqrt())
        .collect()
}
