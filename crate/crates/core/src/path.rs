//! Regularization-path drivers: cyclic coordinate descent and the three
//! targeted-cycling strategies (strong set, previous active set, and the
//! hybrid of the two), each followed by KKT repair.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Family, StandardizedDesign};
use crate::error::{Error, Result};
use crate::penalty::PenaltySpec;
use crate::screening::{
    active_tau_min, kkt_check, local_convexity, problem_lambda_max, strong_threshold, ConvexityStatus, ScreenSets,
    ViolationLog, ViolationRecord,
};
use crate::solver::{Problem, SolverSettings, SolverState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Full cycles over every variable.
    Cyclic,
    /// Cycle over the strong set, then repair from the complement.
    Strong,
    /// Cycle over the previous active set, then repair from the complement.
    Active,
    /// Active set first, strong set next, complement last.
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Cyclic, Strategy::Strong, Strategy::Active, Strategy::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Cyclic => "cyclic",
            Strategy::Strong => "strong",
            Strategy::Active => "active",
            Strategy::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cyclic" => Ok(Strategy::Cyclic),
            "strong" => Ok(Strategy::Strong),
            "active" => Ok(Strategy::Active),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Standardized,
    Original,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathOptions {
    pub solver: SolverSettings,
    /// KKT tolerance; `None` means `1e-6 * max(1, lambda_max)`.
    pub kkt_tol: Option<f64>,
    /// Track local convexity of the active set (ungrouped paths only).
    pub convexity: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            solver: SolverSettings::default(),
            kkt_tol: None,
            convexity: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathFailure {
    pub lambda_index: usize,
    pub message: String,
}

/// A fitted regularization path.
///
/// Per-lambda vectors are indexed like `lambdas`. Set sizes count units:
/// variables for ungrouped penalties, groups otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefPath {
    pub lambdas: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    /// Residual correlations per unit at each solution: signed `x_j'r/n`,
    /// or `||X_g'r/n||` for groups.
    pub correlations: Vec<Vec<f64>>,
    pub strong_size: Vec<usize>,
    pub active_size: Vec<usize>,
    pub target_size: Vec<usize>,
    pub iterations: Vec<usize>,
    /// Number of previous-active-set violations (hybrid inner loop).
    pub inner_violations: Vec<usize>,
    pub violations: ViolationLog,
    pub convexity: Vec<Option<ConvexityStatus>>,
    pub lambda_star: Option<f64>,
    pub lambda_max: f64,
    pub kkt_tol: f64,
    pub family: Family,
    pub penalty: PenaltySpec,
    pub strategy: Strategy,
    pub scale: Scale,
    pub n_units: usize,
    /// Column ranges of each group, for grouped fits.
    pub groups: Option<Vec<Range<usize>>>,
    pub failure: Option<PathFailure>,
    n_coef: usize,
}

impl CoefPath {
    pub fn p(&self) -> usize {
        self.n_coef
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Units removed by the screening rule at each lambda after the first.
    pub fn eliminated(&self) -> Vec<usize> {
        self.strong_size.iter().skip(1).map(|s| self.n_units - s).collect()
    }

    /// Path average of [`CoefPath::eliminated`]; every unit counts as
    /// eliminated on a single-point path.
    pub fn mean_eliminated(&self) -> f64 {
        let e = self.eliminated();
        if e.is_empty() {
            return self.n_units as f64;
        }
        e.iter().sum::<usize>() as f64 / e.len() as f64
    }

    pub fn nonzero(&self, k: usize) -> usize {
        self.beta[k].iter().filter(|b| **b != 0.0).count()
    }

    /// Largest absolute coefficient difference between two paths over their
    /// common prefix; infinite if lengths differ.
    pub fn max_deviation(&self, other: &CoefPath) -> f64 {
        if self.len() != other.len() || self.p() != other.p() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for (a, b) in self.beta.iter().zip(&other.beta) {
            for (x, y) in a.iter().zip(b) {
                dev = dev.max((x - y).abs());
            }
        }
        for (a, b) in self.intercept.iter().zip(&other.intercept) {
            dev = dev.max((a - b).abs());
        }
        dev
    }

    pub(crate) fn set_n_coef(&mut self, p: usize) {
        self.n_coef = p;
    }
}

/// Validate a lambda sequence: nonempty, positive and strictly decreasing.
pub fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("lambda sequence is empty".into()));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidArgument("lambda values must be positive and finite".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("lambda sequence must be strictly decreasing".into()));
    }
    Ok(())
}

/// Fit an ungrouped penalty along `lambdas` on a standardized design.
///
/// The first point is assigned the all-zero solution when it is at or above
/// the data's lambda_max; otherwise it is solved from the null fit.
pub fn fit_path(
    sd: &StandardizedDesign,
    spec: &PenaltySpec,
    lambdas: &[f64],
    strategy: Strategy,
    options: &PathOptions,
) -> Result<CoefPath> {
    if spec.is_group() {
        return Err(Error::InvalidPenalty(format!(
            "{} is a group penalty; use fit_group_path",
            spec.family
        )));
    }
    let problem = Problem::new(sd, *spec)?;
    let mut path = run_path(&problem, lambdas, strategy, options, sd.y_center)?;
    path.set_n_coef(sd.p());
    Ok(path)
}

/// Rebuild a solver state from stored path coefficients (problem scale).
pub(crate) fn state_at(problem: &Problem<'_>, beta: &[f64], intercept: f64, lambda: f64) -> SolverState {
    let mut s = problem
        .null_state(SolverSettings::default())
        .unwrap_or_else(|_| unreachable!("path exists, so the null model is valid"));
    s.beta = beta.to_vec();
    s.intercept = intercept;
    s.lambda = lambda;
    s.residual = s.recomputed_residual(problem);
    if problem.family().is_glm() {
        s.eta = problem.x().mul_vec(beta).iter().map(|v| v + intercept).collect();
    }
    s
}

/// Largest KKT residual at every lambda of an ungrouped standardized path,
/// over all usable variables.
pub fn kkt_sweep(sd: &StandardizedDesign, path: &CoefPath) -> Result<Vec<f64>> {
    if path.scale != Scale::Standardized {
        return Err(Error::InvalidArgument("KKT sweep needs a standardized-scale path".into()));
    }
    let problem = Problem::new(sd, path.penalty)?;
    Ok(sweep(&problem, path, &path.beta, sd.y_center))
}

pub(crate) fn sweep(problem: &Problem<'_>, path: &CoefPath, betas: &[Vec<f64>], y_center: f64) -> Vec<f64> {
    let units = problem.usable_units();
    betas
        .iter()
        .zip(&path.intercept)
        .zip(&path.lambdas)
        .map(|((b, &b0), &lam)| {
            let state = state_at(problem, b, b0 - y_center, lam);
            problem.kkt_residuals(&state, &units).into_iter().fold(0.0, f64::max)
        })
        .collect()
}

struct Recorder {
    path: CoefPath,
    in_region: bool,
    tau_cache: Option<(Vec<usize>, f64)>,
}

impl Recorder {
    fn convexity(&mut self, problem: &Problem<'_>, state: &SolverState, enabled: bool) -> Option<ConvexityStatus> {
        if !enabled || problem.is_grouped() {
            return None;
        }
        let active = state.active_columns();
        let tau = match &self.tau_cache {
            Some((a, t)) if *a == active => *t,
            _ => {
                let t = active_tau_min(problem.x(), &active);
                self.tau_cache = Some((active, t));
                t
            }
        };
        Some(local_convexity(tau, problem.spec(), state.lambda))
    }
}

fn unit_corr(problem: &Problem<'_>, state: &SolverState, u: usize) -> f64 {
    let r = problem.unit(u);
    if r.len() == 1 && !problem.is_grouped() {
        problem.correlation(state, r.start)
    } else {
        problem.score(state, u)
    }
}

fn with_index(e: Error, k: usize) -> Error {
    match e {
        Error::NotConverged { iterations, .. } => Error::NotConverged {
            lambda_index: k,
            iterations,
        },
        Error::Saturated { limit, .. } => Error::Saturated { lambda_index: k, limit },
        other => other,
    }
}

pub(crate) fn run_path(
    problem: &Problem<'_>,
    lambdas: &[f64],
    strategy: Strategy,
    options: &PathOptions,
    y_center: f64,
) -> Result<CoefPath> {
    check_lambdas(lambdas)?;
    let mut state = problem.null_state(options.solver)?;
    let lmax = problem_lambda_max(problem, &state)?;
    let kkt_tol = options.kkt_tol.unwrap_or(1e-6 * lmax.max(1.0));
    let nu = problem.n_units();
    let usable = problem.usable_units();
    let spec = *problem.spec();

    let mut corr = vec![0.0; nu];
    for &u in &usable {
        corr[u] = unit_corr(problem, &state, u);
    }

    let mut rec = Recorder {
        path: CoefPath {
            lambdas: Vec::with_capacity(lambdas.len()),
            beta: Vec::with_capacity(lambdas.len()),
            intercept: Vec::new(),
            correlations: Vec::new(),
            strong_size: Vec::new(),
            active_size: Vec::new(),
            target_size: Vec::new(),
            iterations: Vec::new(),
            inner_violations: Vec::new(),
            violations: ViolationLog::default(),
            convexity: Vec::new(),
            lambda_star: None,
            lambda_max: lmax,
            kkt_tol,
            family: problem.family(),
            penalty: spec,
            strategy,
            scale: Scale::Standardized,
            n_units: nu,
            groups: None,
            failure: None,
            n_coef: problem.x().ncols(),
        },
        in_region: true,
        tau_cache: None,
    };

    let mut prev_lambda = lmax;
    let mut in_target = vec![false; nu];
    for (k, &lambda) in lambdas.iter().enumerate() {
        state.lambda = lambda;
        if k == 0 && lambda >= lmax * (1.0 - 1e-12) {
            let conv = rec.convexity(problem, &state, options.convexity);
            let p = &mut rec.path;
            p.lambdas.push(lambda);
            p.beta.push(state.beta.clone());
            p.intercept.push(state.intercept + y_center);
            p.correlations.push(corr.clone());
            p.strong_size.push(0);
            p.active_size.push(0);
            p.target_size.push(0);
            p.iterations.push(0);
            p.inner_violations.push(0);
            p.convexity.push(conv);
            prev_lambda = lambda;
            continue;
        }

        let mut sets = ScreenSets::default();
        let thr = strong_threshold(lambda, prev_lambda.max(lambda), &spec);
        for &u in &usable {
            let active = problem.unit(u).any(|j| state.beta[j] != 0.0);
            if active {
                sets.active_prev.push(u);
            }
            if active || corr[u].abs() >= thr * problem.multiplier(u) {
                sets.strong.push(u);
            }
        }
        sets.target = match strategy {
            Strategy::Cyclic => usable.clone(),
            Strategy::Strong => sets.strong.clone(),
            Strategy::Active | Strategy::Hybrid => sets.active_prev.clone(),
        };
        in_target.iter_mut().for_each(|t| *t = false);
        for &u in &sets.target {
            in_target[u] = true;
        }
        let in_strong = {
            let mut v = vec![false; nu];
            for &u in &sets.strong {
                v[u] = true;
            }
            v
        };

        // Re-solves after a violation restart from the previous solution, so
        // the final iterates depend only on the final target set.
        let warm = state.clone();
        let mut cycles = 0;
        let outcome: Result<()> = (|| {
            match strategy {
                Strategy::Cyclic | Strategy::Strong | Strategy::Active => loop {
                    state.target = sets.target.clone();
                    cycles += problem.solve_certified(&mut state, kkt_tol)?;
                    let rest: Vec<usize> = usable.iter().copied().filter(|&u| !in_target[u]).collect();
                    for &u in &rest {
                        corr[u] = unit_corr(problem, &state, u);
                    }
                    let v = kkt_check(problem, &state, &rest, kkt_tol);
                    if v.is_empty() {
                        break;
                    }
                    for &u in &v {
                        in_target[u] = true;
                    }
                    sets.violations_outer.extend_from_slice(&v);
                    merge_sorted(&mut sets.target, &v);
                    state.clone_from(&warm);
                },
                Strategy::Hybrid => loop {
                    loop {
                        state.target = sets.target.clone();
                        cycles += problem.solve_certified(&mut state, kkt_tol)?;
                        let pool: Vec<usize> = sets.strong.iter().copied().filter(|&u| !in_target[u]).collect();
                        for &u in &pool {
                            corr[u] = unit_corr(problem, &state, u);
                        }
                        let v1 = kkt_check(problem, &state, &pool, kkt_tol);
                        if v1.is_empty() {
                            break;
                        }
                        for &u in &v1 {
                            in_target[u] = true;
                        }
                        sets.violations_inner.extend_from_slice(&v1);
                        merge_sorted(&mut sets.target, &v1);
                        state.clone_from(&warm);
                    }
                    let rest: Vec<usize> = usable
                        .iter()
                        .copied()
                        .filter(|&u| !in_target[u] && !in_strong[u])
                        .collect();
                    for &u in &rest {
                        corr[u] = unit_corr(problem, &state, u);
                    }
                    let v2 = kkt_check(problem, &state, &rest, kkt_tol);
                    if v2.is_empty() {
                        break;
                    }
                    for &u in &v2 {
                        in_target[u] = true;
                    }
                    sets.violations_outer.extend_from_slice(&v2);
                    merge_sorted(&mut sets.target, &v2);
                    state.clone_from(&warm);
                },
            }
            Ok(())
        })();

        if let Err(e) = outcome {
            let e = with_index(e, k);
            log::warn!("path truncated at lambda index {k}: {e}");
            rec.path.failure = Some(PathFailure {
                lambda_index: k,
                message: e.to_string(),
            });
            break;
        }

        for &u in &sets.target {
            corr[u] = unit_corr(problem, &state, u);
        }
        let active_units = usable
            .iter()
            .filter(|&&u| problem.unit(u).any(|j| state.beta[j] != 0.0))
            .count();
        let conv = rec.convexity(problem, &state, options.convexity);
        if let Some(c) = conv {
            if !c.locally_convex && rec.path.lambda_star.is_none() {
                rec.path.lambda_star = Some(lambda);
                rec.in_region = false;
            }
        }
        if !sets.violations_outer.is_empty() {
            let mut indices = sets.violations_outer.clone();
            indices.sort_unstable();
            rec.path.violations.records.push(ViolationRecord {
                lambda_index: k,
                lambda,
                indices,
                locally_convex: conv.map(|c| c.locally_convex),
                in_convex_region: conv.map(|_| rec.in_region),
            });
        }
        let p = &mut rec.path;
        p.lambdas.push(lambda);
        p.beta.push(state.beta.clone());
        p.intercept.push(state.intercept + y_center);
        p.correlations.push(corr.clone());
        p.strong_size.push(sets.strong.len());
        p.active_size.push(active_units);
        p.target_size.push(sets.target.len());
        p.iterations.push(cycles);
        p.inner_violations.push(sets.violations_inner.len());
        p.convexity.push(conv);
        prev_lambda = lambda;
    }
    Ok(rec.path)
}

/// Insert `extra` (disjoint from `set`) keeping `set` ascending.
fn merge_sorted(set: &mut Vec<usize>, extra: &[usize]) {
    set.extend_from_slice(extra);
    set.sort_unstable();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{standardize, Dataset};
    use crate::linalg::Matrix;

    #[test]
    fn merge_keeps_order() {
        let mut s = vec![1, 5, 9];
        merge_sorted(&mut s, &[7, 0]);
        assert_eq!(s, vec![0, 1, 5, 7, 9]);
    }

    #[test]
    fn lambda_sequences_are_validated() {
        assert!(check_lambdas(&[]).is_err());
        assert!(check_lambdas(&[1.0, 1.0]).is_err());
        assert!(check_lambdas(&[1.0, 2.0]).is_err());
        assert!(check_lambdas(&[1.0, 0.0]).is_err());
        assert!(check_lambdas(&[1.0, 0.5]).is_ok());
    }

    #[test]
    fn single_point_path_is_null() {
        let x = Matrix::from_rows(&[vec![1.0, 0.5], vec![2.0, -1.0], vec![3.0, 0.0], vec![0.0, 2.0]]);
        let sd = standardize(&Dataset::new(x, vec![1.0, 3.0, 2.0, 0.5], Family::Gaussian, None).unwrap());
        let spec = PenaltySpec::mcp(3.0);
        let lmax = crate::screening::lambda_max(&sd, &spec).unwrap();
        for s in Strategy::ALL {
            let path = fit_path(&sd, &spec, &[lmax], s, &PathOptions::default()).unwrap();
            assert_eq!(path.len(), 1);
            assert!(path.beta[0].iter().all(|b| *b == 0.0));
            assert_eq!(path.violations.violated_lambdas(), 0);
            assert!((path.intercept[0] - 1.625).abs() < 1e-15);
            assert_eq!(path.mean_eliminated(), 2.0);
        }
    }

    #[test]
    fn group_penalty_is_redirected() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let sd = standardize(&Dataset::new(x, vec![1.0, 3.0], Family::Gaussian, None).unwrap());
        let spec = PenaltySpec::with_default_gamma(crate::penalty::PenaltyFamily::GroupMcp);
        assert!(fit_path(&sd, &spec, &[1.0], Strategy::Hybrid, &PathOptions::default()).is_err());
    }
}
