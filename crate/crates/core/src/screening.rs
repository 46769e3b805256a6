//! Discarding rules, KKT violation checks and local-convexity diagnostics.
//!
//! The sequential strong rule keeps variable `j` at `lambda_k` when
//!
//! ```text
//! |x_j' r_{k-1} / n| >= alpha * (lambda_k + s * (lambda_k - lambda_{k-1}))
//! ```
//!
//! where `s` is the penalty's slope bound (1 for the lasso, `gamma/(gamma-1)`
//! for MCP, `gamma/(gamma-2)` for SCAD). The rule is a heuristic: anything it
//! discards is re-checked against the KKT conditions once the reduced problem
//! has been solved.

use serde::Serialize;

use crate::data::StandardizedDesign;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Matrix};
use crate::penalty::{slope_bound, PenaltyFamily, PenaltySpec, Shape};
use crate::solver::{Problem, SolverSettings, SolverState};

/// Largest active set for which the Gram eigenvalue is computed densely.
pub const EXACT_EIGEN_LIMIT: usize = 500;

/// Working sets of one lambda step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScreenSets {
    pub strong: Vec<usize>,
    pub active_prev: Vec<usize>,
    pub target: Vec<usize>,
    pub violations_inner: Vec<usize>,
    pub violations_outer: Vec<usize>,
}

/// One lambda value at which discarded variables failed the KKT check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationRecord {
    pub lambda_index: usize,
    pub lambda: f64,
    pub indices: Vec<usize>,
    /// Pointwise convexity at this lambda; `None` when undefined (groups).
    pub locally_convex: Option<bool>,
    /// Whether this lambda lies above the first non-convex lambda.
    pub in_convex_region: Option<bool>,
}

impl ViolationRecord {
    pub fn count(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ViolationLog {
    pub records: Vec<ViolationRecord>,
}

impl ViolationLog {
    pub fn violated_lambdas(&self) -> usize {
        self.records.len()
    }

    pub fn violated_variables(&self) -> usize {
        self.records.iter().map(ViolationRecord::count).sum()
    }

    pub fn violated_lambdas_in_convex_region(&self) -> usize {
        self.records.iter().filter(|r| r.in_convex_region == Some(true)).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityStatus {
    /// Smallest eigenvalue of `X_A'X_A/n`; infinite for an empty active set.
    pub tau_min: f64,
    pub locally_convex: bool,
}

/// Smallest `lambda` at which the all-zero fit satisfies the KKT conditions.
pub fn lambda_max(sd: &StandardizedDesign, spec: &PenaltySpec) -> Result<f64> {
    let problem = Problem::new(sd, *spec)?;
    let state = problem.null_state(SolverSettings::default())?;
    problem_lambda_max(&problem, &state)
}

pub(crate) fn problem_lambda_max(problem: &Problem<'_>, null: &SolverState) -> Result<f64> {
    let usable = problem.usable_units();
    if usable.is_empty() {
        return Err(Error::AllColumnsConstant);
    }
    let alpha = problem.spec().alpha;
    Ok(usable
        .into_iter()
        .map(|u| problem.score(null, u) / (problem.multiplier(u) * alpha))
        .fold(0.0, f64::max))
}

/// Keep threshold of the sequential strong rule for a unit with multiplier 1.
pub fn strong_threshold(lambda_k: f64, lambda_prev: f64, spec: &PenaltySpec) -> f64 {
    spec.alpha * (lambda_k + slope_bound(spec) * (lambda_k - lambda_prev))
}

/// Keep-set of the sequential strong rule given residual correlations at the
/// previous lambda.
pub fn strong_set(c_prev: &[f64], lambda_k: f64, lambda_prev: f64, spec: &PenaltySpec) -> Result<Vec<usize>> {
    if lambda_k > lambda_prev {
        return Err(Error::InvalidArgument(format!(
            "strong rule needs lambda_k <= lambda_prev, got {lambda_k} > {lambda_prev}"
        )));
    }
    let thr = strong_threshold(lambda_k, lambda_prev, spec);
    Ok((0..c_prev.len()).filter(|&j| c_prev[j].abs() >= thr).collect())
}

/// Keep-sets of the basic (non-sequential) lasso rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicRuleSets {
    pub safe_keep: Vec<usize>,
    pub strong_keep: Vec<usize>,
}

/// Basic SAFE and basic strong rules at `lambda` from correlations with the
/// response `c0_j = x_j'y/n`.
pub fn basic_rules(
    c0: &[f64],
    lambda: f64,
    lambda_max: f64,
    x_norms: &[f64],
    y_norm: f64,
    n: usize,
) -> Result<BasicRuleSets> {
    if c0.len() != x_norms.len() {
        return Err(Error::DimensionMismatch("one column norm per correlation required".into()));
    }
    if lambda > lambda_max {
        return Err(Error::InvalidArgument(format!("lambda {lambda} exceeds lambda_max {lambda_max}")));
    }
    let nf = n as f64;
    let strong_thr = 2.0 * lambda - lambda_max;
    let mut safe_keep = Vec::new();
    let mut strong_keep = Vec::new();
    for (j, &c) in c0.iter().enumerate() {
        let safe_thr = lambda - x_norms[j] * y_norm / nf * (lambda_max - lambda) / lambda_max;
        if c.abs() >= safe_thr {
            safe_keep.push(j);
        }
        if c.abs() >= strong_thr {
            strong_keep.push(j);
        }
    }
    Ok(BasicRuleSets { safe_keep, strong_keep })
}

/// Units in `check_set` whose residual correlation reaches the KKT boundary.
pub fn kkt_check(problem: &Problem<'_>, state: &SolverState, check_set: &[usize], kkt_tol: f64) -> Vec<usize> {
    check_set
        .iter()
        .copied()
        .filter(|&u| problem.score(state, u) >= problem.boundary(u, state.lambda) - kkt_tol)
        .collect()
}

/// Local convexity of the penalized objective restricted to the active set.
pub fn local_convexity(tau_min: f64, spec: &PenaltySpec, lambda: f64) -> ConvexityStatus {
    let g = spec.gamma;
    let locally_convex = if spec.family == PenaltyFamily::Mnet {
        g * (tau_min + spec.ridge_level(lambda)) > 1.0
    } else {
        match spec.shape() {
            Shape::Lasso => true,
            Shape::Mcp => g * tau_min > 1.0,
            Shape::Scad => (g - 1.0) * tau_min > 1.0,
        }
    };
    ConvexityStatus { tau_min, locally_convex }
}

/// `tau_min` of the Gram matrix of `active` columns.
pub fn active_tau_min(x: &Matrix, active: &[usize]) -> f64 {
    if active.is_empty() {
        return f64::INFINITY;
    }
    if active.len() > x.nrows() {
        return 0.0;
    }
    min_eigenvalue(&x.gram(active), EXACT_EIGEN_LIMIT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{correlations, standardize, Dataset, Family};
    use crate::linalg::Matrix;

    #[test]
    fn mcp_strong_threshold_arithmetic() {
        let spec = PenaltySpec::mcp(3.0);
        assert!((strong_threshold(0.5, 0.6, &spec) - 0.35).abs() < 1e-15);
        let keep = strong_set(&[0.3499, -0.36, 0.3501, 0.0], 0.5, 0.6, &spec).unwrap();
        assert_eq!(keep, vec![1, 2]);
    }

    #[test]
    fn lasso_rule_is_two_lambda_minus_previous() {
        let spec = PenaltySpec::lasso();
        assert!((strong_threshold(0.5, 0.6, &spec) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_gap_collapses_to_kkt_boundary() {
        for spec in [PenaltySpec::lasso(), PenaltySpec::mcp(3.0), PenaltySpec::scad(4.0)] {
            assert_eq!(strong_threshold(0.5, 0.5, &spec), 0.5);
        }
    }

    #[test]
    fn increasing_lambda_is_rejected() {
        assert!(strong_set(&[1.0], 0.7, 0.6, &PenaltySpec::lasso()).is_err());
    }

    #[test]
    fn mnet_threshold_scales_with_alpha() {
        let spec = PenaltySpec::mnet(3.0, 0.5);
        assert!((strong_threshold(0.5, 0.6, &spec) - 0.175).abs() < 1e-15);
    }

    #[test]
    fn basic_rules_at_lambda_max_keep_the_argmax() {
        let c0 = [0.9, -0.4, 0.2];
        let sets = basic_rules(&c0, 0.9, 0.9, &[3.0; 3], 5.0, 9).unwrap();
        assert_eq!(sets.strong_keep, vec![0]);
        assert_eq!(sets.safe_keep, vec![0]);
    }

    #[test]
    fn empty_active_set_is_convex() {
        let x = Matrix::zeros(4, 2);
        let tau = active_tau_min(&x, &[]);
        assert!(local_convexity(tau, &PenaltySpec::mcp(3.0), 0.1).locally_convex);
        assert!(local_convexity(tau, &PenaltySpec::scad(4.0), 0.1).locally_convex);
    }

    #[test]
    fn orthonormal_active_block_is_convex_for_mcp() {
        let st = local_convexity(1.0, &PenaltySpec::mcp(3.0), 0.1);
        assert!(st.locally_convex);
    }

    #[test]
    fn rank_deficient_active_set() {
        // more active columns than rows forces tau_min = 0
        let x = Matrix::from_rows(&[vec![1.0, 0.5, -1.0], vec![-1.0, 0.3, 1.0]]);
        let tau = active_tau_min(&x, &[0, 1, 2]);
        assert_eq!(tau, 0.0);
        assert!(!local_convexity(tau, &PenaltySpec::mcp(3.0), 0.5).locally_convex);
        assert!(!local_convexity(tau, &PenaltySpec::scad(4.0), 0.5).locally_convex);
        // ridge part (1 - alpha) lambda = 0.45 > 1/gamma
        assert!(local_convexity(tau, &PenaltySpec::mnet(3.0, 0.1), 0.5).locally_convex);
        assert!(!local_convexity(tau, &PenaltySpec::mnet(3.0, 0.1), 0.3).locally_convex);
    }

    #[test]
    fn lambda_max_of_orthonormal_instance() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]]);
        let y = x.col(0).to_vec();
        let sd = standardize(&Dataset::new(x, y, Family::Gaussian, None).unwrap());
        assert!((lambda_max(&sd, &PenaltySpec::mcp(3.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambda_max(&sd, &PenaltySpec::mnet(3.0, 0.5)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_max_of_constant_response_is_zero() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![5.0]]);
        let sd = standardize(&Dataset::new(x, vec![3.0; 3], Family::Gaussian, None).unwrap());
        assert_eq!(lambda_max(&sd, &PenaltySpec::lasso()).unwrap(), 0.0);
    }

    #[test]
    fn lambda_max_with_all_constant_columns_errors() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let sd = standardize(&Dataset::new(x, vec![3.0, 1.0, 0.0], Family::Gaussian, None).unwrap());
        assert!(matches!(lambda_max(&sd, &PenaltySpec::lasso()), Err(Error::AllColumnsConstant)));
    }

    #[test]
    fn binomial_lambda_max_uses_null_mean() {
        let x = Matrix::from_rows(&[vec![1.0, 0.3], vec![2.0, -1.0], vec![4.0, 2.0], vec![-1.0, 0.0]]);
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let sd = standardize(&Dataset::new(x, y.clone(), Family::Binomial, None).unwrap());
        let r0: Vec<f64> = y.iter().map(|v| v - 0.5).collect();
        let expected = correlations(&sd.xs, &r0).iter().fold(0.0f64, |m, c| m.max(c.abs()));
        assert!((lambda_max(&sd, &PenaltySpec::scad(4.0)).unwrap() - expected).abs() < 1e-14);
    }
}
