//! Coordinate-descent kernel.
//!
//! A [`Problem`] bundles a design whose columns satisfy `x_j'x_j/n = 1`
//! (standardized, or orthonormalized within groups), the response, the
//! likelihood family and the penalty. Columns are organised in *units*:
//! single columns for ungrouped penalties, contiguous blocks for group
//! penalties.
//!
//! The state keeps the residual `y - mu(eta)`: the ordinary residual for
//! gaussian fits, the exact score residual for GLMs, so KKT checks read
//! residual correlations straight off the state.
//!
//! GLM units take thresholded Newton steps at their local curvature and keep
//! a step only if the penalized objective does not increase; the logistic
//! curvature bound 1/4 (or step halving for Poisson) is the fallback. Every
//! accepted step descends, so cycles converge without an outer IRLS loop.

use std::ops::Range;

use crate::data::{Family, StandardizedDesign};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::penalty::{derivative_unchecked, penalty_value, weighted_threshold, PenaltySpec};

/// Linear predictors beyond this magnitude are treated as a saturated fit.
pub const ETA_LIMIT: f64 = 30.0;

/// Global curvature bound of the logistic log-likelihood.
const LOGISTIC_BOUND: f64 = 0.25;

/// Floor on local curvatures, so near-saturated fits still take finite steps.
const MIN_CURVATURE: f64 = 1e-6;

/// Step halvings tried for Poisson updates before a coordinate is left alone.
/// Floor for the tightened tolerance in [`Problem::solve_certified`].
const MIN_TOL: f64 = 1e-14;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Convergence threshold on the largest coefficient change in a cycle.
    pub tol: f64,
    /// Maximum number of full cycles over the target set.
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    family: Family,
    spec: PenaltySpec,
    units: Vec<Range<usize>>,
    multipliers: Vec<f64>,
    usable: Vec<bool>,
    grouped: bool,
}

impl<'a> Problem<'a> {
    /// One unit per column of a standardized design.
    pub fn new(sd: &'a StandardizedDesign, spec: PenaltySpec) -> Result<Self> {
        spec.validate()?;
        let p = sd.p();
        Ok(Problem {
            x: &sd.xs,
            y: &sd.y,
            family: sd.family,
            spec,
            units: (0..p).map(|j| j..j + 1).collect(),
            multipliers: vec![1.0; p],
            usable: sd.constant.iter().map(|c| !c).collect(),
            grouped: false,
        })
    }

    /// Block units over an already group-orthonormalized design.
    pub fn grouped(
        x: &'a Matrix,
        y: &'a [f64],
        family: Family,
        spec: PenaltySpec,
        units: Vec<Range<usize>>,
        multipliers: Vec<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        if family == Family::Poisson {
            return Err(Error::InvalidArgument("group penalties support gaussian and binomial only".into()));
        }
        if units.len() != multipliers.len() {
            return Err(Error::DimensionMismatch("one multiplier per group required".into()));
        }
        let usable = units.iter().map(|r| !r.is_empty()).collect();
        Ok(Problem {
            x,
            y,
            family,
            spec,
            units,
            multipliers,
            usable,
            grouped: true,
        })
    }

    pub fn x(&self) -> &Matrix {
        self.x
    }

    pub fn y(&self) -> &[f64] {
        self.y
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn spec(&self) -> &PenaltySpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn unit(&self, u: usize) -> Range<usize> {
        self.units[u].clone()
    }

    /// `lambda_g / lambda`: `sqrt(p_g)` for groups, 1 otherwise.
    pub fn multiplier(&self, u: usize) -> f64 {
        self.multipliers[u]
    }

    pub fn is_usable(&self, u: usize) -> bool {
        self.usable[u]
    }

    pub fn is_grouped(&self) -> bool {
        self.grouped
    }

    pub fn usable_units(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&u| self.usable[u]).collect()
    }

    /// All-zero coefficients with the null-model intercept.
    pub fn null_state(&self, settings: SolverSettings) -> Result<SolverState> {
        let n = self.n();
        let ybar = self.y.iter().sum::<f64>() / n as f64;
        let intercept = match self.family {
            Family::Gaussian => 0.0,
            Family::Binomial => {
                if ybar <= 0.0 || ybar >= 1.0 {
                    return Err(Error::InvalidResponse("binomial response contains a single class".into()));
                }
                (ybar / (1.0 - ybar)).ln()
            }
            Family::Poisson => {
                if ybar <= 0.0 {
                    return Err(Error::InvalidResponse("poisson response is identically zero".into()));
                }
                ybar.ln()
            }
        };
        let mut state = SolverState {
            beta: vec![0.0; self.x.ncols()],
            intercept,
            residual: self.y.to_vec(),
            eta: if self.family.is_glm() { vec![intercept; n] } else { Vec::new() },
            target: Vec::new(),
            lambda: f64::INFINITY,
            tol: settings.tol,
            max_iter: settings.max_iter,
            loss: 0.0,
            scratch: Vec::new(),
        };
        self.refresh(&mut state)?;
        Ok(state)
    }

    /// Residual correlation magnitude of a unit: `|x_j'r/n|` or `||X_g'r/n||`.
    pub fn score(&self, state: &SolverState, u: usize) -> f64 {
        let n = self.n() as f64;
        let r = self.units[u].clone();
        if r.len() == 1 {
            return (dot(self.x.col(r.start), &state.residual) / n).abs();
        }
        r.map(|j| {
            let c = dot(self.x.col(j), &state.residual) / n;
            c * c
        })
        .sum::<f64>()
        .sqrt()
    }

    /// Signed `x_j'r/n` for a single column.
    pub fn correlation(&self, state: &SolverState, j: usize) -> f64 {
        dot(self.x.col(j), &state.residual) / self.n() as f64
    }

    /// Inactive-unit KKT boundary at `lambda`.
    pub fn boundary(&self, u: usize, lambda: f64) -> f64 {
        self.multipliers[u] * self.spec.l1_level(lambda)
    }

    /// Per-observation curvature of the loss at the mean `mu`.
    fn weight(&self, mu: f64) -> f64 {
        match self.family {
            Family::Binomial => mu * (1.0 - mu),
            _ => mu,
        }
    }

    fn mean(&self, eta: f64) -> f64 {
        match self.family {
            Family::Binomial => 1.0 / (1.0 + (-eta).exp()),
            _ => eta.exp(),
        }
    }

    /// Mean negative log-likelihood of a linear predictor (GLM only).
    fn glm_loss(&self, eta: &[f64]) -> f64 {
        let total: f64 = match self.family {
            Family::Binomial => self.y.iter().zip(eta).map(|(y, e)| softplus(*e) - y * e).sum(),
            _ => self.y.iter().zip(eta).map(|(y, e)| e.exp() - y * e).sum(),
        };
        total / self.n() as f64
    }

    /// Penalty contribution of unit `u` with coefficients `b`.
    fn unit_penalty(&self, u: usize, b: &[f64], lambda: f64) -> f64 {
        let sq = b.iter().map(|x| x * x).sum::<f64>();
        let mut pen = 0.5 * self.spec.ridge_level(lambda) * sq;
        if sq > 0.0 {
            pen += penalty_value(sq.sqrt(), self.multipliers[u] * self.spec.l1_level(lambda), &self.spec);
        }
        pen
    }

    /// Upper bound on the largest eigenvalue of `X_g'WX_g/n` at the current
    /// fit (exact for a single column).
    fn local_curvature(&self, state: &SolverState, range: Range<usize>) -> f64 {
        let n = self.n() as f64;
        let w: Vec<f64> = self
            .y
            .iter()
            .zip(&state.residual)
            .map(|(y, r)| self.weight(y - r))
            .collect();
        let cols: Vec<&[f64]> = range.map(|j| self.x.col(j)).collect();
        // Gershgorin row sums
        let mut bound = 0.0f64;
        for a in &cols {
            let mut row = 0.0;
            for b in &cols {
                row += a.iter().zip(*b).zip(&w).map(|((x, z), w)| w * x * z).sum::<f64>().abs();
            }
            bound = bound.max(row / n);
        }
        bound
    }

    /// Move the coefficients of `range` by `deltas` and the intercept by
    /// `d0` if the penalized objective does not increase (or `force` is set).
    fn try_move(
        &self,
        state: &mut SolverState,
        range: Range<usize>,
        deltas: &[f64],
        d0: f64,
        pen_change: f64,
        force: bool,
    ) -> bool {
        let mut trial = std::mem::take(&mut state.scratch);
        trial.clear();
        trial.extend(state.eta.iter().map(|e| e + d0));
        for (j, &d) in range.clone().zip(deltas) {
            if d != 0.0 {
                axpy(d, self.x.col(j), &mut trial);
            }
        }
        let loss = self.glm_loss(&trial);
        let slack = 1e-13 * state.loss.abs().max(1.0);
        if !loss.is_finite() || (!force && loss + pen_change > state.loss + slack) {
            state.scratch = trial;
            return false;
        }
        state.scratch = std::mem::replace(&mut state.eta, trial);
        for (j, &d) in range.zip(deltas) {
            state.beta[j] += d;
        }
        state.intercept += d0;
        state.loss = loss;
        self.score_residual(state);
        true
    }

    fn score_residual(&self, state: &mut SolverState) {
        for ((r, &y), &e) in state.residual.iter_mut().zip(self.y).zip(&state.eta) {
            *r = y - self.mean(e);
        }
    }

    /// Single-coordinate update of column `j`; returns the absolute change.
    pub fn cd_update(&self, state: &mut SolverState, j: usize) -> f64 {
        if self.family.is_glm() {
            return self.glm_update(state, j..j + 1, 1.0);
        }
        let old = state.beta[j];
        let z = self.correlation(state, j) + old;
        let lambda = state.lambda;
        let new = weighted_threshold(z, 1.0, self.spec.l1_level(lambda), &self.spec, self.spec.ridge_level(lambda));
        let delta = new - old;
        if delta != 0.0 {
            state.beta[j] = new;
            axpy(-delta, self.x.col(j), &mut state.residual);
        }
        delta.abs()
    }

    /// Block update of unit `u`; returns the largest coordinate change.
    pub fn block_update(&self, state: &mut SolverState, u: usize) -> f64 {
        let range = self.units[u].clone();
        if self.family.is_glm() {
            return self.glm_update(state, range, self.multipliers[u]);
        }
        if range.len() == 1 && self.multipliers[u] == 1.0 {
            return self.cd_update(state, range.start);
        }
        let z: Vec<f64> = range
            .clone()
            .map(|j| self.correlation(state, j) + state.beta[j])
            .collect();
        let new = self.threshold_unit(&z, 1.0, self.multipliers[u] * self.spec.l1_level(state.lambda), state.lambda);
        let mut max_change = 0.0f64;
        for (k, j) in range.enumerate() {
            let delta = new[k] - state.beta[j];
            if delta != 0.0 {
                state.beta[j] = new[k];
                axpy(-delta, self.x.col(j), &mut state.residual);
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Minimizer of `v/2 ||b - z/v||^2 + J(||b||)` for a unit.
    fn threshold_unit(&self, z: &[f64], v: f64, lambda_u: f64, lambda: f64) -> Vec<f64> {
        let ridge = self.spec.ridge_level(lambda);
        if z.len() == 1 {
            return vec![weighted_threshold(z[0], v, lambda_u, &self.spec, ridge)];
        }
        let zn = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = if zn > 0.0 {
            weighted_threshold(zn, v, lambda_u, &self.spec, ridge) / zn
        } else {
            0.0
        };
        z.iter().map(|a| scale * a).collect()
    }

    /// GLM update of one unit: a thresholded Newton step at the local
    /// curvature, accepted only if the objective does not increase.
    /// Otherwise logistic fits take the step under the global curvature
    /// bound 1/4, which always descends; Poisson fits halve the step.
    fn glm_update(&self, state: &mut SolverState, range: Range<usize>, multiplier: f64) -> f64 {
        let lambda = state.lambda;
        let lambda_u = multiplier * self.spec.l1_level(lambda);
        let c: Vec<f64> = range.clone().map(|j| self.correlation(state, j)).collect();
        let old: Vec<f64> = range.clone().map(|j| state.beta[j]).collect();
        let cn = c.iter().map(|a| a * a).sum::<f64>().sqrt();
        if old.iter().all(|&b| b == 0.0) && cn <= lambda_u {
            return 0.0;
        }
        let u = self.unit_of(range.start);
        let pen_old = self.unit_penalty(u, &old, lambda);
        let mut v = self.local_curvature(state, range.clone()).max(MIN_CURVATURE);
        if self.family == Family::Binomial {
            v = v.min(LOGISTIC_BOUND);
        }
        let step = |v: f64| -> Vec<f64> {
            let z: Vec<f64> = c.iter().zip(&old).map(|(c, b)| c + v * b).collect();
            let new = self.threshold_unit(&z, v, lambda_u, lambda);
            new.iter().zip(&old).map(|(a, b)| a - b).collect()
        };
        let mut deltas = step(v);
        if deltas.iter().all(|&d| d == 0.0) {
            return 0.0;
        }
        let change = |d: &[f64]| {
            let new: Vec<f64> = old.iter().zip(d).map(|(b, d)| b + d).collect();
            self.unit_penalty(u, &new, lambda) - pen_old
        };
        let max_abs = |d: &[f64]| d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if self.try_move(state, range.clone(), &deltas, 0.0, change(&deltas), false) {
            return max_abs(&deltas);
        }
        if self.family == Family::Binomial {
            deltas = step(LOGISTIC_BOUND);
            if deltas.iter().all(|&d| d == 0.0) {
                return 0.0;
            }
            let moved = self.try_move(state, range, &deltas, 0.0, change(&deltas), true);
            return if moved { max_abs(&deltas) } else { 0.0 };
        }
        for _ in 0..MAX_HALVINGS {
            deltas.iter_mut().for_each(|d| *d *= 0.5);
            if self.try_move(state, range.clone(), &deltas, 0.0, change(&deltas), false) {
                return max_abs(&deltas);
            }
        }
        0.0
    }

    fn unit_of(&self, j: usize) -> usize {
        if self.grouped {
            self.units.partition_point(|r| r.end <= j)
        } else {
            j
        }
    }

    /// Newton step on the intercept with the same safeguards as
    /// [`Problem::glm_update`].
    fn update_intercept(&self, state: &mut SolverState) -> f64 {
        if !self.family.is_glm() {
            return 0.0;
        }
        let n = self.n() as f64;
        let c0 = state.residual.iter().sum::<f64>() / n;
        if c0 == 0.0 {
            return 0.0;
        }
        let v0 = (self
            .y
            .iter()
            .zip(&state.residual)
            .map(|(y, r)| self.weight(y - r))
            .sum::<f64>()
            / n)
            .max(MIN_CURVATURE);
        let empty = self.units.len()..self.units.len();
        let mut d0 = c0 / v0;
        if self.try_move(state, empty.clone(), &[], d0, 0.0, false) {
            return d0.abs();
        }
        if self.family == Family::Binomial {
            d0 = c0 / LOGISTIC_BOUND;
            return if self.try_move(state, empty, &[], d0, 0.0, true) { d0.abs() } else { 0.0 };
        }
        for _ in 0..MAX_HALVINGS {
            d0 *= 0.5;
            if self.try_move(state, empty.clone(), &[], d0, 0.0, false) {
                return d0.abs();
            }
        }
        0.0
    }

    /// Cycle over `state.target` until the largest change in a cycle drops
    /// below `state.tol`. Returns the number of cycles.
    pub fn solve_fixed_lambda(&self, state: &mut SolverState) -> Result<usize> {
        if state.target.is_empty() && !self.family.is_glm() {
            return Ok(0);
        }
        let target = std::mem::take(&mut state.target);
        let mut result = Err(Error::NotConverged {
            lambda_index: 0,
            iterations: state.max_iter,
        });
        for iter in 1..=state.max_iter {
            let mut max_change = self.update_intercept(state);
            for &u in &target {
                max_change = max_change.max(self.block_update(state, u));
            }
            if max_change < state.tol {
                result = Ok(iter);
                break;
            }
        }
        state.target = target;
        result
    }

    /// Recompute the exact score residual and loss from the linear
    /// predictor, rejecting saturated fits.
    fn refresh(&self, state: &mut SolverState) -> Result<()> {
        if !self.family.is_glm() {
            return Ok(());
        }
        if state.eta.iter().any(|e| e.abs() > ETA_LIMIT || !e.is_finite()) {
            return Err(Error::Saturated {
                lambda_index: 0,
                limit: ETA_LIMIT,
            });
        }
        self.score_residual(state);
        state.loss = self.glm_loss(&state.eta);
        Ok(())
    }

    fn penalty(&self, beta: &[f64], lambda: f64) -> f64 {
        self.units
            .iter()
            .enumerate()
            .map(|(u, r)| self.unit_penalty(u, &beta[r.clone()], lambda))
            .sum()
    }

    /// Solve at fixed lambda over the target set. GLM fits keep the exact
    /// score residual throughout, so the same cycle loop applies; the
    /// predictor is checked for saturation before and after.
    pub fn glm_outer(&self, state: &mut SolverState) -> Result<usize> {
        self.refresh(state)?;
        let cycles = self.solve_fixed_lambda(state)?;
        self.refresh(state)?;
        Ok(cycles)
    }

    /// Like [`Problem::glm_outer`], then tightens the convergence tolerance
    /// until every unit of the target set meets `kkt_tol` (or the tolerance
    /// bottoms out). The caller's tolerance is restored afterwards.
    pub fn solve_certified(&self, state: &mut SolverState, kkt_tol: f64) -> Result<usize> {
        let tol = state.tol;
        let mut cycles = self.glm_outer(state)?;
        while state.tol > MIN_TOL {
            let target = std::mem::take(&mut state.target);
            let worst = self.kkt_residuals(state, &target).into_iter().fold(0.0, f64::max);
            state.target = target;
            if worst <= kkt_tol {
                break;
            }
            state.tol *= 0.01;
            cycles += self.glm_outer(state)?;
        }
        state.tol = tol;
        Ok(cycles)
    }

    /// Penalized objective at `(beta, intercept)` and `lambda`.
    pub fn objective(&self, beta: &[f64], intercept: f64, lambda: f64) -> f64 {
        loss(self.x, self.y, self.family, beta, intercept) + self.penalty(beta, lambda)
    }

    /// Largest KKT residual over the listed units, one entry per unit.
    ///
    /// Active units: distance between the residual correlation and the
    /// penalty gradient. Inactive units: excess of the correlation magnitude
    /// over the boundary (zero when inside).
    pub fn kkt_residuals(&self, state: &SolverState, units: &[usize]) -> Vec<f64> {
        let lambda = state.lambda;
        let l1 = self.spec.l1_level(lambda);
        let ridge = self.spec.ridge_level(lambda);
        units
            .iter()
            .map(|&u| {
                let range = self.units[u].clone();
                let norm = range.clone().map(|j| state.beta[j] * state.beta[j]).sum::<f64>().sqrt();
                let lam_u = self.multipliers[u] * l1;
                if norm == 0.0 {
                    (self.score(state, u) - lam_u).max(0.0)
                } else {
                    let d = derivative_unchecked(norm, lam_u, &self.spec);
                    range
                        .map(|j| {
                            let c = self.correlation(state, j) - ridge * state.beta[j];
                            let g = d * state.beta[j] / norm;
                            (c - g) * (c - g)
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            })
            .collect()
    }
}

pub(crate) fn loss(x: &Matrix, y: &[f64], family: Family, beta: &[f64], intercept: f64) -> f64 {
    let n = x.nrows() as f64;
    let xb = x.mul_vec(beta);
    match family {
        Family::Gaussian => {
            y.iter().zip(&xb).map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / (2.0 * n)
        }
        Family::Binomial => {
            y.iter()
                .zip(&xb)
                .map(|(&y, &f)| {
                    let eta = f + intercept;
                    softplus(eta) - y * eta
                })
                .sum::<f64>()
                / n
        }
        Family::Poisson => {
            y.iter()
                .zip(&xb)
                .map(|(&y, &f)| {
                    let eta = f + intercept;
                    eta.exp() - y * eta
                })
                .sum::<f64>()
                / n
        }
    }
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mutable solver state for one path fit.
#[derive(Clone, Debug)]
pub struct SolverState {
    /// Coefficients on the problem's (standardized) scale.
    pub beta: Vec<f64>,
    /// Intercept on the standardized scale; for gaussian problems the
    /// response is centered and this stays at zero.
    pub intercept: f64,
    /// Weighted working residual; `y - mu(eta)` whenever KKT is inspected.
    pub residual: Vec<f64>,
    /// Linear predictor (GLM only, empty for gaussian).
    pub eta: Vec<f64>,
    /// Units cycled over by [`Problem::solve_fixed_lambda`], ascending.
    pub target: Vec<usize>,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Current mean negative log-likelihood (GLM only).
    loss: f64,
    scratch: Vec<f64>,
}

impl SolverState {
    pub fn active_columns(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }

    /// Recompute the score residual from scratch.
    pub fn recomputed_residual(&self, problem: &Problem<'_>) -> Vec<f64> {
        let xb = problem.x.mul_vec(&self.beta);
        match problem.family {
            Family::Gaussian => problem.y.iter().zip(&xb).map(|(y, f)| y - f).collect(),
            Family::Binomial => problem
                .y
                .iter()
                .zip(&xb)
                .map(|(y, f)| y - 1.0 / (1.0 + (-(f + self.intercept)).exp()))
                .collect(),
            Family::Poisson => problem
                .y
                .iter()
                .zip(&xb)
                .map(|(y, f)| y - (f + self.intercept).exp())
                .collect(),
        }
    }
}

/// Penalized objective of a standardized-scale fit.
///
/// Gaussian responses are centered, so the intercept does not enter.
pub fn objective(beta: &[f64], intercept: f64, sd: &StandardizedDesign, spec: &PenaltySpec, lambda: f64) -> f64 {
    let problem = Problem {
        x: &sd.xs,
        y: &sd.y,
        family: sd.family,
        spec: *spec,
        units: (0..sd.p()).map(|j| j..j + 1).collect(),
        multipliers: vec![1.0; sd.p()],
        usable: vec![true; sd.p()],
        grouped: false,
    };
    problem.objective(beta, intercept, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{standardize, Dataset};
    use crate::penalty::PenaltyFamily;

    /// Columns of a scaled Hadamard-type design: x'x/n = I.
    fn orthonormal(n: usize, p: usize) -> Matrix {
        assert!(n.is_power_of_two() && p < n);
        let mut m = Matrix::zeros(n, p);
        for j in 0..p {
            for i in 0..n {
                // Walsh functions, skipping the constant one so columns are centered
                let bits = (i & (j + 1)).count_ones();
                m.set(i, j, if bits % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        m
    }

    fn design(x: Matrix, y: Vec<f64>, family: Family) -> StandardizedDesign {
        standardize(&Dataset::new(x, y, family, None).unwrap())
    }

    #[test]
    fn single_column_mcp_update_matches_firm_threshold() {
        // x'y/n = 2 on a unit-scaled column
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]]);
        let sd = design(x, vec![2.0, -2.0, 2.0, -2.0], Family::Gaussian);
        let problem = Problem::new(&sd, PenaltySpec::mcp(3.0)).unwrap();
        let mut state = problem.null_state(SolverSettings::default()).unwrap();
        state.lambda = 1.0;
        problem.cd_update(&mut state, 0);
        assert!((state.beta[0] - 1.5).abs() < 1e-14);
        for (r, y) in state.residual.iter().zip(&sd.y) {
            assert!((r - 0.25 * y).abs() < 1e-14);
        }
    }

    #[test]
    fn sub_threshold_update_is_a_fixed_point() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]]);
        let sd = design(x, vec![0.5, -0.5, 0.5, -0.5], Family::Gaussian);
        let problem = Problem::new(&sd, PenaltySpec::mcp(3.0)).unwrap();
        let mut state = problem.null_state(SolverSettings::default()).unwrap();
        state.lambda = 1.0;
        let before = state.residual.clone();
        assert_eq!(problem.cd_update(&mut state, 0), 0.0);
        assert_eq!(state.beta[0], 0.0);
        assert_eq!(state.residual, before);
    }

    #[test]
    fn lasso_update_soft_thresholds() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]);
        let sd = design(x, vec![0.7, -0.7], Family::Gaussian);
        let problem = Problem::new(&sd, PenaltySpec::lasso()).unwrap();
        let mut state = problem.null_state(SolverSettings::default()).unwrap();
        state.lambda = 0.5;
        problem.cd_update(&mut state, 0);
        assert!((state.beta[0] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn empty_target_leaves_state_unchanged() {
        let x = orthonormal(8, 3);
        let sd = design(x, (0..8).map(|i| i as f64).collect(), Family::Gaussian);
        let problem = Problem::new(&sd, PenaltySpec::scad(4.0)).unwrap();
        let mut state = problem.null_state(SolverSettings::default()).unwrap();
        state.lambda = 0.1;
        let before = state.clone();
        assert_eq!(problem.solve_fixed_lambda(&mut state).unwrap(), 0);
        assert_eq!(state.beta, before.beta);
        assert_eq!(state.residual, before.residual);
    }

    #[test]
    fn orthonormal_design_converges_in_one_productive_cycle() {
        let x = orthonormal(16, 5);
        let y: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 1.3 * (i % 3) as f64).collect();
        let sd = design(x, y, Family::Gaussian);
        let problem = Problem::new(&sd, PenaltySpec::mcp(3.0)).unwrap();
        let mut state = problem.null_state(SolverSettings::default()).unwrap();
        state.lambda = 0.3;
        state.target = (0..5).collect();
        // first cycle moves, second confirms
        assert_eq!(problem.solve_fixed_lambda(&mut state).unwrap(), 2);
    }

    #[test]
    fn objective_of_null_fit_is_half_mean_square() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![4.0]]);
        let sd = design(x, vec![1.0, 2.0, 6.0], Family::Gaussian);
        let q = objective(&[0.0], 0.0, &sd, &PenaltySpec::mcp(3.0), 0.5);
        let ss: f64 = sd.y.iter().map(|v| v * v).sum();
        assert!((q - ss / 6.0).abs() < 1e-14);
    }

    #[test]
    fn mnet_with_alpha_one_is_mcp() {
        let x = Matrix::from_rows(&[vec![1.0, 0.2], vec![2.0, -1.0], vec![4.0, 0.5]]);
        let sd = design(x, vec![1.0, 2.0, 6.0], Family::Gaussian);
        let beta = [0.4, -2.0];
        let a = objective(&beta, 0.0, &sd, &PenaltySpec::mnet(3.0, 1.0), 0.5);
        let b = objective(&beta, 0.0, &sd, &PenaltySpec::new(PenaltyFamily::Mcp, 3.0, 1.0).unwrap(), 0.5);
        assert_eq!(a, b);
    }

    #[test]
    fn binomial_null_state_is_logit_of_mean() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![5.0]]);
        let sd = design(x, vec![1.0, 0.0, 1.0, 1.0], Family::Binomial);
        let problem = Problem::new(&sd, PenaltySpec::lasso()).unwrap();
        let state = problem.null_state(SolverSettings::default()).unwrap();
        assert!((state.intercept - 3.0f64.ln()).abs() < 1e-14);
        let total: f64 = state.residual.iter().sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn single_class_binomial_is_rejected() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let sd = design(x, vec![1.0, 1.0], Family::Binomial);
        let problem = Problem::new(&sd, PenaltySpec::lasso()).unwrap();
        assert!(problem.null_state(SolverSettings::default()).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
