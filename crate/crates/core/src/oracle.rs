//! Solver-independent reference computations for the test suite: closed-form
//! paths on orthonormal designs, grid minimization, tiny-instance brute force
//! and finite-difference stationarity checks.

use serde::Serialize;

use crate::data::{Family, StandardizedDesign};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::penalty::{penalty_value, PenaltyFamily, PenaltySpec};
use crate::solver::softplus;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub max_deviation: f64,
    pub failing: Vec<usize>,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }

    /// Compare two equally shaped sequences entrywise.
    pub fn compare(actual: &[f64], expected: &[f64], tolerance: f64) -> OracleReport {
        let mut max_deviation = if actual.len() == expected.len() { 0.0f64 } else { f64::INFINITY };
        let mut failing = Vec::new();
        for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
            let d = (a - e).abs();
            let d = if d.is_nan() { f64::INFINITY } else { d };
            max_deviation = max_deviation.max(d);
            if d > tolerance {
                failing.push(i);
            }
        }
        OracleReport {
            max_deviation,
            failing,
            tolerance,
        }
    }
}

fn univariate_objective(b: f64, z: f64, lambda: f64, spec: &PenaltySpec, ridge: f64) -> f64 {
    0.5 * (1.0 + ridge) * b * b - z * b + penalty_value(b.abs(), lambda, spec)
}

/// Minimizer of `b^2/2 - z b + J(|b|) + ridge b^2/2` over `[-2|z|, 2|z|]`.
///
/// A coarse scan (step at most 1e-3) locates every grid-local minimum, and
/// each is rescanned at resolution `step` within one coarse step.
pub fn univariate_grid_min(z: f64, lambda: f64, spec: &PenaltySpec, ridge: f64, step: f64) -> f64 {
    let bound = 2.0 * z.abs();
    if bound == 0.0 {
        return 0.0;
    }
    let coarse = step.max(1e-3).min(bound / 8.0).max(step);
    let half = (bound / coarse).ceil() as i64;
    let f = |b: f64| univariate_objective(b, z, lambda, spec, ridge);
    let values: Vec<f64> = (-half..=half).map(|i| f(i as f64 * coarse)).collect();
    let mut best = 0.0f64;
    let mut best_val = f(0.0);
    for i in 0..values.len() {
        let left = if i > 0 { values[i - 1] } else { f64::INFINITY };
        let right = values.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if values[i] > left || values[i] > right {
            continue;
        }
        let centre = (i as i64 - half) as f64 * coarse;
        let fine = (coarse / step).ceil() as i64;
        for k in -fine..=fine {
            let b = centre + k as f64 * step;
            let v = f(b);
            if v < best_val || (v == best_val && b.abs() < best.abs()) {
                best = b;
                best_val = v;
            }
        }
    }
    best
}

/// Closed-form scalar estimate on an orthonormal design for one variable.
///
/// For group penalties `z` is the group norm and the result is the norm of
/// the estimate.
pub fn orthogonal_estimate(z: f64, lambda: f64, spec: &PenaltySpec) -> f64 {
    let az = z.abs();
    let s = z.signum();
    let g = spec.gamma;
    let soft = |t: f64, l: f64| (t - l).max(0.0);
    match spec.family {
        PenaltyFamily::Lasso => s * soft(az, lambda),
        PenaltyFamily::Mcp | PenaltyFamily::GroupMcp => {
            if az > g * lambda {
                z
            } else {
                s * g / (g - 1.0) * soft(az, lambda)
            }
        }
        PenaltyFamily::Scad | PenaltyFamily::GroupScad => {
            if az > g * lambda {
                z
            } else if az <= 2.0 * lambda {
                s * soft(az, lambda)
            } else {
                s * (g - 1.0) / (g - 2.0) * soft(az, lambda * g / (g - 1.0))
            }
        }
        PenaltyFamily::Mnet => {
            let l1 = spec.alpha * lambda;
            let l2 = (1.0 - spec.alpha) * lambda;
            if az > g * l1 * (1.0 + l2) {
                z / (1.0 + l2)
            } else {
                s * soft(az, l1) / (1.0 + l2 - 1.0 / g)
            }
        }
    }
}

/// Closed-form coefficient path on an orthonormal design from the marginal
/// least-squares values `z_j = x_j'y/n`.
pub fn orthogonal_path_oracle(z: &[f64], lambdas: &[f64], spec: &PenaltySpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if spec.is_group() {
        return Err(Error::Oracle("use orthogonal_estimate on group norms for group penalties".into()));
    }
    Ok(lambdas
        .iter()
        .map(|&l| z.iter().map(|&zj| orthogonal_estimate(zj, l, spec)).collect())
        .collect())
}

/// `z = X'y/n`, after checking `X'X/n = I` to within `tol`.
pub fn orthonormal_z(x: &Matrix, y: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = x.nrows() as f64;
    let p = x.ncols();
    for a in 0..p {
        for b in a..p {
            let g = dot(x.col(a), x.col(b)) / n;
            let target = if a == b { 1.0 } else { 0.0 };
            if (g - target).abs() > tol {
                return Err(Error::Oracle(format!(
                    "design is not orthonormal: (X'X/n)[{a},{b}] = {g}"
                )));
            }
        }
    }
    Ok((0..p).map(|j| dot(x.col(j), y) / n).collect())
}

/// Mnet path computed as plain MCP on the augmented design
/// `[X; sqrt(n lambda_2) I]` with response `[y; 0]`, by cyclic coordinate
/// descent with warm starts. The loss keeps the original `1/(2n)` scaling.
pub fn mnet_augmented_path(sd: &StandardizedDesign, spec: &PenaltySpec, lambdas: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if spec.family != PenaltyFamily::Mnet || sd.family != Family::Gaussian {
        return Err(Error::Oracle("augmented design oracle needs a gaussian mnet problem".into()));
    }
    let (n, p) = (sd.n(), sd.p());
    let nf = n as f64;
    let g = spec.gamma;
    let mut beta = vec![0.0; p];
    let mut path = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let l1 = spec.alpha * lambda;
        let root = (nf * (1.0 - spec.alpha) * lambda).sqrt();
        let mut xa = Matrix::zeros(n + p, p);
        for j in 0..p {
            xa.col_mut(j)[..n].copy_from_slice(sd.xs.col(j));
            xa.set(n + j, j, root);
        }
        let mut r: Vec<f64> = sd.y.iter().copied().chain(std::iter::repeat_n(0.0, p)).collect();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (ri, xi) in r.iter_mut().zip(xa.col(j)) {
                    *ri -= b * xi;
                }
            }
        }
        let v: Vec<f64> = (0..p).map(|j| dot(xa.col(j), xa.col(j)) / nf).collect();
        let mut converged = false;
        for _ in 0..100_000 {
            let mut change = 0.0f64;
            for j in 0..p {
                let z = dot(xa.col(j), &r) / nf + v[j] * beta[j];
                // univariate MCP with curvature v: soft threshold shrunk by 1/(v - 1/g) up to g*l1*v
                let az = z.abs();
                let b = if az <= l1 {
                    0.0
                } else if az <= g * l1 * v[j] {
                    z.signum() * (az - l1) / (v[j] - 1.0 / g)
                } else {
                    z / v[j]
                };
                let d = b - beta[j];
                if d != 0.0 {
                    for (ri, xi) in r.iter_mut().zip(xa.col(j)) {
                        *ri -= d * xi;
                    }
                    beta[j] = b;
                    change = change.max(d.abs());
                }
            }
            if change < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Oracle(format!("augmented coordinate descent did not converge at lambda {lambda}")));
        }
        path.push(beta.clone());
    }
    Ok(path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub minimizer: Vec<f64>,
    pub value: f64,
    /// Refined grid-local minima, best first.
    pub local_minima: Vec<(Vec<f64>, f64)>,
}

/// Grid search for the global minimizer of the gaussian objective with
/// `p <= 3` over the box `[-B, B]^p`, `B = 2 max |x_j'y/n|`.
///
/// The coarse step is 1e-3 for `p = 1` and is capped at 2000 and 160 points
/// per axis for `p = 2, 3`; every coarse local minimum is then refined by
/// successive tenfold zooms down to a step of 1e-5.
pub fn brute_force_small(sd: &StandardizedDesign, spec: &PenaltySpec, lambda: f64) -> Result<BruteForce> {
    let p = sd.p();
    if p == 0 || p > 3 {
        return Err(Error::Oracle(format!("brute force needs 1 <= p <= 3, got {p}")));
    }
    if sd.family != Family::Gaussian {
        return Err(Error::Oracle("brute force supports the gaussian family only".into()));
    }
    if spec.is_group() {
        return Err(Error::Oracle("brute force supports ungrouped penalties only".into()));
    }
    let n = sd.n() as f64;
    let c: Vec<f64> = (0..p).map(|j| dot(sd.xs.col(j), &sd.y) / n).collect();
    let gram: Vec<Vec<f64>> = (0..p)
        .map(|a| (0..p).map(|b| dot(sd.xs.col(a), sd.xs.col(b)) / n).collect())
        .collect();
    let yy = dot(&sd.y, &sd.y) / n;
    let l1 = spec.l1_level(lambda);
    let ridge = spec.ridge_level(lambda);
    let q = |b: &[f64]| -> f64 {
        let mut v = 0.5 * yy;
        for a in 0..p {
            v -= b[a] * c[a];
            for k in 0..p {
                v += 0.5 * b[a] * gram[a][k] * b[k];
            }
            v += penalty_value(b[a].abs(), l1, spec) + 0.5 * ridge * b[a] * b[a];
        }
        v
    };

    let bound = 2.0 * c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if bound == 0.0 {
        let zero = vec![0.0; p];
        let v = q(&zero);
        return Ok(BruteForce {
            minimizer: zero.clone(),
            value: v,
            local_minima: vec![(zero, v)],
        });
    }
    let max_points = [usize::MAX, 2000, 160][p - 1];
    let half = ((bound / 1e-3).ceil() as usize).min(max_points / 2).max(2);
    let h = bound / half as f64;
    let side = 2 * half + 1;
    let total = side.pow(p as u32);
    let point = |mut idx: usize, out: &mut [f64]| {
        for o in out.iter_mut() {
            *o = ((idx % side) as f64 - half as f64) * h;
            idx /= side;
        }
    };
    let mut values = vec![0.0; total];
    let mut b = vec![0.0; p];
    for (idx, v) in values.iter_mut().enumerate() {
        point(idx, &mut b);
        *v = q(&b);
    }

    let strides: Vec<usize> = (0..p).map(|d| side.pow(d as u32)).collect();
    let mut minima: Vec<(Vec<f64>, f64)> = Vec::new();
    for idx in 0..total {
        let v = values[idx];
        let mut is_min = true;
        for (d, &stride) in strides.iter().enumerate() {
            let coord = (idx / stride) % side;
            if coord > 0 && values[idx - stride] < v {
                is_min = false;
            }
            if coord + 1 < side && values[idx + stride] < v {
                is_min = false;
            }
            let _ = d;
        }
        if !is_min {
            continue;
        }
        point(idx, &mut b);
        let refined = refine(&q, b.clone(), h);
        let val = q(&refined);
        if !minima
            .iter()
            .any(|(m, _)| m.iter().zip(&refined).all(|(a, c)| (a - c).abs() < 1e-4))
        {
            minima.push((refined, val));
        }
    }
    minima.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (minimizer, value) = minima[0].clone();
    Ok(BruteForce {
        minimizer,
        value,
        local_minima: minima,
    })
}

fn refine(q: &impl Fn(&[f64]) -> f64, start: Vec<f64>, coarse: f64) -> Vec<f64> {
    let p = start.len();
    let mut centre = start;
    let mut h = coarse / 10.0;
    let mut trial = vec![0.0; p];
    loop {
        let mut best = centre.clone();
        let mut best_val = q(&centre);
        let side = 21usize;
        for mut idx in 0..side.pow(p as u32) {
            for (d, t) in trial.iter_mut().enumerate() {
                *t = centre[d] + ((idx % side) as f64 - 10.0) * h;
                idx /= side;
            }
            let v = q(&trial);
            if v < best_val {
                best_val = v;
                best.copy_from_slice(&trial);
            }
        }
        centre = best;
        if h <= 1e-5 {
            return centre;
        }
        h /= 10.0;
    }
}

fn loss_at(y: &[f64], eta: &[f64], family: Family) -> f64 {
    let n = y.len() as f64;
    let s: f64 = match family {
        Family::Gaussian => y.iter().zip(eta).map(|(y, e)| 0.5 * (y - e) * (y - e)).sum(),
        Family::Binomial => y.iter().zip(eta).map(|(y, e)| softplus(*e) - y * e).sum(),
        Family::Poisson => y.iter().zip(eta).map(|(y, e)| e.exp() - y * e).sum(),
    };
    s / n
}

/// One-sided directional derivatives of the objective along every
/// coordinate (step 1e-5) must all be at least `-1e-6`.
///
/// Applies to ungrouped penalties on a standardized design; the gaussian
/// intercept is ignored because the response is centered.
pub fn finite_diff_check(
    beta: &[f64],
    intercept: f64,
    sd: &StandardizedDesign,
    spec: &PenaltySpec,
    lambda: f64,
) -> Result<OracleReport> {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-6;
    if beta.len() != sd.p() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for {} columns", beta.len(), sd.p())));
    }
    if spec.is_group() {
        return Err(Error::Oracle("finite differences support ungrouped penalties only".into()));
    }
    let offset = if sd.family == Family::Gaussian { 0.0 } else { intercept };
    let mut eta = sd.xs.mul_vec(beta);
    for e in &mut eta {
        *e += offset;
    }
    let base_loss = loss_at(&sd.y, &eta, sd.family);
    let l1 = spec.l1_level(lambda);
    let ridge = spec.ridge_level(lambda);
    let pen = |b: f64| penalty_value(b.abs(), l1, spec) + 0.5 * ridge * b * b;
    let mut shifted = eta.clone();
    let mut max_deviation = 0.0f64;
    let mut failing = Vec::new();
    for j in 0..sd.p() {
        if sd.constant[j] {
            continue;
        }
        let col = sd.xs.col(j);
        let mut worst = 0.0f64;
        for dir in [1.0, -1.0] {
            for ((s, e), x) in shifted.iter_mut().zip(&eta).zip(col) {
                *s = e + dir * H * x;
            }
            let dq = loss_at(&sd.y, &shifted, sd.family) - base_loss + pen(beta[j] + dir * H) - pen(beta[j]);
            worst = worst.max(-dq / H);
        }
        max_deviation = max_deviation.max(worst);
        if worst > TOL {
            failing.push(j);
        }
    }
    Ok(OracleReport {
        max_deviation,
        failing,
        tolerance: TOL,
    })
}
