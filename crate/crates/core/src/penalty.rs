//! Scalar penalty machinery: penalty values, derivatives, univariate
//! thresholding operators and the slope-bound factors used by the screening
//! rules.
//!
//! Every thresholding routine solves the one-dimensional problem
//!
//! ```text
//! minimize_b  (v/2) b^2 - z b + J(|b|) + (ridge/2) b^2
//! ```
//!
//! With `v = 1` this is `(1/2)(b - z)^2 + J(|b|) + (ridge/2) b^2`, the
//! coordinate problem of a standardized design. Other curvatures come from
//! GLM majorization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Lasso,
    Mcp,
    Scad,
    /// MCP plus a ridge term, mixed by `alpha`.
    Mnet,
    #[serde(rename = "gmcp")]
    GroupMcp,
    #[serde(rename = "gscad")]
    GroupScad,
}

impl PenaltyFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyFamily::Lasso => "lasso",
            PenaltyFamily::Mcp => "mcp",
            PenaltyFamily::Scad => "scad",
            PenaltyFamily::Mnet => "mnet",
            PenaltyFamily::GroupMcp => "gmcp",
            PenaltyFamily::GroupScad => "gscad",
        }
    }

    pub fn is_group(self) -> bool {
        matches!(self, PenaltyFamily::GroupMcp | PenaltyFamily::GroupScad)
    }

    /// Default concavity: 3 for MCP-type penalties, 4 for SCAD-type.
    pub fn default_gamma(self) -> f64 {
        match self {
            PenaltyFamily::Scad | PenaltyFamily::GroupScad => 4.0,
            _ => 3.0,
        }
    }
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(PenaltyFamily::Lasso),
            "mcp" => Ok(PenaltyFamily::Mcp),
            "scad" => Ok(PenaltyFamily::Scad),
            "mnet" => Ok(PenaltyFamily::Mnet),
            "gmcp" | "group-mcp" | "grmcp" => Ok(PenaltyFamily::GroupMcp),
            "gscad" | "group-scad" | "grscad" => Ok(PenaltyFamily::GroupScad),
            other => Err(Error::InvalidPenalty(format!("unknown penalty {other:?}"))),
        }
    }
}

/// The shape of the univariate penalty once grouping and the ridge part are
/// stripped away.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Lasso,
    Mcp,
    Scad,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub gamma: f64,
    pub alpha: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, gamma: f64, alpha: f64) -> Result<Self> {
        let spec = PenaltySpec { family, gamma, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_default_gamma(family: PenaltyFamily) -> Self {
        PenaltySpec {
            family,
            gamma: family.default_gamma(),
            alpha: 1.0,
        }
    }

    pub fn lasso() -> Self {
        Self::with_default_gamma(PenaltyFamily::Lasso)
    }

    pub fn mcp(gamma: f64) -> Self {
        PenaltySpec {
            family: PenaltyFamily::Mcp,
            gamma,
            alpha: 1.0,
        }
    }

    pub fn scad(gamma: f64) -> Self {
        PenaltySpec {
            family: PenaltyFamily::Scad,
            gamma,
            alpha: 1.0,
        }
    }

    pub fn mnet(gamma: f64, alpha: f64) -> Self {
        PenaltySpec {
            family: PenaltyFamily::Mnet,
            gamma,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.gamma;
        match self.shape() {
            Shape::Mcp if !(g > 1.0) => {
                return Err(Error::InvalidPenalty(format!("{} needs gamma > 1, got {g}", self.family)))
            }
            Shape::Scad if !(g > 2.0) => {
                return Err(Error::InvalidPenalty(format!("{} needs gamma > 2, got {g}", self.family)))
            }
            _ => {}
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidPenalty(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.family != PenaltyFamily::Mnet && self.alpha != 1.0 {
            return Err(Error::InvalidPenalty(format!("alpha is only meaningful for mnet, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        match self.family {
            PenaltyFamily::Lasso => Shape::Lasso,
            PenaltyFamily::Mcp | PenaltyFamily::Mnet | PenaltyFamily::GroupMcp => Shape::Mcp,
            PenaltyFamily::Scad | PenaltyFamily::GroupScad => Shape::Scad,
        }
    }

    pub fn is_group(&self) -> bool {
        self.family.is_group()
    }

    /// Weight of the sparsity-inducing part at `lambda` (`alpha * lambda`).
    #[inline]
    pub fn l1_level(&self, lambda: f64) -> f64 {
        self.alpha * lambda
    }

    /// Ridge weight at `lambda` (`(1 - alpha) * lambda`, zero unless mnet).
    #[inline]
    pub fn ridge_level(&self, lambda: f64) -> f64 {
        (1.0 - self.alpha) * lambda
    }
}

/// `J_{lambda,gamma}(t)` for `t >= 0`, excluding any ridge part.
pub fn penalty_value(t: f64, lambda: f64, spec: &PenaltySpec) -> f64 {
    let t = t.abs();
    let g = spec.gamma;
    match spec.shape() {
        Shape::Lasso => lambda * t,
        Shape::Mcp => {
            if t <= g * lambda {
                lambda * t - t * t / (2.0 * g)
            } else {
                g * lambda * lambda / 2.0
            }
        }
        Shape::Scad => {
            if t <= lambda {
                lambda * t
            } else if t <= g * lambda {
                (g * lambda * (t - lambda) - (t * t - lambda * lambda) / 2.0) / (g - 1.0) + lambda * lambda
            } else {
                (g + 1.0) * lambda * lambda / 2.0
            }
        }
    }
}

/// `dJ/dt` at `t >= 0`; at `t = 0` this is the right derivative `lambda`.
pub fn penalty_derivative(t: f64, lambda: f64, spec: &PenaltySpec) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::InvalidArgument(format!("penalty derivative needs t >= 0, got {t}")));
    }
    Ok(derivative_unchecked(t, lambda, spec))
}

#[inline]
pub(crate) fn derivative_unchecked(t: f64, lambda: f64, spec: &PenaltySpec) -> f64 {
    let g = spec.gamma;
    match spec.shape() {
        Shape::Lasso => lambda,
        Shape::Mcp => (lambda - t / g).max(0.0),
        Shape::Scad => {
            if t <= lambda {
                lambda
            } else {
                ((g * lambda - t) / (g - 1.0)).max(0.0)
            }
        }
    }
}

/// Factor bounding how fast residual correlations move with lambda.
pub fn slope_bound(spec: &PenaltySpec) -> f64 {
    let g = spec.gamma;
    match spec.shape() {
        Shape::Lasso => 1.0,
        Shape::Mcp => g / (g - 1.0),
        Shape::Scad => g / (g - 2.0),
    }
}

/// Unit-curvature thresholding operator.
///
/// Errors when the spec is invalid or the univariate problem is not convex
/// (`gamma (1 + ridge) <= 1` for MCP, `(gamma - 1)(1 + ridge) <= 1` for SCAD).
pub fn threshold(z: f64, lambda: f64, spec: &PenaltySpec, ridge: f64) -> Result<f64> {
    spec.validate()?;
    if lambda < 0.0 || ridge < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold needs lambda >= 0 and ridge >= 0, got {lambda}, {ridge}"
        )));
    }
    let c = 1.0 + ridge;
    let g = spec.gamma;
    match spec.shape() {
        Shape::Mcp if g * c <= 1.0 => Err(Error::InvalidPenalty(format!(
            "gamma * (1 + ridge) = {} <= 1: univariate MCP problem is not convex",
            g * c
        ))),
        Shape::Scad if (g - 1.0) * c <= 1.0 => Err(Error::InvalidPenalty(format!(
            "(gamma - 1) * (1 + ridge) = {} <= 1: univariate SCAD problem is not convex",
            (g - 1.0) * c
        ))),
        _ => Ok(weighted_threshold(z, 1.0, lambda, spec, ridge)),
    }
}

/// Minimizer of `(v/2) b^2 - z b + J(|b|) + (ridge/2) b^2` over `b`.
///
/// Closed form when the problem is convex. Otherwise zero is kept whenever it
/// is a local minimizer (`|z| <= lambda`), and the global minimizer over the
/// per-region candidates is returned when it is not; ties go to the smaller
/// magnitude.
pub fn weighted_threshold(z: f64, v: f64, lambda: f64, spec: &PenaltySpec, ridge: f64) -> f64 {
    let az = z.abs();
    if az <= lambda || z == 0.0 {
        return 0.0;
    }
    let s = z.signum();
    let c = v + ridge;
    let g = spec.gamma;
    let t = match spec.shape() {
        Shape::Lasso => (az - lambda) / c,
        Shape::Mcp => {
            if c * g > 1.0 {
                if az <= g * lambda * c {
                    (az - lambda) / (c - 1.0 / g)
                } else {
                    az / c
                }
            } else {
                best_candidate(az, c, lambda, spec, &[0.0, g * lambda, (az / c).max(g * lambda)])
            }
        }
        Shape::Scad => {
            if c * (g - 1.0) > 1.0 {
                if az <= lambda * (1.0 + c) {
                    (az - lambda) / c
                } else if az <= g * lambda * c {
                    (az - g * lambda / (g - 1.0)) / (c - 1.0 / (g - 1.0))
                } else {
                    az / c
                }
            } else {
                let soft = ((az - lambda) / c).clamp(0.0, lambda);
                best_candidate(
                    az,
                    c,
                    lambda,
                    spec,
                    &[0.0, soft, lambda, g * lambda, (az / c).max(g * lambda)],
                )
            }
        }
    };
    s * t
}

fn best_candidate(az: f64, c: f64, lambda: f64, spec: &PenaltySpec, candidates: &[f64]) -> f64 {
    let f = |t: f64| 0.5 * c * t * t - az * t + penalty_value(t, lambda, spec);
    let mut best = candidates[0];
    let mut best_val = f(best);
    for &t in &candidates[1..] {
        let val = f(t);
        if val < best_val || (val == best_val && t < best) {
            best = t;
            best_val = val;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::univariate_grid_min;
    use proptest::prelude::*;

    #[test]
    fn mcp_firm_threshold_middle_regime() {
        let v = threshold(2.0, 1.0, &PenaltySpec::mcp(3.0), 0.0).unwrap();
        assert!((v - 1.5).abs() < 1e-15);
        let grid = univariate_grid_min(2.0, 1.0, &PenaltySpec::mcp(3.0), 0.0, 1e-5);
        assert!((grid - 1.5).abs() < 1e-4);
    }

    #[test]
    fn zero_input_maps_to_zero() {
        for spec in [
            PenaltySpec::lasso(),
            PenaltySpec::mcp(3.0),
            PenaltySpec::scad(4.0),
            PenaltySpec::mnet(3.0, 0.5),
        ] {
            assert_eq!(threshold(0.0, 0.7, &spec, 0.1).unwrap(), 0.0);
        }
    }

    #[test]
    fn scad_unbiased_beyond_gamma_lambda() {
        let spec = PenaltySpec::scad(4.0);
        assert_eq!(threshold(5.0, 1.0, &spec, 0.0).unwrap(), 5.0);
        assert!((univariate_grid_min(5.0, 1.0, &spec, 0.0, 1e-5) - 5.0).abs() < 1e-4);
    }

    #[test]
    fn mcp_sub_threshold_is_zero() {
        assert_eq!(threshold(0.9, 1.0, &PenaltySpec::mcp(3.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn scad_three_regimes() {
        let spec = PenaltySpec::scad(4.0);
        assert!((threshold(1.5, 1.0, &spec, 0.0).unwrap() - 0.5).abs() < 1e-15);
        // ((g-1)|z| - g lambda) / (g-2) = (9 - 4) / 2
        assert!((threshold(3.0, 1.0, &spec, 0.0).unwrap() - 2.5).abs() < 1e-15);
        assert!((threshold(-3.0, 1.0, &spec, 0.0).unwrap() + 2.5).abs() < 1e-15);
    }

    #[test]
    fn kink_ties_close_from_below() {
        let mcp = PenaltySpec::mcp(3.0);
        assert_eq!(threshold(1.0, 1.0, &mcp, 0.0).unwrap(), 0.0);
        assert!((threshold(3.0, 1.0, &mcp, 0.0).unwrap() - 3.0).abs() < 1e-15);
        let scad = PenaltySpec::scad(4.0);
        assert!((threshold(2.0, 1.0, &scad, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_gamma_is_rejected() {
        assert!(threshold(1.0, 0.5, &PenaltySpec::mcp(1.0), 0.0).is_err());
        assert!(threshold(1.0, 0.5, &PenaltySpec::scad(2.0), 0.0).is_err());
        assert!(PenaltySpec::new(PenaltyFamily::Mnet, 3.0, 0.0).is_err());
        assert!(PenaltySpec::new(PenaltyFamily::Mcp, 3.0, 0.5).is_err());
    }

    #[test]
    fn derivative_examples() {
        let mcp = PenaltySpec::mcp(3.0);
        assert_eq!(penalty_derivative(0.0, 1.0, &mcp).unwrap(), 1.0);
        assert_eq!(penalty_derivative(3.0, 1.0, &mcp).unwrap(), 0.0);
        let scad = PenaltySpec::scad(4.0);
        assert!((penalty_derivative(2.0, 1.0, &scad).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(penalty_derivative(-0.1, 1.0, &scad).is_err());
    }

    #[test]
    fn mcp_flat_region_value() {
        let mcp = PenaltySpec::mcp(3.0);
        assert!((penalty_value(10.0, 0.5, &mcp) - 3.0 * 0.25 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn slope_bounds() {
        assert_eq!(slope_bound(&PenaltySpec::lasso()), 1.0);
        assert_eq!(slope_bound(&PenaltySpec::mcp(3.0)), 1.5);
        assert_eq!(slope_bound(&PenaltySpec::scad(4.0)), 2.0);
        assert!((slope_bound(&PenaltySpec::mcp(1e9)) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nonconvex_weighted_threshold_is_global_minimizer() {
        // curvature 0.25 with gamma 3: the univariate MCP problem is concave on (0, 3 lambda]
        let spec = PenaltySpec::mcp(3.0);
        for &z in &[0.55, 0.6, 0.76, 0.9, 1.4] {
            let b = weighted_threshold(z, 0.25, 0.5, &spec, 0.0);
            let f = |t: f64| 0.125 * t * t - z * t + penalty_value(t, 0.5, &spec);
            let mut best = f64::INFINITY;
            let mut t = -8.0;
            while t <= 8.0 {
                best = best.min(f(t));
                t += 1e-4;
            }
            assert!(f(b) <= best + 1e-9, "z={z}: f(b)={} grid={best}", f(b));
        }
    }

    proptest! {
        #[test]
        fn threshold_shrinks_and_keeps_sign(z in -10.0..10.0f64, lambda in 0.0..3.0f64, gamma in 2.1..8.0f64, which in 0..4usize) {
            let spec = match which {
                0 => PenaltySpec::lasso(),
                1 => PenaltySpec::mcp(gamma),
                2 => PenaltySpec::scad(gamma),
                _ => PenaltySpec::mnet(gamma, 0.5),
            };
            let ridge = spec.ridge_level(lambda);
            let b = threshold(z, spec.l1_level(lambda), &spec, ridge).unwrap();
            prop_assert!(b.abs() <= z.abs() + 1e-12);
            prop_assert!(b == 0.0 || b.signum() == z.signum());
        }

        #[test]
        fn mcp_approaches_soft_threshold(z in -5.0..5.0f64, lambda in 0.0..2.0f64) {
            let soft = z.signum() * (z.abs() - lambda).max(0.0);
            let b = threshold(z, lambda, &PenaltySpec::mcp(1e7), 0.0).unwrap();
            prop_assert!((b - soft).abs() < 1e-5);
        }

        #[test]
        fn threshold_is_continuous(z in -6.0..6.0f64, lambda in 0.01..2.0f64, gamma in 2.1..6.0f64) {
            for spec in [PenaltySpec::mcp(gamma), PenaltySpec::scad(gamma)] {
                let a = threshold(z, lambda, &spec, 0.0).unwrap();
                let b = threshold(z + 1e-9, lambda, &spec, 0.0).unwrap();
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
