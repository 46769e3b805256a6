//! Instance builders shared by the integration tests.
#![allow(dead_code)]

use ncvpath::cv::{data_lambda_max, fit_any, lambda_sequence};
use ncvpath::group::group_kkt_sweep;
use ncvpath::path::kkt_sweep;
use ncvpath::sim::{alternating_signal, Correlation, Noise, SimDesign};
use ncvpath::*;

/// Simulated instance with `k = min(10, p)` alternating signals scaled to
/// the family; block correlation (size 4) for group penalties.
pub fn design(n: usize, p: usize, rho: f64, family: Family, penalty: PenaltyFamily, seed: u64) -> SimDesign {
    let size = match family {
        Family::Gaussian => 1.0,
        Family::Binomial => 0.5,
        Family::Poisson => 0.2,
    };
    let correlation = if penalty.is_group() {
        Correlation::Block { rho, size: 4 }
    } else {
        Correlation::Common { rho }
    };
    SimDesign {
        n,
        p,
        correlation,
        beta: alternating_signal(p, 10.min(p), size),
        family,
        noise: Noise::Sd { sd: 1.0 },
        seed,
        replicates: 1,
        spec: PenaltySpec::with_default_gamma(penalty),
        nlambda: 50,
        min_ratio: 0.05,
        strategy: Strategy::Hybrid,
    }
}

/// Largest KKT residual over every lambda of a standardized-scale path.
pub fn worst_kkt(sd: &StandardizedDesign, path: &CoefPath) -> f64 {
    let r = if path.groups.is_some() {
        group_kkt_sweep(sd, path).unwrap()
    } else {
        kkt_sweep(sd, path).unwrap()
    };
    r.into_iter().fold(0.0, f64::max)
}

/// Standardized data, grid and paths for every strategy.
pub fn fit_all(d: &SimDesign, options: &PathOptions) -> (Dataset, StandardizedDesign, Vec<CoefPath>) {
    let data = d.generate(0).unwrap();
    let sd = standardize(&data);
    let groups = data.group_ranges();
    let lmax = data_lambda_max(&sd, groups.as_deref(), &d.spec).unwrap();
    let grid = lambda_sequence(lmax, d.min_ratio, d.nlambda).unwrap();
    let paths = Strategy::ALL
        .iter()
        .map(|&s| fit_any(&sd, groups.as_deref(), &d.spec, &grid.values, s, options).unwrap())
        .collect();
    (data, sd, paths)
}
