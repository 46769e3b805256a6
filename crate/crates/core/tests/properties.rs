//! Randomized invariants of thresholding and screening.

use ncvpath::oracle::univariate_grid_min;
use ncvpath::penalty::{penalty_value, threshold};
use ncvpath::screening::strong_set;
use ncvpath::*;
use proptest::prelude::*;

fn spec_of(which: usize, gamma: f64) -> PenaltySpec {
    match which {
        0 => PenaltySpec::lasso(),
        1 => PenaltySpec::mcp(gamma),
        2 => PenaltySpec::scad(gamma + 1.0),
        _ => PenaltySpec::mnet(gamma, 0.6),
    }
}

proptest! {
    #[test]
    fn threshold_minimizes_the_univariate_objective(
        z in -6.0..6.0f64, lambda in 0.01..2.0f64, gamma in 1.5..6.0f64, which in 0..4usize,
    ) {
        let spec = spec_of(which, gamma);
        let (l1, ridge) = (spec.l1_level(lambda), spec.ridge_level(lambda));
        let f = |b: f64| 0.5 * (z - b) * (z - b) + penalty_value(b.abs(), l1, &spec) + 0.5 * ridge * b * b;
        let b = threshold(z, l1, &spec, ridge).unwrap();
        let g = univariate_grid_min(z, l1, &spec, ridge, 1e-4);
        prop_assert!(f(b) <= f(g) + 1e-9, "f({b}) = {} > f({g}) = {}", f(b), f(g));
    }

    #[test]
    fn strong_sets_grow_as_lambda_decreases(
        c in proptest::collection::vec(-2.0..2.0f64, 1..200),
        lambda_prev in 0.2..2.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64,
        which in 0..4usize, gamma in 1.5..6.0f64,
    ) {
        let spec = spec_of(which, gamma);
        let (hi, lo) = (lambda_prev * a.max(b), lambda_prev * a.min(b));
        let keep_hi = strong_set(&c, hi, lambda_prev, &spec).unwrap();
        let keep_lo = strong_set(&c, lo, lambda_prev, &spec).unwrap();
        prop_assert!(keep_hi.iter().all(|j| keep_lo.binary_search(j).is_ok()));
        prop_assert!(keep_lo.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn eliminated_and_kept_partition_the_variables(
        n in 20usize..60, p in 1usize..40, seed in 0u64..1000, which in 0..3usize,
    ) {
        let penalty = [PenaltyFamily::Lasso, PenaltyFamily::Mcp, PenaltyFamily::Scad][which];
        let mut d = sim::SimDesign::table1(Family::Gaussian, penalty, 0.3);
        d.n = n;
        d.p = p;
        d.beta = sim::alternating_signal(p, 3.min(p), 1.0);
        d.seed = seed;
        d.nlambda = 10;
        let path = d.fit_replicate(0, ncvpath::Strategy::Hybrid, &PathOptions::default()).unwrap();
        let eliminated = path.eliminated();
        for k in 1..path.len() {
            prop_assert_eq!(eliminated[k - 1] + path.strong_size[k], p);
            // KKT repair can activate variables the rule screened out
            let repaired: usize = path.violations.records.iter().filter(|r| r.lambda_index == k).map(|r| r.count()).sum();
            prop_assert!(path.active_size[k] <= path.strong_size[k] + repaired);
        }
    }
}
