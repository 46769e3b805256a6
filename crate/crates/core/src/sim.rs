//! Simulated designs and the strong-rule violation experiment.
//!
//! Covariates are standard Gaussian with either a common pairwise
//! correlation (shared-factor construction) or independent blocks sharing a
//! within-block correlation. Every replicate draws from its own ChaCha8
//! stream, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::cv::{data_lambda_max, fit_any, lambda_sequence};
use crate::data::{standardize, Dataset, Family};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::path::{CoefPath, PathOptions, Strategy};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::solver::ETA_LIMIT;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Correlation {
    Common { rho: f64 },
    Block { rho: f64, size: usize },
}

impl Correlation {
    pub fn rho(&self) -> f64 {
        match *self {
            Correlation::Common { rho } | Correlation::Block { rho, .. } => rho,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Noise {
    /// Gaussian noise with this standard deviation.
    Sd { sd: f64 },
    /// Noise variance set per replicate so that `||X beta||^2 / (n sigma^2)`
    /// equals this value.
    Snr { snr: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub correlation: Correlation,
    pub beta: Vec<f64>,
    pub family: Family,
    pub noise: Noise,
    pub seed: u64,
    pub replicates: usize,
    pub spec: PenaltySpec,
    pub nlambda: usize,
    pub min_ratio: f64,
    pub strategy: Strategy,
}

/// `k` nonzero coefficients of size `size` at the first indices, alternating
/// in sign.
pub fn alternating_signal(p: usize, k: usize, size: f64) -> Vec<f64> {
    let mut beta = vec![0.0; p];
    for (j, b) in beta.iter_mut().take(k).enumerate() {
        *b = if j % 2 == 0 { size } else { -size };
    }
    beta
}

impl SimDesign {
    /// n = 200, p = 2000, common correlation, 20 coefficients of +-1
    /// (+-0.5 for logistic), 20 replicates on a 100-point grid.
    pub fn table1(family: Family, penalty: PenaltyFamily, rho: f64) -> Self {
        let size = if family == Family::Binomial { 0.5 } else { 1.0 };
        SimDesign {
            n: 200,
            p: 2000,
            correlation: Correlation::Common { rho },
            beta: alternating_signal(2000, 20, size),
            family,
            noise: Noise::Sd { sd: 1.0 },
            seed: 1,
            replicates: 20,
            spec: PenaltySpec::with_default_gamma(penalty),
            nlambda: 100,
            min_ratio: 0.05,
            strategy: Strategy::Strong,
        }
    }

    /// 500 blocks of 4 with within-block correlation 0.5; the first 6
    /// groups carry +-1 (+-0.5 for logistic), one sign per group.
    pub fn table2(family: Family, penalty: PenaltyFamily) -> Self {
        let size = if family == Family::Binomial { 0.5 } else { 1.0 };
        let mut beta = vec![0.0; 2000];
        for (j, b) in beta.iter_mut().take(24).enumerate() {
            *b = if (j / 4) % 2 == 0 { size } else { -size };
        }
        SimDesign {
            n: 200,
            p: 2000,
            correlation: Correlation::Block { rho: 0.5, size: 4 },
            beta,
            family,
            noise: Noise::Sd { sd: 1.0 },
            seed: 1,
            replicates: 20,
            spec: PenaltySpec::with_default_gamma(penalty),
            nlambda: 100,
            min_ratio: 0.05,
            strategy: Strategy::Strong,
        }
    }

    /// n = 200, p = 20000, independent covariates, 20 coefficients all +1,
    /// signal-to-noise ratio 3.
    pub fn fig5_case2(penalty: PenaltyFamily) -> Self {
        let mut beta = vec![0.0; 20_000];
        beta[..20].fill(1.0);
        SimDesign {
            n: 200,
            p: 20_000,
            correlation: Correlation::Common { rho: 0.0 },
            beta,
            family: Family::Gaussian,
            noise: Noise::Snr { snr: 3.0 },
            seed: 1,
            replicates: 1,
            spec: PenaltySpec::with_default_gamma(penalty),
            nlambda: 100,
            min_ratio: 0.05,
            strategy: Strategy::Hybrid,
        }
    }

    /// Gaussian timing design: n = 200, common correlation `rho`, 20
    /// coefficients of +-1.
    pub fn timing(p: usize, rho: f64, penalty: PenaltyFamily) -> Self {
        let mut d = SimDesign::table1(Family::Gaussian, penalty, rho);
        d.p = p;
        d.beta = alternating_signal(p, 20.min(p), 1.0);
        d.replicates = 1;
        d.strategy = Strategy::Hybrid;
        d
    }

    pub fn validate(&self) -> Result<()> {
        let rho = self.correlation.rho();
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("rho must lie in [0, 1), got {rho}")));
        }
        if let Correlation::Block { size, .. } = self.correlation {
            if size == 0 || !self.p.is_multiple_of(size) {
                return Err(Error::InvalidArgument(format!("block size {size} does not divide p = {}", self.p)));
            }
        }
        if self.n < 2 || self.p == 0 {
            return Err(Error::InvalidArgument("need n >= 2 and p >= 1".into()));
        }
        if self.beta.len() != self.p {
            return Err(Error::DimensionMismatch(format!("{} coefficients for p = {}", self.beta.len(), self.p)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        if self.spec.is_group() && !matches!(self.correlation, Correlation::Block { .. }) {
            return Err(Error::InvalidGroups("group penalties need a block design".into()));
        }
        self.spec.validate()
    }

    /// Group labels `1..=G` for block designs.
    pub fn group_labels(&self) -> Option<Vec<usize>> {
        match self.correlation {
            Correlation::Block { size, .. } => Some((0..self.p).map(|j| j / size + 1).collect()),
            Correlation::Common { .. } => None,
        }
    }

    /// Dataset of replicate `r`.
    pub fn generate(&self, replicate: usize) -> Result<Dataset> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate as u64);
        let (n, p) = (self.n, self.p);
        let rho = self.correlation.rho();
        let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
        let block = match self.correlation {
            Correlation::Common { .. } => p,
            Correlation::Block { size, .. } => size,
        };
        let mut x = Matrix::zeros(n, p);
        let mut factor = vec![0.0; n];
        for j in 0..p {
            if j % block == 0 {
                for f in factor.iter_mut() {
                    *f = rng.sample(StandardNormal);
                }
            }
            for (v, f) in x.col_mut(j).iter_mut().zip(&factor) {
                let e: f64 = rng.sample(StandardNormal);
                *v = a * f + b * e;
            }
        }
        let signal = x.mul_vec(&self.beta);
        let y: Vec<f64> = match self.family {
            Family::Gaussian => {
                let sd = match self.noise {
                    Noise::Sd { sd } => sd,
                    Noise::Snr { snr } => (signal.iter().map(|s| s * s).sum::<f64>() / (n as f64 * snr)).sqrt(),
                };
                signal
                    .iter()
                    .map(|s| {
                        let e: f64 = rng.sample(StandardNormal);
                        s + sd * e
                    })
                    .collect()
            }
            Family::Binomial => signal
                .iter()
                .map(|s| {
                    let pr = 1.0 / (1.0 + (-s).exp());
                    (rng.random::<f64>() < pr) as u8 as f64
                })
                .collect(),
            Family::Poisson => signal
                .iter()
                .map(|s| {
                    let mu = s.clamp(-ETA_LIMIT, ETA_LIMIT).exp();
                    Poisson::new(mu).map(|d| d.sample(&mut rng)).unwrap_or(0.0)
                })
                .collect(),
        };
        Dataset::new(x, y, self.family, self.group_labels())
    }

    /// Standardize replicate `r`, build its lambda grid and fit the path.
    pub fn fit_replicate(&self, replicate: usize, strategy: Strategy, options: &PathOptions) -> Result<CoefPath> {
        let data = self.generate(replicate)?;
        let sd = standardize(&data);
        let groups = data.group_ranges();
        let lmax = data_lambda_max(&sd, groups.as_deref(), &self.spec)?;
        let grid = lambda_sequence(lmax, self.min_ratio, self.nlambda)?;
        fit_any(&sd, groups.as_deref(), &self.spec, &grid.values, strategy, options)
    }
}

/// Strong-rule statistics of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateStats {
    pub replicate: usize,
    pub eliminated: f64,
    pub violated_lambdas: usize,
    pub violated_variables: usize,
    /// `None` for group penalties, where local convexity is undefined.
    pub violated_lambdas_convex: Option<usize>,
    pub mean_strong_size: f64,
    pub mean_active_size: f64,
    pub path_length: usize,
    pub failure: Option<String>,
}

impl ReplicateStats {
    pub fn from_path(replicate: usize, path: &CoefPath) -> Self {
        let tail = |v: &[usize]| {
            if v.len() <= 1 {
                0.0
            } else {
                v[1..].iter().sum::<usize>() as f64 / (v.len() - 1) as f64
            }
        };
        let grouped = path.groups.is_some();
        ReplicateStats {
            replicate,
            eliminated: path.mean_eliminated(),
            violated_lambdas: path.violations.violated_lambdas(),
            violated_variables: path.violations.violated_variables(),
            violated_lambdas_convex: (!grouped).then(|| path.violations.violated_lambdas_in_convex_region()),
            mean_strong_size: tail(&path.strong_size),
            mean_active_size: tail(&path.active_size),
            path_length: path.len(),
            failure: path.failure.as_ref().map(|f| f.message.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub model: String,
    pub method: String,
    pub rho: f64,
    pub replicates: usize,
    pub eliminated: f64,
    pub violated_lambdas: f64,
    pub violated_variables: f64,
    pub violated_lambdas_convex: Option<f64>,
    pub mean_strong_size: f64,
    pub mean_active_size: f64,
    pub failed: usize,
    pub details: Vec<ReplicateStats>,
}

/// Fit every replicate with the design's strategy and average the
/// strong-rule statistics. Replicates that fail outright are reported in
/// `details` with a failure message and excluded from the averages.
pub fn violation_experiment(design: &SimDesign) -> Result<ExperimentSummary> {
    design.validate()?;
    let options = PathOptions::default();
    let details: Vec<ReplicateStats> = (0..design.replicates)
        .into_par_iter()
        .map(|r| match design.fit_replicate(r, design.strategy, &options) {
            Ok(path) => ReplicateStats::from_path(r, &path),
            Err(e) => ReplicateStats {
                replicate: r,
                eliminated: f64::NAN,
                violated_lambdas: 0,
                violated_variables: 0,
                violated_lambdas_convex: None,
                mean_strong_size: f64::NAN,
                mean_active_size: f64::NAN,
                path_length: 0,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let ok: Vec<&ReplicateStats> = details.iter().filter(|d| d.path_length > 0).collect();
    let m = ok.len().max(1) as f64;
    let avg = |f: &dyn Fn(&ReplicateStats) -> f64| ok.iter().map(|d| f(d)).sum::<f64>() / m;
    let grouped = design.spec.is_group();
    Ok(ExperimentSummary {
        model: match design.family {
            Family::Gaussian => "linear".into(),
            Family::Binomial => "logistic".into(),
            Family::Poisson => "poisson".into(),
        },
        method: design.spec.family.as_str().into(),
        rho: design.correlation.rho(),
        replicates: design.replicates,
        eliminated: avg(&|d| d.eliminated),
        violated_lambdas: avg(&|d| d.violated_lambdas as f64),
        violated_variables: avg(&|d| d.violated_variables as f64),
        violated_lambdas_convex: (!grouped).then(|| avg(&|d| d.violated_lambdas_convex.unwrap_or(0) as f64)),
        mean_strong_size: avg(&|d| d.mean_strong_size),
        mean_active_size: avg(&|d| d.mean_active_size),
        failed: details.len() - ok.len(),
        details,
    })
}
