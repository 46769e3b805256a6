//! Command-line front end: `fit`, `cv`, `simulate` and `bench`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cv::{cross_validate, data_lambda_max, fit_any, lambda_sequence, Folds};
use crate::data::{load_dataset, standardize, unstandardize, Dataset, Family};
use crate::error::{Error, Result};
use crate::io::{self, PathSummary, SCHEMA_VERSION};
use crate::path::{CoefPath, PathOptions, Strategy};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::sim::{violation_experiment, SimDesign};

#[derive(Debug, Parser)]
#[command(name = "ncvpath", version, about = "Nonconvex penalized regression paths")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a regularization path.
    Fit(FitArgs),
    /// Cross-validate a regularization path.
    Cv(CvArgs),
    /// Run strong-rule simulation experiments.
    Simulate(SimulateArgs),
    /// Time all four strategies on one instance.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Design matrix CSV (n rows, p columns).
    #[arg(long)]
    pub x: PathBuf,
    /// Response CSV (n rows, one column).
    #[arg(long)]
    pub y: PathBuf,
    /// Group assignment, one integer per column.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Skip the first row of every input file.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
    #[arg(long, default_value = "mcp")]
    pub penalty: PenaltyFamily,
    /// Concavity; defaults to 3 for MCP-type and 4 for SCAD-type penalties.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Lasso/ridge mix for Mnet.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lambda_min_ratio: f64,
    #[arg(long, default_value = "hybrid")]
    pub strategy: Strategy,
    /// Convergence threshold on the largest coefficient change.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Skip the local-convexity diagnostic.
    #[arg(long)]
    pub no_convexity: bool,
}

impl ModelArgs {
    pub fn spec(&self) -> Result<PenaltySpec> {
        PenaltySpec::new(self.penalty, self.gamma.unwrap_or(self.penalty.default_gamma()), self.alpha)
    }

    pub fn options(&self) -> Result<PathOptions> {
        path_options(self.tol, self.no_convexity)
    }
}

fn path_options(tol: Option<f64>, no_convexity: bool) -> Result<PathOptions> {
    let mut options = PathOptions::default();
    if let Some(tol) = tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("--tol must be positive, got {tol}")));
        }
        options.solver.tol = tol;
    }
    options.convexity = !no_convexity;
    Ok(options)
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "ncvpath")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Select the largest lambda within one standard error of the minimum.
    #[arg(long)]
    pub one_se: bool,
    #[arg(long, default_value = "ncvpath")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    /// n = 200, p = 2000, common correlation.
    Table1,
    /// 500 groups of 4, within-group correlation 0.5.
    Table2,
    /// p = 20000, positive signals, SNR 3.
    Fig5,
    /// Gaussian timing design with adjustable p.
    Timing,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[arg(long, value_enum, default_value = "table1")]
    pub design: DesignKind,
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
    /// Common correlation (table1, timing).
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// Number of covariates (timing).
    #[arg(long, default_value_t = 20_000)]
    pub p: usize,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub nlambda: Option<usize>,
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
}

impl DesignArgs {
    pub fn build(&self, penalty: PenaltyFamily, rho: f64) -> Result<SimDesign> {
        let mut d = match self.design {
            DesignKind::Table1 => SimDesign::table1(self.family, penalty, rho),
            DesignKind::Table2 => SimDesign::table2(self.family, penalty),
            DesignKind::Fig5 => SimDesign::fig5_case2(penalty),
            DesignKind::Timing => SimDesign::timing(self.p, rho, penalty),
        };
        d.spec = PenaltySpec::new(penalty, self.gamma.unwrap_or(penalty.default_gamma()), self.alpha)?;
        if let Some(r) = self.replicates {
            d.replicates = r;
        }
        if let Some(s) = self.seed {
            d.seed = s;
        }
        if let Some(s) = self.strategy {
            d.strategy = s;
        }
        if let Some(m) = self.nlambda {
            d.nlambda = m;
        }
        if let Some(r) = self.lambda_min_ratio {
            d.min_ratio = r;
        }
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Penalties to run; repeat for several table rows.
    #[arg(long = "penalty", default_values = ["mcp"])]
    pub penalties: Vec<PenaltyFamily>,
    /// Extra correlation values; each adds a row per penalty.
    #[arg(long = "also-rho")]
    pub also_rho: Vec<f64>,
    /// Also write per-replicate statistics.
    #[arg(long)]
    pub details: bool,
    #[arg(long, default_value = "ncvpath")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Design matrix CSV; a simulated instance is used when omitted.
    #[arg(long, requires = "y")]
    pub x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, default_value = "mcp")]
    pub penalty: PenaltyFamily,
    /// Timed runs per strategy; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// Largest allowed coefficient deviation from the cyclic path.
    #[arg(long, default_value_t = 1e-6)]
    pub equality_tol: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub no_convexity: bool,
    #[arg(long, default_value = "ncvpath")]
    pub out_prefix: PathBuf,
}

/// Files written by a subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

pub fn run(cli: Cli) -> Result<Outputs> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        // a second initialization (tests calling run twice) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Fit(a) => run_fit(&a),
        Command::Cv(a) => run_cv(&a),
        Command::Simulate(a) => run_simulate(&a),
        Command::Bench(a) => run_bench(&a),
    }
}

fn load(data: &DataArgs, family: Family) -> Result<Dataset> {
    load_dataset(&data.x, &data.y, family, data.groups.as_deref(), data.header)
}

/// `nlambda` log-spaced values from `lambda_max` down to `ratio * lambda_max`;
/// a single value is `lambda_max` itself.
pub fn lambda_grid(lmax: f64, ratio: f64, nlambda: usize) -> Result<Vec<f64>> {
    match nlambda {
        0 => Err(Error::InvalidArgument("--nlambda must be at least 1".into())),
        1 => Ok(vec![lmax]),
        m => Ok(lambda_sequence(lmax, ratio, m)?.values),
    }
}

fn variable_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

#[derive(Serialize)]
struct ModelInfo {
    family: Family,
    penalty: PenaltySpec,
    strategy: Strategy,
    n: usize,
    p: usize,
    nlambda: usize,
    lambda_min_ratio: f64,
    tol: f64,
}

impl ModelInfo {
    fn new(data: &Dataset, model: &ModelArgs, spec: PenaltySpec, options: &PathOptions) -> Self {
        ModelInfo {
            family: data.family,
            penalty: spec,
            strategy: model.strategy,
            n: data.n(),
            p: data.p(),
            nlambda: model.nlambda,
            lambda_min_ratio: model.lambda_min_ratio,
            tol: options.solver.tol,
        }
    }
}

#[derive(Serialize)]
struct FitReport {
    schema_version: u32,
    command: &'static str,
    model: ModelInfo,
    path: PathSummary,
    fit_seconds: f64,
}

fn write_path_files(prefix: &Path, path: &CoefPath, data: &Dataset, files: &mut Vec<PathBuf>) -> Result<()> {
    let names = variable_names(data.p());
    let f = io::output_path(prefix, "path.csv");
    io::to_file(&f, |w| io::write_path_csv(w, path, &names))?;
    files.push(f);
    if let Some(ids) = &data.groups {
        let f = io::output_path(prefix, "group_path.csv");
        io::to_file(&f, |w| io::write_group_path_csv(w, path, ids, &names))?;
        files.push(f);
    }
    Ok(())
}

fn run_fit(a: &FitArgs) -> Result<Outputs> {
    let spec = a.model.spec()?;
    let options = a.model.options()?;
    let data = load(&a.data, a.model.family)?;
    check_groups(&data, &spec)?;
    let sd = standardize(&data);
    let groups = data.group_ranges();
    let lmax = data_lambda_max(&sd, groups.as_deref(), &spec)?;
    let lambdas = lambda_grid(lmax, a.model.lambda_min_ratio, a.model.nlambda)?;

    let start = Instant::now();
    let path = fit_any(&sd, groups.as_deref(), &spec, &lambdas, a.model.strategy, &options)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let orig = unstandardize(&path, &sd)?;

    let mut files = Vec::new();
    write_path_files(&a.out_prefix, &orig, &data, &mut files)?;
    let f = io::output_path(&a.out_prefix, "violations.csv");
    io::to_file(&f, |w| io::write_violations_csv(w, &path))?;
    files.push(f);
    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        model: ModelInfo::new(&data, &a.model, spec, &options),
        path: PathSummary::new(&path),
        fit_seconds,
    };
    let f = io::output_path(&a.out_prefix, "summary.json");
    io::write_json(&f, &report)?;
    files.push(f);
    Ok(Outputs { files })
}

fn check_groups(data: &Dataset, spec: &PenaltySpec) -> Result<()> {
    if spec.is_group() && data.groups.is_none() {
        return Err(Error::InvalidGroups(format!("--penalty {} requires --groups", spec.family)));
    }
    Ok(())
}

#[derive(Serialize)]
struct CvReport {
    schema_version: u32,
    command: &'static str,
    model: ModelInfo,
    folds: usize,
    seed: u64,
    one_se: bool,
    selected_index: usize,
    selected_lambda: f64,
    min_index: usize,
    one_se_index: usize,
    cv_seconds: f64,
}

fn run_cv(a: &CvArgs) -> Result<Outputs> {
    let spec = a.model.spec()?;
    let options = a.model.options()?;
    let data = load(&a.data, a.model.family)?;
    check_groups(&data, &spec)?;
    let sd = standardize(&data);
    let groups = data.group_ranges();
    let lmax = data_lambda_max(&sd, groups.as_deref(), &spec)?;
    let lambdas = lambda_grid(lmax, a.model.lambda_min_ratio, a.model.nlambda)?;

    let start = Instant::now();
    let folds = Folds::Random { k: a.folds, seed: a.seed };
    let (cv, full) = cross_validate(&data, &spec, &lambdas, a.model.strategy, &folds, &options)?;
    let cv_seconds = start.elapsed().as_secs_f64();
    let (selected_index, selected_lambda) = cv.selected(a.one_se);

    let mut files = Vec::new();
    let f = io::output_path(&a.out_prefix, "cv.csv");
    io::to_file(&f, |w| io::write_cv_csv(w, &cv))?;
    files.push(f);
    let orig = unstandardize(&full, &sd)?;
    write_path_files(&a.out_prefix, &orig, &data, &mut files)?;
    let report = CvReport {
        schema_version: SCHEMA_VERSION,
        command: "cv",
        model: ModelInfo::new(&data, &a.model, spec, &options),
        folds: cv.k,
        seed: a.seed,
        one_se: a.one_se,
        selected_index: selected_index + 1,
        selected_lambda,
        min_index: cv.selected_index + 1,
        one_se_index: cv.one_se_index + 1,
        cv_seconds,
    };
    let f = io::output_path(&a.out_prefix, "summary.json");
    io::write_json(&f, &report)?;
    files.push(f);
    Ok(Outputs { files })
}

#[derive(Serialize)]
struct SimulateReport {
    schema_version: u32,
    command: &'static str,
    designs: Vec<SimDesignInfo>,
    seconds: Vec<f64>,
}

#[derive(Serialize)]
struct SimDesignInfo {
    design: DesignKind,
    n: usize,
    p: usize,
    rho: f64,
    family: Family,
    penalty: PenaltySpec,
    strategy: Strategy,
    replicates: usize,
    seed: u64,
    nlambda: usize,
    lambda_min_ratio: f64,
}

impl SimDesignInfo {
    fn new(kind: DesignKind, d: &SimDesign) -> Self {
        SimDesignInfo {
            design: kind,
            n: d.n,
            p: d.p,
            rho: d.correlation.rho(),
            family: d.family,
            penalty: d.spec,
            strategy: d.strategy,
            replicates: d.replicates,
            seed: d.seed,
            nlambda: d.nlambda,
            lambda_min_ratio: d.min_ratio,
        }
    }
}

fn run_simulate(a: &SimulateArgs) -> Result<Outputs> {
    let mut rhos = vec![a.design.rho];
    rhos.extend(a.also_rho.iter().copied());
    let mut summaries = Vec::new();
    let mut designs = Vec::new();
    let mut seconds = Vec::new();
    for &penalty in &a.penalties {
        for &rho in &rhos {
            let d = a.design.build(penalty, rho)?;
            let start = Instant::now();
            summaries.push(violation_experiment(&d)?);
            seconds.push(start.elapsed().as_secs_f64());
            designs.push(SimDesignInfo::new(a.design.design, &d));
        }
    }
    let mut files = Vec::new();
    let f = io::output_path(&a.out_prefix, "simulation.csv");
    io::to_file(&f, |w| io::write_simulation_csv(w, &summaries))?;
    files.push(f);
    if a.details {
        for (i, s) in summaries.iter().enumerate() {
            let f = io::output_path(&a.out_prefix, &format!("replicates_{}.csv", i + 1));
            io::to_file(&f, |w| io::write_replicates_csv(w, &s.details))?;
            files.push(f);
        }
    }
    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        designs,
        seconds,
    };
    let f = io::output_path(&a.out_prefix, "summary.json");
    io::write_json(&f, &report)?;
    files.push(f);
    Ok(Outputs { files })
}

/// Timings of one strategy.
#[derive(Clone, Debug, Serialize)]
pub struct StrategyTiming {
    pub strategy: Strategy,
    pub runs: Vec<f64>,
    pub median_seconds: f64,
    /// Cyclic median divided by this strategy's median.
    pub speedup_vs_cyclic: f64,
    pub max_deviation: f64,
    pub path_length: usize,
}

#[derive(Serialize)]
struct BenchReport {
    schema_version: u32,
    command: &'static str,
    n: usize,
    p: usize,
    family: Family,
    penalty: PenaltySpec,
    equality_tol: f64,
    equality_passed: bool,
    strategies: Vec<StrategyTiming>,
}

/// Median of a nonempty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Result of timing every strategy on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct BenchOutcome {
    pub strategies: Vec<StrategyTiming>,
    /// Largest deviation of any strategy from the cyclic path.
    pub worst_deviation: f64,
    pub equality_tol: f64,
}

impl BenchOutcome {
    pub fn passed(&self) -> bool {
        self.worst_deviation <= self.equality_tol
    }

    pub fn timing(&self, strategy: Strategy) -> &StrategyTiming {
        self.strategies
            .iter()
            .find(|t| t.strategy == strategy)
            .expect("every strategy is timed")
    }
}

/// Fit every strategy and compare each path with the cyclic one; when all
/// agree within `equality_tol`, repeat until every strategy has `runs` timings.
pub fn bench_strategies(
    data: &Dataset,
    spec: &PenaltySpec,
    lambdas: &[f64],
    options: &PathOptions,
    runs: usize,
    equality_tol: f64,
) -> Result<BenchOutcome> {
    if runs == 0 {
        return Err(Error::InvalidArgument("--runs must be at least 1".into()));
    }
    let sd = standardize(data);
    let groups = data.group_ranges();
    let fit = |strategy: Strategy| -> Result<(f64, CoefPath)> {
        let start = Instant::now();
        let path = fit_any(&sd, groups.as_deref(), spec, lambdas, strategy, options)?;
        Ok((start.elapsed().as_secs_f64(), path))
    };
    let mut fitted = Vec::new();
    for strategy in Strategy::ALL {
        let (t, path) = fit(strategy)?;
        fitted.push((strategy, vec![t], path));
    }
    let cyclic = fitted
        .iter()
        .position(|f| f.0 == Strategy::Cyclic)
        .expect("cyclic is one of the strategies");
    let deviations: Vec<f64> = fitted.iter().map(|f| f.2.max_deviation(&fitted[cyclic].2)).collect();
    let worst_deviation = deviations
        .iter()
        .fold(0.0, |m: f64, &d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
    // repeat runs only when the timings will be reported
    if worst_deviation <= equality_tol {
        for _ in 1..runs {
            for f in fitted.iter_mut() {
                f.1.push(fit(f.0)?.0);
            }
        }
    }
    let cyclic_median = median(&fitted[cyclic].1);
    let strategies: Vec<StrategyTiming> = fitted
        .iter()
        .zip(&deviations)
        .map(|((strategy, runs, path), &max_deviation)| {
            let median_seconds = median(runs);
            StrategyTiming {
                strategy: *strategy,
                runs: runs.clone(),
                median_seconds,
                speedup_vs_cyclic: cyclic_median / median_seconds,
                max_deviation,
                path_length: path.len(),
            }
        })
        .collect();
    Ok(BenchOutcome {
        strategies,
        worst_deviation,
        equality_tol,
    })
}

fn run_bench(a: &BenchArgs) -> Result<Outputs> {
    let options = path_options(a.tol, a.no_convexity)?;
    let (data, spec, lambdas) = match (&a.x, &a.y) {
        (Some(x), Some(y)) => {
            let data = load_dataset(x, y, a.design.family, a.groups.as_deref(), a.header)?;
            let spec = PenaltySpec::new(a.penalty, a.design.gamma.unwrap_or(a.penalty.default_gamma()), a.design.alpha)?;
            check_groups(&data, &spec)?;
            let sd = standardize(&data);
            let lmax = data_lambda_max(&sd, data.group_ranges().as_deref(), &spec)?;
            let ratio = a.design.lambda_min_ratio.unwrap_or(0.05);
            let lambdas = lambda_grid(lmax, ratio, a.design.nlambda.unwrap_or(100))?;
            (data, spec, lambdas)
        }
        _ => {
            let d = a.design.build(a.penalty, a.design.rho)?;
            let data = d.generate(0)?;
            let sd = standardize(&data);
            let lmax = data_lambda_max(&sd, data.group_ranges().as_deref(), &d.spec)?;
            let lambdas = lambda_grid(lmax, d.min_ratio, d.nlambda)?;
            (data, d.spec, lambdas)
        }
    };
    let outcome = bench_strategies(&data, &spec, &lambdas, &options, a.runs, a.equality_tol)?;
    let mut files = Vec::new();
    let f = io::output_path(&a.out_prefix, "equality.csv");
    io::to_file(&f, |w| io::write_equality_csv(w, &outcome))?;
    files.push(f);
    if !outcome.passed() {
        // timings are withheld when the paths disagree
        return Err(Error::PathMismatch {
            deviation: outcome.worst_deviation,
            tolerance: a.equality_tol,
        });
    }
    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        command: "bench",
        n: data.n(),
        p: data.p(),
        family: data.family,
        penalty: spec,
        equality_tol: a.equality_tol,
        equality_passed: true,
        strategies: outcome.strategies,
    };
    let f = io::output_path(&a.out_prefix, "bench.json");
    io::write_json(&f, &report)?;
    files.push(f);
    Ok(Outputs { files })
}

/// Entry point used by the binary: runs the command and, on failure,
/// prints an error JSON to stderr and returns exit status 1.
pub fn main_with(cli: Cli) -> i32 {
    match run(cli) {
        Ok(out) => {
            println!("{}", serde_json::to_string(&out).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&io::ErrorReport::new(&e)).unwrap_or_default());
            1
        }
    }
}
