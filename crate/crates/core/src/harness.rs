//! Monte Carlo experiment driver: scenario definitions, reproducible trial
//! execution, result tables, and the update-step scaling benchmark.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimator::{run_estimator, EstimatorKind, SolverConfig};
use crate::graph::{remove_edges, watts_strogatz, Graph};
use crate::measurement::{CubicFrequencyModel, MeasurementModel};
use crate::parallel;
use crate::psse::{nmspe, PowerCase};
use crate::seeding::derive_seed;
use crate::spectral::SpectralBasis;
use crate::stats::{GaussianPrior, GspLmmse, Lmmse, NoiseModel, TrainingSet};

const STREAM_GRAPH: u64 = 0x6772_6170;
const STREAM_TRAIN: u64 = 0x7472_6169;
const STREAM_TRIAL: u64 = 0x7472_696c;
const STREAM_PERTURB: u64 = 0x7065_7274;

/// Experiment family; the sweep grid's meaning depends on the kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Synthetic cubic model, NMSE versus graph size (grid = N values).
    ExampleANmseVsN,
    /// Synthetic cubic model, run time versus graph size (grid = N values).
    ExampleARuntimeVsN,
    /// Power-system phases, NMSPE versus noise variance (grid = σ_w²).
    PsseNmspeVsNoise,
    /// Power-system phases, NMSPE versus smoothness level (grid = β).
    PsseNmspeVsBeta,
    /// Noisy initialization sweep (grid = σ_p²).
    InitNoiseSweep,
    /// Misspecified-topology initialization sweep (grid = removed edges M).
    TopologyPerturbationSweep,
}

impl ScenarioKind {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::ExampleANmseVsN => "example-a-nmse",
            ScenarioKind::ExampleARuntimeVsN => "example-a-runtime",
            ScenarioKind::PsseNmspeVsNoise => "psse-noise",
            ScenarioKind::PsseNmspeVsBeta => "psse-beta",
            ScenarioKind::InitNoiseSweep => "init-noise",
            ScenarioKind::TopologyPerturbationSweep => "topology-perturbation",
        }
    }

    fn is_example_a(&self) -> bool {
        matches!(self, ScenarioKind::ExampleANmseVsN | ScenarioKind::ExampleARuntimeVsN)
    }
}

/// Estimators the harness can run, iterative and linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorId {
    MapVertex,
    MapFreq,
    EgfdMap,
    SgspMap,
    GspMap,
    Lmmse,
    GspLmmse,
}

impl EstimatorId {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorId::MapVertex => "map-vertex",
            EstimatorId::MapFreq => "map-freq",
            EstimatorId::EgfdMap => "egfd-map",
            EstimatorId::SgspMap => "sgsp-map",
            EstimatorId::GspMap => "gsp-map",
            EstimatorId::Lmmse => "lmmse",
            EstimatorId::GspLmmse => "gsp-lmmse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "map-vertex" => Ok(EstimatorId::MapVertex),
            "map-freq" => Ok(EstimatorId::MapFreq),
            "egfd-map" => Ok(EstimatorId::EgfdMap),
            "sgsp-map" => Ok(EstimatorId::SgspMap),
            "gsp-map" => Ok(EstimatorId::GspMap),
            "lmmse" => Ok(EstimatorId::Lmmse),
            "gsp-lmmse" => Ok(EstimatorId::GspLmmse),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }

    fn iterative_kind(&self) -> Option<EstimatorKind> {
        match self {
            EstimatorId::MapVertex => Some(EstimatorKind::MapVertex),
            EstimatorId::MapFreq => Some(EstimatorKind::MapFreq),
            EstimatorId::EgfdMap => Some(EstimatorKind::EgfdMap),
            EstimatorId::SgspMap => Some(EstimatorKind::SgspMap),
            EstimatorId::GspMap => Some(EstimatorKind::GspMap),
            _ => None,
        }
    }
}

/// How iterative estimators are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitPolicy {
    PriorMean,
    GspLmmse,
    Lmmse,
}

/// Which power-system case a scenario uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseSource {
    Bundled118,
    Bundled57,
    Toy3,
    Path(String),
}

impl CaseSource {
    pub fn load(&self) -> Result<PowerCase> {
        match self {
            CaseSource::Bundled118 => Ok(PowerCase::bundled_118()),
            CaseSource::Bundled57 => Ok(PowerCase::bundled_57()),
            CaseSource::Toy3 => Ok(PowerCase::bundled_toy3()),
            CaseSource::Path(p) => PowerCase::load(p),
        }
    }
}

/// Parameters for the synthetic cubic-model scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleAParams {
    pub sigma_x2: f64,
    pub sigma_w2: f64,
    pub mean_degree: usize,
    pub rewire_prob: f64,
    /// Regenerate the graph for every trial instead of reusing one graph per
    /// grid point.
    pub graph_per_trial: bool,
}

impl Default for ExampleAParams {
    fn default() -> Self {
        Self {
            sigma_x2: 0.5,
            sigma_w2: 0.05,
            mean_degree: 5,
            rewire_prob: 0.2,
            graph_per_trial: false,
        }
    }
}

/// Parameters for the power-system scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsseParams {
    pub case: CaseSource,
    pub beta: f64,
    pub sigma_w2: f64,
}

impl Default for PsseParams {
    fn default() -> Self {
        Self { case: CaseSource::Bundled118, beta: 3.0, sigma_w2: 0.05 }
    }
}

/// One full experiment: a sweep grid, a trial count, and an estimator list,
/// reproducible from the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorId>,
    #[serde(default = "default_init")]
    pub init: InitPolicy,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub example_a: ExampleAParams,
    #[serde(default)]
    pub psse: PsseParams,
    /// Training pairs for the sample-mean linear estimators.
    #[serde(default = "default_training_samples")]
    pub training_samples: usize,
    /// Diagonal loading for the sample-mean linear estimators.
    #[serde(default = "default_linear_eps")]
    pub linear_eps_dl: f64,
    /// Worker-thread bound; `None` uses all cores, `Some(1)` is sequential.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_init() -> InitPolicy {
    InitPolicy::GspLmmse
}

fn default_training_samples() -> usize {
    500
}

fn default_linear_eps() -> f64 {
    crate::stats::DEFAULT_DIAGONAL_LOADING
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid must be nonempty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("estimator list must be nonempty".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MetricKind {
    Nmse,
    Nmspe,
    RuntimeSeconds,
}

impl MetricKind {
    fn label(&self) -> &'static str {
        match self {
            MetricKind::Nmse => "nmse",
            MetricKind::Nmspe => "nmspe",
            MetricKind::RuntimeSeconds => "runtime_s",
        }
    }
}

/// Everything needed to run the trials of one grid point.
pub struct ScenarioContext {
    pub basis: Arc<SpectralBasis>,
    pub model: Box<dyn MeasurementModel>,
    pub prior: GaussianPrior,
    pub noise: NoiseModel,
    /// Baseline linear estimators reported in result rows.
    pub lmmse: Option<Lmmse>,
    pub gsp_lmmse: Option<GspLmmse>,
    /// Estimators used to initialize the iterative runs; for the
    /// topology-perturbation sweep this is the misspecified one.
    pub init_lmmse: Option<Lmmse>,
    pub init_gsp_lmmse: Option<GspLmmse>,
    /// Standard deviation of the frequency-domain init perturbation.
    pub init_noise_std: f64,
    pub init_policy: InitPolicy,
    pub solver: SolverConfig,
    metric: MetricKind,
}

/// Builds the context of grid point `grid_index`.
pub fn build_context(scenario: &Scenario, grid_index: usize) -> Result<ScenarioContext> {
    scenario.validate()?;
    let point = scenario.grid[grid_index];
    if scenario.kind.is_example_a() {
        let n = point as usize;
        if n as f64 != point || n <= scenario.example_a.mean_degree {
            return Err(Error::InvalidConfig(format!(
                "grid value {point} is not a valid vertex count"
            )));
        }
        let graph_seed = derive_seed(scenario.seed, STREAM_GRAPH + grid_index as u64, 0);
        let graph = watts_strogatz(
            n,
            scenario.example_a.mean_degree,
            scenario.example_a.rewire_prob,
            graph_seed,
        )?;
        example_a_context(scenario, &graph)
    } else {
        psse_context(scenario, grid_index, point)
    }
}

fn example_a_context(scenario: &Scenario, graph: &Graph) -> Result<ScenarioContext> {
    let n = graph.n_vertices();
    let p = &scenario.example_a;
    let basis = Arc::new(SpectralBasis::new(&graph.laplacian())?);
    let prior = GaussianPrior::from_freq_diag(
        DVector::zeros(n),
        DVector::from_element(n, p.sigma_x2),
        basis.clone(),
    )?;
    let noise = NoiseModel::isotropic(p.sigma_w2, basis.clone())?;
    let model = CubicFrequencyModel::new(basis.clone());
    // Analytic moments of the cubic model: C_x̃ỹ = 3σ_x⁴ I,
    // C_ỹỹ = (σ_w² + 15σ_x⁶) I.
    let c_xy = 3.0 * p.sigma_x2.powi(2);
    let c_yy = p.sigma_w2 + 15.0 * p.sigma_x2.powi(3);
    let lmmse = Lmmse::from_moments(
        DVector::zeros(n),
        DVector::zeros(n),
        &(DMatrix::identity(n, n) * c_xy),
        &(DMatrix::identity(n, n) * c_yy),
    )?;
    let gsp_lmmse = GspLmmse::from_moments(
        basis.clone(),
        DVector::zeros(n),
        DVector::zeros(n),
        &DVector::from_element(n, c_xy),
        &DVector::from_element(n, c_yy),
        0.0,
    )?;
    let metric = if scenario.kind == ScenarioKind::ExampleARuntimeVsN {
        MetricKind::RuntimeSeconds
    } else {
        MetricKind::Nmse
    };
    Ok(ScenarioContext {
        basis,
        model: Box::new(model),
        prior,
        noise,
        lmmse: Some(lmmse.clone()),
        gsp_lmmse: Some(gsp_lmmse.clone()),
        init_lmmse: Some(lmmse),
        init_gsp_lmmse: Some(gsp_lmmse),
        init_noise_std: 0.0,
        init_policy: scenario.init,
        solver: scenario.solver.clone(),
        metric,
    })
}

fn psse_context(scenario: &Scenario, grid_index: usize, point: f64) -> Result<ScenarioContext> {
    let case = scenario.psse.case.load()?;
    let basis = Arc::new(case.spectral_basis()?);
    let beta = if scenario.kind == ScenarioKind::PsseNmspeVsBeta { point } else { scenario.psse.beta };
    let sigma_w2 =
        if scenario.kind == ScenarioKind::PsseNmspeVsNoise { point } else { scenario.psse.sigma_w2 };
    if sigma_w2 <= 0.0 {
        return Err(Error::InvalidConfig(format!("noise variance must be positive, got {sigma_w2}")));
    }
    let prior = GaussianPrior::smooth(basis.clone(), beta)?;
    let noise = NoiseModel::isotropic(sigma_w2, basis.clone())?;
    let model = case.ac_model(basis.clone());

    let train_seed = derive_seed(scenario.seed, STREAM_TRAIN + grid_index as u64, 0);
    let training =
        TrainingSet::generate(&model, &prior, &noise, scenario.training_samples, train_seed);
    let lmmse = Lmmse::from_training(&training, scenario.linear_eps_dl)?;
    let gsp_lmmse = GspLmmse::from_training(&training, basis.clone(), scenario.linear_eps_dl)?;

    let mut init_gsp_lmmse = gsp_lmmse.clone();
    let mut reported_gsp = gsp_lmmse;
    let mut init_noise_std = 0.0;
    match scenario.kind {
        ScenarioKind::InitNoiseSweep => {
            if point < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "init perturbation variance must be nonnegative, got {point}"
                )));
            }
            init_noise_std = point.sqrt();
        }
        ScenarioKind::TopologyPerturbationSweep => {
            let removed = point.round() as usize;
            if removed > 0 {
                // Misspecified linear estimator: trained on true-model data
                // but built over the perturbed graph's spectral basis.
                let graph = Graph::from_weights(-case.susceptance().clone())?;
                let perturb_seed =
                    derive_seed(scenario.seed, STREAM_PERTURB + grid_index as u64, 0);
                let perturbed = remove_edges(&graph, removed, perturb_seed)?;
                let perturbed_basis = Arc::new(SpectralBasis::new(&perturbed.laplacian())?);
                let misspecified =
                    GspLmmse::from_training(&training, perturbed_basis, scenario.linear_eps_dl)?;
                init_gsp_lmmse = misspecified.clone();
                reported_gsp = misspecified;
            }
        }
        _ => {}
    }

    Ok(ScenarioContext {
        basis,
        model: Box::new(model),
        prior,
        noise,
        lmmse: Some(lmmse.clone()),
        gsp_lmmse: Some(reported_gsp),
        init_lmmse: Some(lmmse),
        init_gsp_lmmse: Some(init_gsp_lmmse),
        init_noise_std,
        init_policy: scenario.init,
        solver: scenario.solver.clone(),
        metric: MetricKind::Nmspe,
    })
}

/// Initial vector for one trial: the configured base initializer, plus the
/// scenario's frequency-domain perturbation when active
/// (`x̂⁽⁰⁾ = V(x̃₀ + p̃₀)` with `p̃₀ ~ N(0, σ_p² I)`).
pub fn scenario_init(ctx: &ScenarioContext, y: &DVector<f64>, rng: &mut StdRng) -> DVector<f64> {
    let base = match ctx.init_policy {
        InitPolicy::PriorMean => ctx.prior.mean().clone(),
        InitPolicy::GspLmmse => ctx
            .init_gsp_lmmse
            .as_ref()
            .map(|e| e.estimate(y))
            .unwrap_or_else(|| ctx.prior.mean().clone()),
        InitPolicy::Lmmse => ctx
            .init_lmmse
            .as_ref()
            .map(|e| e.estimate(y))
            .unwrap_or_else(|| ctx.prior.mean().clone()),
    };
    if ctx.init_noise_std == 0.0 {
        return base;
    }
    let mut freq = ctx.basis.to_freq(&base);
    for i in 0..freq.len() {
        let z: f64 = StandardNormal.sample(rng);
        freq[i] += ctx.init_noise_std * z;
    }
    ctx.basis.to_vertex(&freq)
}

#[derive(Debug, Clone, Copy)]
struct TrialRecord {
    metric: f64,
    seconds: f64,
    iterations: f64,
    diverged: bool,
}

fn run_trial(
    scenario: &Scenario,
    ctx: &ScenarioContext,
    grid_index: usize,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let trial_seed = derive_seed(scenario.seed, STREAM_TRIAL + grid_index as u64, trial as u64);
    let mut rng = StdRng::seed_from_u64(trial_seed);

    // Per-trial graph regeneration rebuilds the whole point context.
    let local_ctx;
    let ctx = if scenario.kind.is_example_a() && scenario.example_a.graph_per_trial {
        let n = scenario.grid[grid_index] as usize;
        let graph_seed =
            derive_seed(scenario.seed, STREAM_GRAPH + grid_index as u64, trial as u64 + 1);
        let graph = watts_strogatz(
            n,
            scenario.example_a.mean_degree,
            scenario.example_a.rewire_prob,
            graph_seed,
        )?;
        local_ctx = example_a_context(scenario, &graph)?;
        &local_ctx
    } else {
        ctx
    };

    let truth = ctx.prior.sample(&mut rng);
    let w = ctx.noise.sample(&mut rng);
    let y = ctx.model.evaluate(&truth) + w;
    let init = scenario_init(ctx, &y, &mut rng);

    let metric_of = |estimate: &DVector<f64>| match ctx.metric {
        MetricKind::Nmse | MetricKind::RuntimeSeconds => {
            (&truth - estimate).norm_squared() / truth.len() as f64
        }
        MetricKind::Nmspe => nmspe(&truth, estimate),
    };

    let mut records = Vec::with_capacity(scenario.estimators.len());
    for est in &scenario.estimators {
        let record = match est.iterative_kind() {
            Some(kind) => {
                match run_estimator(
                    kind,
                    &y,
                    &ctx.prior,
                    &ctx.noise,
                    ctx.model.as_ref(),
                    &init,
                    &ctx.solver,
                ) {
                    Ok(run) => {
                        let est_vec = run.estimate_vector();
                        let value = match ctx.metric {
                            MetricKind::RuntimeSeconds => run.wall_time,
                            _ => metric_of(&est_vec),
                        };
                        TrialRecord {
                            metric: value,
                            seconds: run.wall_time,
                            iterations: run.iterations as f64,
                            diverged: false,
                        }
                    }
                    // A failed run counts as a divergence and falls back to
                    // the initializer as its estimate.
                    Err(_) => TrialRecord {
                        metric: match ctx.metric {
                            MetricKind::RuntimeSeconds => 0.0,
                            _ => metric_of(&init),
                        },
                        seconds: 0.0,
                        iterations: 0.0,
                        diverged: true,
                    },
                }
            }
            None => {
                let start = Instant::now();
                let estimate = match est {
                    EstimatorId::Lmmse => ctx
                        .lmmse
                        .as_ref()
                        .map(|e| e.estimate(&y))
                        .unwrap_or_else(|| ctx.prior.mean().clone()),
                    EstimatorId::GspLmmse => ctx
                        .gsp_lmmse
                        .as_ref()
                        .map(|e| e.estimate(&y))
                        .unwrap_or_else(|| ctx.prior.mean().clone()),
                    _ => unreachable!("iterative kinds handled above"),
                };
                let seconds = start.elapsed().as_secs_f64();
                let value = match ctx.metric {
                    MetricKind::RuntimeSeconds => seconds,
                    _ => metric_of(&estimate),
                };
                TrialRecord { metric: value, seconds, iterations: 0.0, diverged: false }
            }
        };
        records.push(record);
    }
    Ok(records)
}

/// One aggregated result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub point: f64,
    pub estimator: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub time_mean: f64,
    pub iters_mean: f64,
    pub diverged: u64,
}

/// Aggregated results of a scenario, one row per (grid point, estimator).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, point: f64, estimator: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.point == point && r.estimator == estimator)
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.scenario
                .cmp(&b.scenario)
                .then(a.point.total_cmp(&b.point))
                .then(a.estimator.cmp(&b.estimator))
                .then(a.metric.cmp(&b.metric))
        });
    }
}

/// Runs every grid point and trial of a scenario; trials execute
/// concurrently with per-trial RNG streams derived from the master seed, so
/// the metric columns are reproducible regardless of thread count.
pub fn run_scenario(scenario: &Scenario) -> Result<ResultTable> {
    scenario.validate()?;
    let mut table = ResultTable::default();
    for (gi, &point) in scenario.grid.iter().enumerate() {
        let ctx = build_context(scenario, gi)?;
        let outcomes = parallel::map_indexed(scenario.trials, scenario.workers, |trial| {
            run_trial(scenario, &ctx, gi, trial)
        });
        let mut per_estimator: Vec<Vec<TrialRecord>> =
            vec![Vec::with_capacity(scenario.trials); scenario.estimators.len()];
        for outcome in outcomes {
            let records = outcome?;
            for (slot, record) in per_estimator.iter_mut().zip(records) {
                slot.push(record);
            }
        }
        for (est, records) in scenario.estimators.iter().zip(per_estimator) {
            table.rows.push(aggregate(scenario, &ctx, point, est, &records));
        }
    }
    table.sort();
    Ok(table)
}

fn aggregate(
    scenario: &Scenario,
    ctx: &ScenarioContext,
    point: f64,
    est: &EstimatorId,
    records: &[TrialRecord],
) -> ResultRow {
    let t = records.len() as f64;
    let mean = records.iter().map(|r| r.metric).sum::<f64>() / t;
    let stderr = if records.len() > 1 {
        let var = records.iter().map(|r| (r.metric - mean).powi(2)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    } else {
        0.0
    };
    ResultRow {
        scenario: scenario.kind.label().to_string(),
        point,
        estimator: est.label().to_string(),
        metric: ctx.metric.label().to_string(),
        mean,
        stderr,
        time_mean: records.iter().map(|r| r.seconds).sum::<f64>() / t,
        iters_mean: records.iter().map(|r| r.iterations).sum::<f64>() / t,
        diverged: records.iter().filter(|r| r.diverged).count() as u64,
    }
}

/// Output format for result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

const CSV_HEADER: [&str; 9] = [
    "scenario",
    "point",
    "estimator",
    "metric",
    "mean",
    "stderr",
    "time_mean",
    "iters_mean",
    "diverged",
];

/// Writes a result table with a stable column order and one header row.
pub fn write_results<W: Write>(table: &ResultTable, writer: W, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => serde_json::to_writer_pretty(writer, &table.rows)
            .map_err(|e| Error::ParseError { line: 0, message: e.to_string() }),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for r in &table.rows {
                w.write_record(&[
                    r.scenario.clone(),
                    format!("{}", r.point),
                    r.estimator.clone(),
                    r.metric.clone(),
                    format!("{}", r.mean),
                    format!("{}", r.stderr),
                    format!("{}", r.time_mean),
                    format!("{}", r.iters_mean),
                    format!("{}", r.diverged),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

/// Reads a table previously written by [`write_results`].
pub fn read_results<R: Read>(reader: R, format: OutputFormat) -> Result<ResultTable> {
    match format {
        OutputFormat::Json => {
            let rows: Vec<ResultRow> = serde_json::from_reader(reader)
                .map_err(|e| Error::ParseError { line: 0, message: e.to_string() })?;
            Ok(ResultTable { rows })
        }
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(reader);
            let mut rows = Vec::new();
            for (idx, record) in r.records().enumerate() {
                let record = record.map_err(csv_err)?;
                if record.len() != CSV_HEADER.len() {
                    return Err(Error::ParseError {
                        line: idx + 2,
                        message: format!("expected 9 fields, got {}", record.len()),
                    });
                }
                let field = |i: usize| -> std::result::Result<f64, Error> {
                    record[i].parse::<f64>().map_err(|e| Error::ParseError {
                        line: idx + 2,
                        message: e.to_string(),
                    })
                };
                rows.push(ResultRow {
                    scenario: record[0].to_string(),
                    point: field(1)?,
                    estimator: record[2].to_string(),
                    metric: record[3].to_string(),
                    mean: field(4)?,
                    stderr: field(5)?,
                    time_mean: field(6)?,
                    iters_mean: field(7)?,
                    diverged: field(8)? as u64,
                });
            }
            Ok(ResultTable { rows })
        }
    }
}

/// Writes results to a file, choosing the encoding from `format`.
pub fn emit_results(table: &ResultTable, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    write_results(table, std::fs::File::create(path)?, format)
}

/// Reads results from a file written by [`emit_results`].
pub fn parse_results(path: impl AsRef<Path>, format: OutputFormat) -> Result<ResultTable> {
    read_results(std::fs::File::open(path)?, format)
}

fn csv_err(e: csv::Error) -> Error {
    Error::ParseError { line: 0, message: e.to_string() }
}

// ---------------------------------------------------------------------------
// Update-step scaling benchmark
// ---------------------------------------------------------------------------

/// Per-estimator scaling measurements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub estimator: String,
    /// Median per-step wall time in seconds, one entry per size.
    pub median_step_seconds: Vec<f64>,
    /// Least-squares slope of log(time) versus log(N).
    pub loglog_slope: f64,
    /// Published FLOP-count predictions for the update rules, per size.
    pub predicted_flops: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub sizes: Vec<usize>,
    pub entries: Vec<ScalingEntry>,
}

impl ScalingReport {
    pub fn entry(&self, estimator: &str) -> Option<&ScalingEntry> {
        self.entries.iter().find(|e| e.estimator == estimator)
    }
}

fn loglog_slope(sizes: &[usize], times: &[f64]) -> f64 {
    let n = sizes.len() as f64;
    let xs: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|&t| t.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Times one update step of each estimator kind on the cubic model per graph
/// size, excluding the offline eigendecomposition and covariance inversions.
/// Returns median per-step times, fitted log-log slopes, and the published
/// FLOP predictions for comparison.
pub fn benchmark_update_steps(sizes: &[usize], repeats: usize) -> Result<ScalingReport> {
    if sizes.len() < 3 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "need at least 3 strictly ascending sizes".into(),
        ));
    }
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    use crate::estimator::{
        egfd_step, gsp_map_filters, gsp_update, map_step_freq, sgsp_map_filters,
    };
    use crate::stats::sample_covariances;
    use std::hint::black_box;

    let labels = ["map-freq", "egfd-map", "sgsp-map", "gsp-map"];
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];

    for &n in sizes {
        let graph = watts_strogatz(n, 5, 0.2, 42 + n as u64)?;
        let basis = Arc::new(SpectralBasis::new(&graph.laplacian())?);
        let prior = GaussianPrior::from_freq_diag(
            DVector::zeros(n),
            DVector::from_element(n, 0.5),
            basis.clone(),
        )?;
        let noise = NoiseModel::isotropic(0.05, basis.clone())?;
        let model = CubicFrequencyModel::new(basis.clone());
        let mut rng = StdRng::seed_from_u64(derive_seed(7, n as u64, 0));
        let x: DVector<f64> =
            DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)) * 0.7;
        let y_freq: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));

        let mut steps: Vec<Box<dyn FnMut()>> = vec![
            Box::new(|| {
                black_box(map_step_freq(&x, &prior, &noise, &model, &y_freq, 0.5).unwrap());
            }),
            Box::new(|| {
                black_box(egfd_step(&x, &prior, &noise, &model, &y_freq, 0.5));
            }),
            Box::new(|| {
                let g = model.evaluate_freq(&x);
                let covs = sample_covariances(&x, prior.mean_freq(), &y_freq, &g);
                let (f1, f2) =
                    sgsp_map_filters(&x, &covs, &prior, &noise, &model, 1e-9).unwrap();
                black_box(gsp_update(&x, &f1, &f2, 0.5, prior.mean_freq(), &(&y_freq - &g)));
            }),
            Box::new(|| {
                let g = model.evaluate_freq(&x);
                let (f1, f2) = gsp_map_filters(&x, &prior, &noise, &model).unwrap();
                black_box(gsp_update(&x, &f1, &f2, 0.5, prior.mean_freq(), &(&y_freq - &g)));
            }),
        ];

        for (slot, step) in steps.iter_mut().enumerate() {
            times[slot].push(median_step_time(step.as_mut(), repeats));
        }
    }

    let flops: [fn(f64) -> f64; 4] = [
        |n| 11.0 * n.powi(3) + 2.5 * n * n + 1.5 * n,
        |n| 11.0 * n,
        |n| 10.0 * n.powi(3) + 10.5 * n * n + 4.0 * n,
        |n| 10.0 * n.powi(3) + 6.0 * n * n + 5.0 * n,
    ];
    let entries = labels
        .iter()
        .zip(times)
        .zip(flops)
        .map(|((label, t), f)| ScalingEntry {
            estimator: label.to_string(),
            loglog_slope: loglog_slope(sizes, &t),
            median_step_seconds: t,
            predicted_flops: sizes.iter().map(|&s| f(s as f64)).collect(),
        })
        .collect();
    Ok(ScalingReport { sizes: sizes.to_vec(), entries })
}

fn median_step_time(step: &mut dyn FnMut(), repeats: usize) -> f64 {
    // Calibrate an inner loop so each measurement spans at least ~2 ms.
    let t0 = Instant::now();
    step();
    let once = t0.elapsed().as_secs_f64().max(1e-9);
    let inner = ((2e-3 / once) as usize).clamp(1, 20_000);
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        for _ in 0..inner {
            step();
        }
        samples.push(t.elapsed().as_secs_f64() / inner as f64);
    }
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}
