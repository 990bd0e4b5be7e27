//! Command-line driver for the Monte Carlo experiments and benchmarks.

use clap::{Args, Parser, Subcommand};
use gsmap_core::estimator::SolverConfig;
use gsmap_core::harness::{
    benchmark_update_steps, emit_results, run_scenario, CaseSource, EstimatorId, ExampleAParams,
    InitPolicy, OutputFormat, PsseParams, Scenario, ScenarioKind,
};
use gsmap_core::psse::{calibrate_beta, PowerCase};
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable supplying the default worker-thread count.
const THREADS_ENV: &str = "GSMAP_THREADS";

#[derive(Parser)]
#[command(
    name = "gsmap",
    about = "MAP estimation of graph signals: Monte Carlo experiments and benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Master seed; all per-trial RNG streams derive from it.
    #[arg(long)]
    seed: u64,
    /// Monte Carlo trials per grid point.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Worker-thread bound (1 = sequential); defaults to GSMAP_THREADS or
    /// all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// JSON scenario file overriding the flag-built scenario; the seed,
    /// trials, and workers flags still apply on top.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated estimators
    /// (map-vertex,map-freq,egfd-map,sgsp-map,gsp-map,lmmse,gsp-lmmse).
    #[arg(long)]
    estimators: Option<String>,
    /// Initializer for the iterative estimators: prior-mean, gsp-lmmse, or
    /// lmmse.
    #[arg(long, default_value = "gsp-lmmse")]
    init: String,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic cubic-model experiment over a grid of graph sizes.
    ExampleA {
        #[command(flatten)]
        common: CommonArgs,
        /// Graph sizes to sweep.
        #[arg(long, default_value = "20,50,100,200", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        sigma_x2: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma_w2: f64,
        /// Report per-run wall time instead of NMSE.
        #[arg(long)]
        runtime: bool,
        /// Regenerate the graph every trial instead of once per size.
        #[arg(long)]
        graph_per_trial: bool,
    },
    /// Power-system state estimation sweeps on a bundled or external case.
    Psse {
        #[command(flatten)]
        common: CommonArgs,
        /// Case file path; defaults to the bundled 118-bus network.
        #[arg(long)]
        case: Option<PathBuf>,
        /// Use the bundled 57-bus network instead of the 118-bus one.
        #[arg(long)]
        bus57: bool,
        /// Sweep axis: noise (grid = noise variances) or beta (grid = beta).
        #[arg(long, default_value = "noise")]
        sweep: String,
        /// Sweep grid values.
        #[arg(long, default_value = "0.01,0.02,0.05,0.1,0.2,0.5,1.0", value_delimiter = ',')]
        grid: Vec<f64>,
        /// Smoothness level of the phase prior (fixed when sweeping noise).
        #[arg(long, default_value_t = 3.0)]
        beta: f64,
        /// Noise variance (fixed when sweeping beta).
        #[arg(long, default_value_t = 0.05)]
        sigma_w2: f64,
        /// Training pairs for the sample-mean linear estimators.
        #[arg(long, default_value_t = 500)]
        training_samples: usize,
    },
    /// Sensitivity of the iterative estimators to a perturbed initializer.
    InitSensitivity {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long)]
        bus57: bool,
        /// Perturbation mode: noise (grid = init-noise variances) or
        /// topology (grid = removed edge counts).
        #[arg(long, default_value = "noise")]
        mode: String,
        #[arg(long, default_value = "0.01,0.1,1,10,100", value_delimiter = ',')]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 3.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma_w2: f64,
        #[arg(long, default_value_t = 500)]
        training_samples: usize,
    },
    /// Per-step scaling benchmark of the update rules.
    Bench {
        /// Graph sizes (ascending, at least 3).
        #[arg(long, default_value = "64,128,256,512", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Output file for the JSON report; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect a power-system case file.
    CaseInfo {
        /// Case file path; defaults to the bundled 118-bus network.
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long)]
        bus57: bool,
    },
}

fn parse_estimators(spec: &Option<String>, default: &[EstimatorId]) -> Result<Vec<EstimatorId>, String> {
    match spec {
        None => Ok(default.to_vec()),
        Some(s) => s
            .split(',')
            .map(|tok| EstimatorId::parse(tok.trim()).map_err(|e| e.to_string()))
            .collect(),
    }
}

fn parse_init(s: &str) -> Result<InitPolicy, String> {
    match s {
        "prior-mean" => Ok(InitPolicy::PriorMean),
        "gsp-lmmse" => Ok(InitPolicy::GspLmmse),
        "lmmse" => Ok(InitPolicy::Lmmse),
        other => Err(format!("unknown init policy '{other}'")),
    }
}

fn env_workers() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok())
}

fn case_source(case: &Option<PathBuf>, bus57: bool) -> CaseSource {
    match case {
        Some(path) => CaseSource::Path(path.display().to_string()),
        None if bus57 => CaseSource::Bundled57,
        None => CaseSource::Bundled118,
    }
}

fn finish_scenario(mut scenario: Scenario, common: &CommonArgs) -> Result<Scenario, String> {
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        scenario = serde_json::from_str(&text).map_err(|e| format!("bad scenario config: {e}"))?;
    }
    scenario.seed = common.seed;
    scenario.trials = common.trials;
    scenario.workers = common.workers.or_else(env_workers);
    if common.config.is_none() {
        scenario.estimators = parse_estimators(&common.estimators, &scenario.estimators)?;
        scenario.init = parse_init(&common.init)?;
    }
    Ok(scenario)
}

fn emit(table: &gsmap_core::harness::ResultTable, common: &CommonArgs) -> Result<(), String> {
    let format = OutputFormat::parse(&common.format).map_err(|e| e.to_string())?;
    match &common.out {
        Some(path) => emit_results(table, path, format).map_err(|e| e.to_string()),
        None => gsmap_core::harness::write_results(table, std::io::stdout().lock(), format)
            .map_err(|e| e.to_string()),
    }
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::ExampleA { common, sizes, sigma_x2, sigma_w2, runtime, graph_per_trial } => {
            let scenario = Scenario {
                kind: if runtime {
                    ScenarioKind::ExampleARuntimeVsN
                } else {
                    ScenarioKind::ExampleANmseVsN
                },
                grid: sizes.iter().map(|&n| n as f64).collect(),
                trials: common.trials,
                seed: common.seed,
                estimators: vec![
                    EstimatorId::Lmmse,
                    EstimatorId::GspLmmse,
                    EstimatorId::MapFreq,
                    EstimatorId::EgfdMap,
                    EstimatorId::SgspMap,
                    EstimatorId::GspMap,
                ],
                init: InitPolicy::GspLmmse,
                solver: SolverConfig::default(),
                example_a: ExampleAParams { sigma_x2, sigma_w2, graph_per_trial, ..Default::default() },
                psse: PsseParams::default(),
                training_samples: 500,
                linear_eps_dl: 1e-6,
                workers: None,
            };
            let scenario = finish_scenario(scenario, &common)?;
            let table = run_scenario(&scenario).map_err(|e| e.to_string())?;
            emit(&table, &common)
        }
        Command::Psse {
            common,
            case,
            bus57,
            sweep,
            grid,
            beta,
            sigma_w2,
            training_samples,
        } => {
            let kind = match sweep.as_str() {
                "noise" => ScenarioKind::PsseNmspeVsNoise,
                "beta" => ScenarioKind::PsseNmspeVsBeta,
                other => return Err(format!("unknown sweep '{other}' (expected noise or beta)")),
            };
            let scenario = Scenario {
                kind,
                grid,
                trials: common.trials,
                seed: common.seed,
                estimators: vec![
                    EstimatorId::Lmmse,
                    EstimatorId::GspLmmse,
                    EstimatorId::MapFreq,
                    EstimatorId::EgfdMap,
                    EstimatorId::SgspMap,
                    EstimatorId::GspMap,
                ],
                init: InitPolicy::GspLmmse,
                solver: SolverConfig::default(),
                example_a: ExampleAParams::default(),
                psse: PsseParams { case: case_source(&case, bus57), beta, sigma_w2 },
                training_samples,
                linear_eps_dl: 1e-6,
                workers: None,
            };
            let scenario = finish_scenario(scenario, &common)?;
            let table = run_scenario(&scenario).map_err(|e| e.to_string())?;
            emit(&table, &common)
        }
        Command::InitSensitivity {
            common,
            case,
            bus57,
            mode,
            grid,
            beta,
            sigma_w2,
            training_samples,
        } => {
            let kind = match mode.as_str() {
                "noise" => ScenarioKind::InitNoiseSweep,
                "topology" => ScenarioKind::TopologyPerturbationSweep,
                other => return Err(format!("unknown mode '{other}' (expected noise or topology)")),
            };
            let scenario = Scenario {
                kind,
                grid,
                trials: common.trials,
                seed: common.seed,
                estimators: vec![
                    EstimatorId::GspLmmse,
                    EstimatorId::MapFreq,
                    EstimatorId::EgfdMap,
                    EstimatorId::SgspMap,
                    EstimatorId::GspMap,
                ],
                init: InitPolicy::GspLmmse,
                solver: SolverConfig::default(),
                example_a: ExampleAParams::default(),
                psse: PsseParams { case: case_source(&case, bus57), beta, sigma_w2 },
                training_samples,
                linear_eps_dl: 1e-6,
                workers: None,
            };
            let scenario = finish_scenario(scenario, &common)?;
            let table = run_scenario(&scenario).map_err(|e| e.to_string())?;
            emit(&table, &common)
        }
        Command::Bench { sizes, repeats, out } => {
            let report = benchmark_update_steps(&sizes, repeats).map_err(|e| e.to_string())?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
            match out {
                Some(path) => std::fs::write(path, json).map_err(|e| e.to_string())?,
                None => println!("{json}"),
            }
            eprintln!("estimator       slope   per-step seconds");
            for entry in &report.entries {
                eprintln!(
                    "{:14} {:6.2}   {:?}",
                    entry.estimator, entry.loglog_slope, entry.median_step_seconds
                );
            }
            Ok(())
        }
        Command::CaseInfo { case, bus57 } => {
            let loaded = match &case {
                Some(path) => PowerCase::load(path).map_err(|e| e.to_string())?,
                None if bus57 => PowerCase::bundled_57(),
                None => PowerCase::bundled_118(),
            };
            let basis = loaded.spectral_basis().map_err(|e| e.to_string())?;
            let n = loaded.n_buses();
            println!("buses:            {n}");
            println!("lines:            {}", loaded.lines().len());
            println!("lambda_2:         {:.6}", basis.eigenvalues()[1]);
            println!("lambda_max:       {:.6}", basis.eigenvalues()[n - 1]);
            let beta = calibrate_beta(&basis, 0.01).map_err(|e| e.to_string())?;
            println!("beta(P[|x|>pi]<=0.01): {beta:.4}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
