//! Iterative MAP-family estimators: Gauss-Newton in the vertex and
//! graph-frequency domains, the elementwise frequency-domain variant, and
//! the two graph-filter-constrained variants, plus their objective functions
//! and the backtracking line search shared by all of them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::measurement::MeasurementModel;
use crate::stats::{sample_covariances, GaussianPrior, NoiseModel, SampleCovariances};

/// Which iterative estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Gauss-Newton on the vertex-domain objective.
    MapVertex,
    /// Gauss-Newton on the graph-frequency-domain objective.
    MapFreq,
    /// Elementwise graph-frequency-domain update: all covariance inverses and
    /// the Jacobian replaced by their frequency-domain diagonals; O(N) per
    /// step.
    EgfdMap,
    /// Graph-filter update with filters fit to the single-sample covariances
    /// of the current iterate and residual.
    SgspMap,
    /// Graph-filter update with filters minimizing the expected linearized
    /// objective.
    GspMap,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::MapVertex => "map-vertex",
            EstimatorKind::MapFreq => "map-freq",
            EstimatorKind::EgfdMap => "egfd-map",
            EstimatorKind::SgspMap => "sgsp-map",
            EstimatorKind::GspMap => "gsp-map",
        }
    }
}

/// Solver hyperparameters.
///
/// The defaults are the step-size and stopping parameters used throughout
/// the experiments; the iteration caps are safety bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial line-search step in (0, 1].
    pub alpha0: f64,
    /// Step shrink factor in (0, 1).
    pub gamma: f64,
    /// Stopping tolerance on the iterate change norm.
    pub delta: f64,
    /// Sufficient-decrease fraction in the line-search test.
    pub sufficient_decrease: f64,
    /// Maximum line-search trials before declaring a stall.
    pub k_max: usize,
    /// Maximum outer iterations.
    pub t_max: usize,
    /// Diagonal loading for the sample-covariance filter systems, scaled by
    /// `trace / N`.
    pub diag_load_eps: f64,
    /// Bandlimited mode: frequencies at or above this cutoff index are held
    /// at zero.
    pub bandlimit: Option<usize>,
    /// Record the frequency-domain iterate after every accepted step.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.5,
            gamma: 0.83,
            delta: 0.1,
            sufficient_decrease: 0.01,
            k_max: 30,
            t_max: 100,
            diag_load_eps: 1e-12,
            bandlimit: None,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha0 must be in (0, 1], got {}",
                self.alpha0
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.delta <= 0.0 || self.delta.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sufficient-decrease fraction must be in (0, 1), got {}",
                self.sufficient_decrease
            )));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        if self.diag_load_eps < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "diag_load_eps must be nonnegative, got {}",
                self.diag_load_eps
            )));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Iterate change dropped below the tolerance.
    Converged,
    /// Line search could not find a step with sufficient decrease.
    Stalled,
    /// Outer-iteration cap reached.
    MaxIterations,
}

/// Per-iteration record of an accepted step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Objective value after the accepted step.
    pub objective: f64,
    pub step_size: f64,
    pub line_search_trials: usize,
    pub change_norm: f64,
}

/// Output of one estimator run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationRun {
    pub estimate: Vec<f64>,
    pub estimate_freq: Vec<f64>,
    /// Number of accepted steps.
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Objective at the initial iterate.
    pub initial_objective: f64,
    pub trace: Vec<IterationRecord>,
    /// Frequency-domain iterate after each accepted step, when requested.
    pub iterates_freq: Option<Vec<Vec<f64>>>,
    pub wall_time: f64,
}

impl EstimationRun {
    pub fn estimate_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.estimate)
    }
}

// ---------------------------------------------------------------------------
// Objective functions
// ---------------------------------------------------------------------------

/// Vertex-domain MAP objective
/// `Q(x) = ½(x-μ)ᵀ C_xx⁻¹ (x-μ) + ½(y-g)ᵀ C_ww⁻¹ (y-g)`.
pub fn map_objective(
    x: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    y: &DVector<f64>,
) -> f64 {
    let d = x - prior.mean();
    let r = y - model.evaluate(x);
    0.5 * prior.quad_vertex(&d) + 0.5 * noise.quad_vertex(&r)
}

/// Graph-frequency-domain MAP objective; equals `map_objective` for
/// corresponding arguments.
pub fn map_objective_freq(
    x_freq: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    y_freq: &DVector<f64>,
) -> f64 {
    let g = model.evaluate_freq(x_freq);
    map_objective_freq_with(x_freq, &g, prior, noise, y_freq)
}

fn map_objective_freq_with(
    x_freq: &DVector<f64>,
    g_freq: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    y_freq: &DVector<f64>,
) -> f64 {
    let d = x_freq - prior.mean_freq();
    let r = y_freq - g_freq;
    0.5 * prior.quad_freq(&d) + 0.5 * noise.quad_freq(&r)
}

/// Elementwise frequency-domain objective: the MAP objective with both
/// inverse covariances replaced by their diagonals.
pub fn egfd_objective(
    x_freq: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    y_freq: &DVector<f64>,
) -> f64 {
    let g = model.evaluate_freq(x_freq);
    egfd_objective_with(x_freq, &g, prior, noise, y_freq)
}

fn egfd_objective_with(
    x_freq: &DVector<f64>,
    g_freq: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    y_freq: &DVector<f64>,
) -> f64 {
    let dx = prior.ddiag_freq_inv();
    let dw = noise.ddiag_freq_inv();
    let mu = prior.mean_freq();
    let mut acc = 0.0;
    for i in 0..x_freq.len() {
        let d = x_freq[i] - mu[i];
        let r = y_freq[i] - g_freq[i];
        acc += 0.5 * d * d * dx[i] + 0.5 * r * r * dw[i];
    }
    acc
}

// ---------------------------------------------------------------------------
// Backtracking line search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct LineSearchOutcome {
    /// Accepted step size, or 0 when no trial step passed the test.
    pub alpha: f64,
    /// Number of objective evaluations spent on trial steps.
    pub trials: usize,
    /// Objective at the accepted step (the current objective when stalled).
    pub objective: f64,
}

/// Largest step in `{α₀, γα₀, γ²α₀, …, γ^{k_max}α₀}` whose proposal
/// satisfies the sufficient-decrease test
/// `Q(current) - Q(proposal) > Δ |Q(current)|`, or 0 after exhausting the
/// trial budget.
pub fn backtracking_line_search<F>(
    objective_current: f64,
    mut objective_at_step: F,
    config: &SolverConfig,
) -> LineSearchOutcome
where
    F: FnMut(f64) -> f64,
{
    let threshold = config.sufficient_decrease * objective_current.abs();
    let mut alpha = config.alpha0;
    for k in 0..=config.k_max {
        let q = objective_at_step(alpha);
        if objective_current - q > threshold {
            return LineSearchOutcome { alpha, trials: k + 1, objective: q };
        }
        alpha *= config.gamma;
    }
    LineSearchOutcome { alpha: 0.0, trials: config.k_max + 1, objective: objective_current }
}

// ---------------------------------------------------------------------------
// Update directions and steps
// ---------------------------------------------------------------------------

/// Solves `H d = rhs` for symmetric positive-definite `H`.
fn solve_spd(h: DMatrix<f64>, rhs: &DVector<f64>, err: Error) -> Result<DVector<f64>> {
    let chol = h.cholesky().ok_or(err)?;
    Ok(chol.solve(rhs))
}

/// Gauss-Newton direction for the vertex-domain objective; the next iterate
/// is `x + α u`.
fn map_direction_vertex(
    x: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    let jac = model.jacobian(x);
    let residual = y - model.evaluate(x);
    let weighted = noise.cov_inv() * &jac;
    let h = prior.cov_inv() + jac.tr_mul(&weighted);
    let grad = prior.cov_inv() * (x - prior.mean()) - jac.tr_mul(&(noise.cov_inv() * &residual));
    let d = solve_spd(h, &grad, Error::SingularNormalEquations)?;
    Ok(-d)
}

fn map_direction_freq(
    x_freq: &DVector<f64>,
    g_freq: &DVector<f64>,
    jac_freq: &DMatrix<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    y_freq: &DVector<f64>,
) -> Result<DVector<f64>> {
    let residual = y_freq - g_freq;
    let weighted = noise.cov_freq_inv() * jac_freq;
    let h = prior.cov_freq_inv() + jac_freq.tr_mul(&weighted);
    let grad = prior.cov_freq_inv() * (x_freq - prior.mean_freq())
        - jac_freq.tr_mul(&(noise.cov_freq_inv() * &residual));
    let d = solve_spd(h, &grad, Error::SingularNormalEquations)?;
    Ok(-d)
}

fn egfd_direction(
    x_freq: &DVector<f64>,
    g_freq: &DVector<f64>,
    jac_freq_diag: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    y_freq: &DVector<f64>,
) -> DVector<f64> {
    let dx = prior.ddiag_freq_inv();
    let dw = noise.ddiag_freq_inv();
    let mu = prior.mean_freq();
    DVector::from_fn(x_freq.len(), |i, _| {
        let dg = jac_freq_diag[i];
        let denom = dx[i] + dw[i] * dg * dg;
        let num = dx[i] * (x_freq[i] - mu[i]) - dw[i] * dg * (y_freq[i] - g_freq[i]);
        -num / denom
    })
}

/// One vertex-domain Gauss-Newton step with step size `alpha`.
pub fn map_step_vertex(
    iterate: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    y: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>> {
    let u = map_direction_vertex(iterate, prior, noise, model, y)?;
    Ok(iterate + u * alpha)
}

/// One frequency-domain Gauss-Newton step with step size `alpha`.
pub fn map_step_freq(
    iterate_freq: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    y_freq: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>> {
    let g = model.evaluate_freq(iterate_freq);
    let jac = model.jacobian_freq(iterate_freq);
    let u = map_direction_freq(iterate_freq, &g, &jac, prior, noise, y_freq)?;
    Ok(iterate_freq + u * alpha)
}

/// One elementwise frequency-domain step; O(N) beyond the model's
/// diagonal-Jacobian evaluation, no matrix inversion.
pub fn egfd_step(
    iterate_freq: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    y_freq: &DVector<f64>,
    alpha: f64,
) -> DVector<f64> {
    let g = model.evaluate_freq(iterate_freq);
    let dg = model.jacobian_freq_diag(iterate_freq);
    let u = egfd_direction(iterate_freq, &g, &dg, prior, noise, y_freq);
    iterate_freq + u * alpha
}

/// `M = C_x̃x̃⁻¹ + G̃ᵀ C_w̃w̃⁻¹ G̃`, the Hadamard factor shared by both
/// filter constructions.
fn filter_system_matrix(
    jac_freq: &DMatrix<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
) -> DMatrix<f64> {
    prior.cov_freq_inv() + jac_freq.tr_mul(&(noise.cov_freq_inv() * jac_freq))
}

/// Graph-filter pair minimizing the expected linearized objective:
/// `f₁ = -(C_x̃x̃ ∘ M)⁻¹ 1`, `f₂ = (C_w̃w̃ ∘ M)⁻¹ diag(G̃)` with
/// `M = C_x̃x̃⁻¹ + G̃ᵀ C_w̃w̃⁻¹ G̃`.
pub fn gsp_map_filters(
    iterate_freq: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let jac = model.jacobian_freq(iterate_freq);
    gsp_map_filters_with(&jac, prior, noise)
}

fn gsp_map_filters_with(
    jac_freq: &DMatrix<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = jac_freq.nrows();
    let m = filter_system_matrix(jac_freq, prior, noise);
    let sys1 = prior.cov_freq().component_mul(&m);
    let f1 = -solve_spd(sys1, &DVector::from_element(n, 1.0), Error::SingularFilterSystem)?;
    let sys2 = noise.cov_freq().component_mul(&m);
    let f2 = solve_spd(sys2, &jac_freq.diagonal(), Error::SingularFilterSystem)?;
    Ok((f1, f2))
}

/// Graph-filter pair fit to the single-sample covariances, with the
/// cross-covariance `S_w̃x̃` taken as zero:
/// `f₁ = -(S_x̃x̃ ∘ M)⁻¹ diag(S_x̃x̃ C_x̃x̃⁻¹)`,
/// `f₂ = (S_w̃w̃ ∘ M)⁻¹ diag(S_w̃w̃ C_w̃w̃⁻¹ G̃)`.
///
/// The rank-one sample covariances make the Hadamard systems ill-posed, so
/// they are diagonally loaded by `diag_load_eps · trace / N` before the
/// solve. Starting exactly at the prior mean gives `S_x̃x̃ = 0`; the loaded
/// solve then returns `f₁ = 0` (degenerate-start behavior).
pub fn sgsp_map_filters(
    iterate_freq: &DVector<f64>,
    covs: &SampleCovariances,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    diag_load_eps: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let jac = model.jacobian_freq(iterate_freq);
    sgsp_map_filters_with(&jac, covs, prior, noise, diag_load_eps)
}

fn loaded_hadamard_solve(
    sample_cov: &DMatrix<f64>,
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
    diag_load_eps: f64,
) -> Result<DVector<f64>> {
    let n = m.nrows();
    if rhs.iter().all(|&v| v == 0.0) {
        // Loading-dominated limit: a vanishing sample covariance carries a
        // vanishing right-hand side, and the loaded solve returns zero.
        return Ok(DVector::zeros(n));
    }
    let mut sys = sample_cov.component_mul(m);
    if diag_load_eps > 0.0 {
        let scale = sys.trace() / n as f64;
        let load = if scale > 0.0 { diag_load_eps * scale } else { diag_load_eps };
        for i in 0..n {
            sys[(i, i)] += load;
        }
    }
    solve_spd(sys, rhs, Error::SingularFilterSystem)
}

fn sgsp_map_filters_with(
    jac_freq: &DMatrix<f64>,
    covs: &SampleCovariances,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    diag_load_eps: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let m = filter_system_matrix(jac_freq, prior, noise);
    let rhs1 = diag_of_product(&covs.s_xx, prior.cov_freq_inv());
    let f1 = -loaded_hadamard_solve(&covs.s_xx, &m, &rhs1, diag_load_eps)?;
    let w_jac = noise.cov_freq_inv() * jac_freq;
    let rhs2 = diag_of_product(&covs.s_ww, &w_jac);
    let f2 = loaded_hadamard_solve(&covs.s_ww, &m, &rhs2, diag_load_eps)?;
    Ok((f1, f2))
}

fn diag_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    DVector::from_fn(n, |i, _| {
        let mut acc = 0.0;
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
        acc
    })
}

/// Graph-filter update
/// `x̂̃ ← x̂̃ + α f₁ ∘ (x̂̃ - μ̃) + α f₂ ∘ (ỹ - g̃)`.
pub fn gsp_update(
    iterate_freq: &DVector<f64>,
    f1: &DVector<f64>,
    f2: &DVector<f64>,
    alpha: f64,
    prior_mean_freq: &DVector<f64>,
    residual_freq: &DVector<f64>,
) -> DVector<f64> {
    let pull = f1.component_mul(&(iterate_freq - prior_mean_freq));
    let push = f2.component_mul(residual_freq);
    iterate_freq + (pull + push) * alpha
}

// ---------------------------------------------------------------------------
// Full iterative runs
// ---------------------------------------------------------------------------

/// Runs the selected estimator from a vertex-domain initial point.
///
/// Each outer iteration computes the kind's update direction, line-searches
/// the step size on the matching objective (the elementwise objective for
/// the elementwise estimator, the frequency-domain MAP objective for the
/// graph-filter estimators), and stops when the iterate change drops below
/// `delta`, the line search stalls, or `t_max` is reached.
pub fn run_estimator(
    kind: EstimatorKind,
    y: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    init: &DVector<f64>,
    config: &SolverConfig,
) -> Result<EstimationRun> {
    config.validate()?;
    let n = model.dim();
    if y.len() != n || init.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len().max(init.len()) });
    }
    if config.bandlimit.is_some() && kind == EstimatorKind::MapVertex {
        return Err(Error::InvalidConfig(
            "bandlimited mode updates frequency coefficients; use a frequency-domain kind".into(),
        ));
    }
    match kind {
        EstimatorKind::MapVertex => run_map_vertex(y, prior, noise, model, init, config),
        _ => run_freq_domain(kind, y, prior, noise, model, init, config),
    }
}

fn non_finite(context: &str) -> Error {
    Error::NonFinite { context: context.to_string() }
}

fn run_map_vertex(
    y: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    init: &DVector<f64>,
    config: &SolverConfig,
) -> Result<EstimationRun> {
    let start = Instant::now();
    let basis = model.basis().clone();
    let mut x = init.clone();
    let mut trace = Vec::new();
    let mut iterates = config.record_iterates.then(Vec::new);
    let initial_objective = map_objective(&x, prior, noise, model, y);
    if !initial_objective.is_finite() {
        return Err(non_finite("initial vertex-domain objective"));
    }
    let mut stop = StopReason::MaxIterations;
    for _ in 0..config.t_max {
        let u = map_direction_vertex(&x, prior, noise, model, y)?;
        if config.alpha0 * u.norm() < config.delta {
            stop = StopReason::Converged;
            break;
        }
        let q0 = map_objective(&x, prior, noise, model, y);
        if !q0.is_finite() {
            return Err(non_finite("vertex-domain objective"));
        }
        let ls = backtracking_line_search(
            q0,
            |alpha| map_objective(&(&x + &u * alpha), prior, noise, model, y),
            config,
        );
        if ls.alpha == 0.0 {
            stop = StopReason::Stalled;
            break;
        }
        let next = &x + &u * ls.alpha;
        let change = (&next - &x).norm();
        trace.push(IterationRecord {
            objective: ls.objective,
            step_size: ls.alpha,
            line_search_trials: ls.trials,
            change_norm: change,
        });
        x = next;
        if let Some(list) = iterates.as_mut() {
            list.push(basis.to_freq(&x).as_slice().to_vec());
        }
        if change < config.delta {
            stop = StopReason::Converged;
            break;
        }
    }
    let x_freq = basis.to_freq(&x);
    Ok(EstimationRun {
        estimate: x.as_slice().to_vec(),
        estimate_freq: x_freq.as_slice().to_vec(),
        iterations: trace.len(),
        converged: stop == StopReason::Converged,
        stop,
        initial_objective,
        trace,
        iterates_freq: iterates,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn project_bandlimit(x: &mut DVector<f64>, cutoff: Option<usize>) {
    if let Some(ns) = cutoff {
        for i in ns..x.len() {
            x[i] = 0.0;
        }
    }
}

fn run_freq_domain(
    kind: EstimatorKind,
    y: &DVector<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
    model: &dyn MeasurementModel,
    init: &DVector<f64>,
    config: &SolverConfig,
) -> Result<EstimationRun> {
    let start = Instant::now();
    let basis = model.basis().clone();
    let y_freq = basis.to_freq(y);
    let mut x = basis.to_freq(init);
    project_bandlimit(&mut x, config.bandlimit);

    let objective = |x_freq: &DVector<f64>, g_freq: &DVector<f64>| -> f64 {
        match kind {
            EstimatorKind::EgfdMap => egfd_objective_with(x_freq, g_freq, prior, noise, &y_freq),
            _ => map_objective_freq_with(x_freq, g_freq, prior, noise, &y_freq),
        }
    };

    let mut trace = Vec::new();
    let mut iterates = config.record_iterates.then(Vec::new);
    let g0 = model.evaluate_freq(&x);
    let initial_objective = objective(&x, &g0);
    if !initial_objective.is_finite() {
        return Err(non_finite("initial frequency-domain objective"));
    }

    let mut stop = StopReason::MaxIterations;
    for _ in 0..config.t_max {
        let g = model.evaluate_freq(&x);
        let residual = &y_freq - &g;
        let u = match kind {
            EstimatorKind::MapFreq => {
                let jac = model.jacobian_freq(&x);
                map_direction_freq(&x, &g, &jac, prior, noise, &y_freq)?
            }
            EstimatorKind::EgfdMap => {
                let dg = model.jacobian_freq_diag(&x);
                egfd_direction(&x, &g, &dg, prior, noise, &y_freq)
            }
            EstimatorKind::SgspMap => {
                let jac = model.jacobian_freq(&x);
                let covs = sample_covariances(&x, prior.mean_freq(), &y_freq, &g);
                let (f1, f2) =
                    sgsp_map_filters_with(&jac, &covs, prior, noise, config.diag_load_eps)?;
                f1.component_mul(&(&x - prior.mean_freq())) + f2.component_mul(&residual)
            }
            EstimatorKind::GspMap => {
                let jac = model.jacobian_freq(&x);
                let (f1, f2) = gsp_map_filters_with(&jac, prior, noise)?;
                f1.component_mul(&(&x - prior.mean_freq())) + f2.component_mul(&residual)
            }
            EstimatorKind::MapVertex => unreachable!("handled by run_map_vertex"),
        };

        let candidate = |alpha: f64| -> DVector<f64> {
            let mut next = &x + &u * alpha;
            project_bandlimit(&mut next, config.bandlimit);
            next
        };
        if (candidate(config.alpha0) - &x).norm() < config.delta {
            stop = StopReason::Converged;
            break;
        }
        let q0 = objective(&x, &g);
        if !q0.is_finite() {
            return Err(non_finite("frequency-domain objective"));
        }
        let ls = backtracking_line_search(
            q0,
            |alpha| {
                let next = candidate(alpha);
                let g_next = model.evaluate_freq(&next);
                objective(&next, &g_next)
            },
            config,
        );
        if ls.alpha == 0.0 {
            stop = StopReason::Stalled;
            break;
        }
        let next = candidate(ls.alpha);
        let change = (&next - &x).norm();
        trace.push(IterationRecord {
            objective: ls.objective,
            step_size: ls.alpha,
            line_search_trials: ls.trials,
            change_norm: change,
        });
        x = next;
        if let Some(list) = iterates.as_mut() {
            list.push(x.as_slice().to_vec());
        }
        if change < config.delta {
            stop = StopReason::Converged;
            break;
        }
    }

    let estimate = basis.to_vertex(&x);
    Ok(EstimationRun {
        estimate: estimate.as_slice().to_vec(),
        estimate_freq: x.as_slice().to_vec(),
        iterations: trace.len(),
        converged: stop == StopReason::Converged,
        stop,
        initial_objective,
        trace,
        iterates_freq: iterates,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
