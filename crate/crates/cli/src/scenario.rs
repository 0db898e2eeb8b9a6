//! Scenario runner: one solve per (grid point, algorithm), analytic and Monte Carlo evaluation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sensor_collab::ccp::{self, CcpConfig};
use sensor_collab::estimator::{self, CollaborationPlan};
use sensor_collab::formulation::Formulation;
use sensor_collab::model::ProblemInstance;
use sensor_collab::pccp::{self, PccpConfig};
use sensor_collab::report::SolveStatus;

use crate::config::{Algorithm, ExperimentConfig, Scenario};

/// Status written for rows whose solver converged.
pub const STATUS_OK: &str = "ok";

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub grid_value: f64,
    pub algorithm: String,
    pub objective: f64,
    pub analytic_trace: f64,
    pub empirical_mse: f64,
    pub mse_stderr: f64,
    pub num_links: usize,
    pub iterations: usize,
    pub wall_ms: f64,
    pub seed: u64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

/// One line of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub grid_value: f64,
    pub algorithm: String,
    pub iteration: usize,
    pub objective: f64,
    pub elapsed_ms: f64,
}

/// Least-squares fit `ln(wall_ms) = intercept + exponent * ln(num_links)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub algorithm: String,
    pub exponent: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
    pub fits: Vec<GrowthFit>,
}

impl ScenarioOutput {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn rows_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.algorithm == algorithm.as_str())
    }
}

struct Solved {
    plan: CollaborationPlan,
    objective: f64,
    iterations: usize,
    status: SolveStatus,
    wall_ms: f64,
    trace: Vec<(usize, f64, f64)>,
}

fn solve(instance: &ProblemInstance, algorithm: Algorithm, seed: u64, stream: u64) -> sensor_collab::Result<Solved> {
    let form = Formulation::new(instance, algorithm.layout());
    if algorithm.is_penalty() {
        let out = pccp::run_seeded(&form, seed, stream, &PccpConfig::default())?;
        let trace = out.report.trace.iter().map(|r| (r.iteration, r.psi, r.elapsed_ms)).collect();
        Ok(Solved {
            objective: out.report.objective,
            iterations: out.report.iterations,
            status: out.report.status,
            wall_ms: out.report.wall_ms,
            plan: out.report.plan,
            trace,
        })
    } else {
        let out = ccp::run_seeded(&form, seed, stream, &CcpConfig::default())?;
        let trace = out.report.trace.iter().map(|r| (r.iteration, r.objective, r.elapsed_ms)).collect();
        Ok(Solved {
            objective: out.report.objective,
            iterations: out.report.iterations,
            status: out.report.status,
            wall_ms: out.report.wall_ms,
            plan: out.report.plan,
            trace,
        })
    }
}

/// `(analytic trace, Monte Carlo estimate)` of the plan.
///
/// Penalty-CCP plans are evaluated with the instance prior. CCP designs for uncorrelated
/// parameters, so its fusion center uses the prior `sigma_theta^2 I`.
fn evaluate(
    instance: &ProblemInstance,
    algorithm: Algorithm,
    plan: &CollaborationPlan,
    trials: usize,
    seed: u64,
) -> sensor_collab::Result<(f64, estimator::MseEstimate)> {
    if algorithm.is_penalty() {
        let analytic = estimator::error_covariance_correlated(instance, plan)?.trace;
        Ok((analytic, estimator::simulate_mse(instance, plan, trials, seed)?))
    } else {
        let k_len = instance.horizon();
        let prior = DMatrix::identity(k_len, k_len) * instance.noise().sigma_theta_sq;
        let analytic = estimator::error_covariance_mismatched(instance, plan, &prior)?.trace;
        let mc = estimator::simulate_mse_with_prior(instance, plan, &prior, trials, seed)?;
        Ok((analytic, mc))
    }
}

/// Solve and evaluate one (grid point, algorithm) pair. Failures become rows with a
/// non-`ok` status and NaN metrics.
pub fn run_point(config: &ExperimentConfig, grid_value: f64, algorithm: Algorithm) -> (ResultRow, Vec<TraceRecord>) {
    let seed = config.seed();
    let mut row = ResultRow {
        grid_value,
        algorithm: algorithm.as_str().to_owned(),
        objective: f64::NAN,
        analytic_trace: f64::NAN,
        empirical_mse: f64::NAN,
        mse_stderr: f64::NAN,
        num_links: 0,
        iterations: 0,
        wall_ms: f64::NAN,
        seed,
        status: String::new(),
    };
    let instance = match config.instance_at(grid_value).build() {
        Ok(inst) => inst,
        Err(e) => {
            row.status = format!("error: {e}");
            return (row, Vec::new());
        }
    };
    row.num_links = instance.num_links();
    let solved = match solve(&instance, algorithm, seed, config.start_stream(grid_value)) {
        Ok(s) => s,
        Err(e) => {
            row.status = format!("error: {e}");
            return (row, Vec::new());
        }
    };
    row.objective = solved.objective;
    row.iterations = solved.iterations;
    row.wall_ms = solved.wall_ms;
    row.status = if solved.status.is_converged() {
        STATUS_OK.to_owned()
    } else {
        solved.status.as_str().to_owned()
    };
    match evaluate(&instance, algorithm, &solved.plan, config.trials, seed) {
        Ok((analytic, mc)) => {
            row.analytic_trace = analytic;
            row.empirical_mse = mc.mse;
            row.mse_stderr = mc.stderr;
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    let traces = solved
        .trace
        .into_iter()
        .map(|(iteration, objective, elapsed_ms)| TraceRecord {
            grid_value,
            algorithm: algorithm.as_str().to_owned(),
            iteration,
            objective,
            elapsed_ms,
        })
        .collect();
    (row, traces)
}

/// Fit the growth exponent of wall time in the number of links for each algorithm.
pub fn growth_fits(rows: &[ResultRow], algorithms: &[Algorithm]) -> Vec<GrowthFit> {
    algorithms
        .iter()
        .filter_map(|&a| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.algorithm == a.as_str() && r.is_ok() && r.num_links > 0 && r.wall_ms > 0.0)
                .map(|r| ((r.num_links as f64).ln(), r.wall_ms.ln()))
                .collect();
            let (exponent, intercept) = log_log_fit(&pts)?;
            Some(GrowthFit {
                algorithm: a.as_str().to_owned(),
                exponent,
                intercept,
                points: pts.len(),
            })
        })
        .collect()
}

/// Ordinary least squares `y = b + a x`; `None` with fewer than two distinct `x`.
pub fn log_log_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if points.len() < 2 || sxx <= 1e-12 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// Run every (grid point, algorithm) pair.
///
/// Pairs run in parallel except in the timing sweep; rows come back sorted by grid value,
/// then in the configured algorithm order.
pub fn run_scenario(config: &ExperimentConfig) -> ScenarioOutput {
    let jobs: Vec<(usize, f64, Algorithm)> = config
        .grid
        .iter()
        .enumerate()
        .flat_map(|(i, &g)| config.algorithms.iter().map(move |&a| (i, g, a)))
        .collect();
    let mut results: Vec<(usize, ResultRow, Vec<TraceRecord>)> = if config.scenario == Scenario::TimingSweep {
        jobs.iter()
            .map(|&(i, g, a)| {
                let (row, trace) = run_point(config, g, a);
                (i, row, trace)
            })
            .collect()
    } else {
        jobs.par_iter()
            .map(|&(i, g, a)| {
                let (row, trace) = run_point(config, g, a);
                (i, row, trace)
            })
            .collect()
    };
    results.sort_by(|a, b| a.1.grid_value.total_cmp(&b.1.grid_value).then(a.0.cmp(&b.0)));
    let mut out = ScenarioOutput::default();
    for (_, row, trace) in results {
        out.rows.push(row);
        if config.scenario == Scenario::ConvergenceTrace {
            out.traces.extend(trace);
        }
    }
    if config.scenario == Scenario::TimingSweep {
        out.fits = growth_fits(&out.rows, &config.algorithms);
    }
    out
}
