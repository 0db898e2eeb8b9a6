//! ADMM for the penalized SDP.
//!
//! Every inequality of the SDP is written as an affine equality onto a cone-constrained slack
//! (a second-order cone for each energy budget, PSD cones for the LMIs). One iteration is
//!
//! 1. primal step: minimize the augmented Lagrangian over `(w, p, V, U_k, Z_k)`; `p` and `V`
//!    have closed forms, the rest is a quadratic solved by gradient descent;
//! 2. slack step: project onto the cones;
//! 3. dual ascent with step `rho`.
//!
//! Iterations stop when both the summed constraint residual and the summed slack change are
//! below `eps_admm`.

mod projection;
mod state;
mod uqp;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use projection::{project_psd, project_soc, PSD_CLAMP};
pub use state::{AdmmState, DualSet, PrimalSet, SlackSet};
pub use uqp::{closed_form_p_v, objective as uqp_objective, objective_and_gradient, x_minimize, GradientRun, UqpContext, UqpGradient};

use crate::error::{Error, Result};
use crate::pccp::PenalizedSdp;
use crate::report::{elapsed_ms, SolveReport, SolveStatus, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub eps_admm: f64,
    pub eps_grad: f64,
    pub a1: f64,
    pub a2: f64,
    pub max_iters: usize,
    pub max_grad_iters: usize,
    /// Double or halve `rho` when the two stopping residuals differ by more than 10x.
    pub adaptive_rho: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_admm: 1e-3,
            eps_grad: 1e-6,
            a1: 0.02,
            a2: 0.5,
            max_iters: 5000,
            max_grad_iters: 500,
            adaptive_rho: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.eps_admm > 0.0
            && self.eps_grad > 0.0
            && self.a1 > 0.0
            && self.a1 < 0.5
            && self.a2 > 0.0
            && self.a2 < 1.0
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid ADMM configuration {self:?}")))
        }
    }
}

/// Slack step: project each shifted constraint image onto its cone.
pub fn z_minimize(sdp: &PenalizedSdp<'_>, primal: &PrimalSet, dual: &DualSet, rho: f64) -> SlackSet {
    let inv = 1.0 / rho;
    let k_len = sdp.horizon();
    let form = sdp.formulation();
    let lambda = (0..sdp.num_transmitters())
        .map(|m| {
            let image = sdp.energy_image(m, &primal.w);
            let n = image.len();
            let mut beta = &dual.lambda[m] * inv;
            let mut head = beta.rows_mut(0, n);
            head += image;
            beta[n] += sdp.sqrt_budget(m);
            project_soc(&beta)
        })
        .collect();
    let big = project_psd(&(sdp.lmi_big(&primal.p, &primal.v) + &dual.big * inv));
    let mut info = Vec::with_capacity(k_len);
    let mut lift = Vec::with_capacity(k_len);
    let mut dc = Vec::with_capacity(k_len);
    for k in 0..k_len {
        let wk = form.block(&primal.w, k);
        info.push(project_psd(&(sdp.lmi_info(k, primal.p[k], &primal.u[k]) + &dual.info[k] * inv)));
        lift.push(project_psd(&(sdp.lmi_lift(&primal.u[k], wk) + &dual.lift[k] * inv)));
        dc.push(project_psd(&(sdp.lmi_dc(k, &primal.z[k], &primal.u[k], wk) + &dual.dc[k] * inv)));
    }
    SlackSet {
        lambda,
        big,
        info,
        lift,
        dc,
    }
}

/// Constraint functions `f_m`, `F_1`, `F_{i,k}` at `(primal, slack)`; shapes follow the slack.
pub fn residuals(sdp: &PenalizedSdp<'_>, primal: &PrimalSet, slack: &SlackSet) -> SlackSet {
    let form = sdp.formulation();
    let lambda = (0..sdp.num_transmitters())
        .map(|m| {
            let image = sdp.energy_image(m, &primal.w);
            let n = image.len();
            let mut f = -&slack.lambda[m];
            let mut head = f.rows_mut(0, n);
            head += image;
            f[n] += sdp.sqrt_budget(m);
            f
        })
        .collect();
    let k_len = sdp.horizon();
    SlackSet {
        lambda,
        big: sdp.lmi_big(&primal.p, &primal.v) - &slack.big,
        info: (0..k_len)
            .map(|k| sdp.lmi_info(k, primal.p[k], &primal.u[k]) - &slack.info[k])
            .collect(),
        lift: (0..k_len)
            .map(|k| sdp.lmi_lift(&primal.u[k], form.block(&primal.w, k)) - &slack.lift[k])
            .collect(),
        dc: (0..k_len)
            .map(|k| sdp.lmi_dc(k, &primal.z[k], &primal.u[k], form.block(&primal.w, k)) - &slack.dc[k])
            .collect(),
    }
}

/// `dual + rho * residual`, blockwise.
pub fn dual_update(dual: &DualSet, residual: &SlackSet, rho: f64) -> DualSet {
    fn step(a: &[DMatrix<f64>], b: &[DMatrix<f64>], rho: f64) -> Vec<DMatrix<f64>> {
        a.iter().zip(b).map(|(x, y)| x + y * rho).collect()
    }
    SlackSet {
        lambda: dual
            .lambda
            .iter()
            .zip(&residual.lambda)
            .map(|(x, y): (&DVector<f64>, &DVector<f64>)| x + y * rho)
            .collect(),
        big: &dual.big + &residual.big * rho,
        info: step(&dual.info, &residual.info, rho),
        lift: step(&dual.lift, &residual.lift, rho),
        dc: step(&dual.dc, &residual.dc, rho),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmmIteration {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub slack_change: f64,
    pub rho: f64,
    pub grad_iters: usize,
    pub elapsed_ms: f64,
}

impl TraceRow for AdmmIteration {
    fn objective(&self) -> f64 {
        self.objective
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub state: AdmmState,
    pub report: SolveReport<AdmmIteration>,
    /// Number of primal steps whose line search stalled.
    pub stalls: usize,
}

/// Run ADMM from `init`.
pub fn solve(sdp: &PenalizedSdp<'_>, config: &AdmmConfig, init: AdmmState) -> Result<AdmmOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut state = init;
    let mut rho = config.rho;
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut stalls = 0;
    for iteration in 1..=config.max_iters {
        let ctx = UqpContext::new(sdp, &state.slack, &state.dual, rho);
        let (primal, run) = x_minimize(sdp, &ctx, &state.primal, config);
        if run.stalled {
            stalls += 1;
        }
        let slack = z_minimize(sdp, &primal, &state.dual, rho);
        let resid = residuals(sdp, &primal, &slack);
        let primal_residual = resid.norm_sum();
        let slack_change = slack.distance(&state.slack);
        let dual = dual_update(&state.dual, &resid, rho);
        if !(primal_residual.is_finite() && slack_change.is_finite()) {
            return Err(Error::SolverFailure(format!("ADMM diverged at iteration {iteration}")));
        }
        trace.push(AdmmIteration {
            iteration,
            objective: sdp.objective(&primal),
            primal_residual,
            slack_change,
            rho,
            grad_iters: run.iterations,
            elapsed_ms: elapsed_ms(start),
        });
        state = AdmmState { primal, slack, dual };
        if primal_residual <= config.eps_admm && slack_change <= config.eps_admm {
            status = SolveStatus::Converged;
            break;
        }
        if config.adaptive_rho {
            if primal_residual > 10.0 * slack_change {
                rho *= 2.0;
            } else if slack_change > 10.0 * primal_residual {
                rho /= 2.0;
            }
        }
    }
    let plan = sdp.formulation().expand(&state.primal.w)?;
    Ok(AdmmOutcome {
        report: SolveReport {
            plan,
            objective: sdp.objective(&state.primal),
            iterations: trace.len(),
            trace,
            status,
            wall_ms: elapsed_ms(start),
        },
        state,
        stalls,
    })
}
