//! Penalty convex-concave procedure for the correlated collaboration problem.
//!
//! With the lifting `U_k = w_k w_k^T` the error covariance bound becomes a set of LMIs in
//! `(w, p, V, U_k)`. The reverse inequality `U_k <= w_k w_k^T` is linearized around `w_hat`
//! and relaxed by a PSD slack `Z_k` whose trace is penalized:
//!
//! ```text
//! minimize   tr(V) + tau sum_k tr(Z_k)
//! subject to w^T Q_m w <= E_m
//!            [C - diag(p), I; I, V] >= 0
//!            [p_k, h_k^T / sigma_e; h_k / sigma_e, I + c G_k^T U_k G_k] >= 0
//!            [U_k, w_k; w_k^T, 1] >= 0
//!            Z_k - U_k + w_hat_k w_k^T + w_k w_hat_k^T - w_hat_k w_hat_k^T >= 0
//! ```
//!
//! with `c = sigma_e^2 / sigma_v^2`. Each penalized SDP is solved by [`crate::admm`]; the
//! linearization point and the penalty are then updated.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, AdmmState, PrimalSet};
use crate::ccp::energy_scale;
use crate::error::{check_dim, Error, Result};
use crate::estimator::{self, CollaborationPlan};
use crate::formulation::Formulation;
use crate::linalg;
use crate::report::{elapsed_ms, SolveReport, SolveStatus, TraceRow};

/// Default bound on `tr(Z_k)` enforced inside the ADMM iterations.
pub const Z_TRACE_CAP: f64 = 1e6;

#[derive(Debug, Clone)]
struct EnergyRoot {
    support: Vec<usize>,
    /// Symmetric square root of `Q_m` restricted to `support`.
    root: DMatrix<f64>,
    sqrt_budget: f64,
}

/// Penalized SDP around a linearization point.
#[derive(Debug, Clone)]
pub struct PenalizedSdp<'a> {
    form: Formulation<'a>,
    w_hat: DVector<f64>,
    tau: f64,
    z_trace_cap: f64,
    energy: Vec<EnergyRoot>,
    scaled_obs: Vec<DVector<f64>>,
    gain_ratio: f64,
}

/// Build the penalized SDP for linearization point `w_hat` and penalty `tau`.
pub fn build_penalized_sdp<'a>(form: &Formulation<'a>, w_hat: &DVector<f64>, tau: f64) -> Result<PenalizedSdp<'a>> {
    check_dim("linearization point", form.dim(), w_hat.len())?;
    if w_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("linearization point has non-finite entries".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty must be positive, got {tau}")));
    }
    let inst = form.instance();
    let noise = inst.noise();
    let energy = (0..inst.num_transmitters())
        .map(|m| {
            let q = form.energy_matrix(m);
            let support: Vec<usize> = (0..q.nrows()).filter(|&i| q.row(i).iter().any(|&v| v != 0.0)).collect();
            let n = support.len();
            let local = DMatrix::from_fn(n, n, |a, b| q[(support[a], support[b])]);
            EnergyRoot {
                support,
                root: linalg::psd_sqrt(&local),
                sqrt_budget: inst.budgets()[m].sqrt(),
            }
        })
        .collect();
    let sigma_e = noise.sigma_eps_sq.sqrt();
    Ok(PenalizedSdp {
        form: *form,
        w_hat: w_hat.clone(),
        tau,
        z_trace_cap: Z_TRACE_CAP,
        energy,
        scaled_obs: (0..inst.horizon()).map(|k| inst.obs_gains(k) / sigma_e).collect(),
        gain_ratio: noise.sigma_eps_sq / noise.sigma_varsigma_sq,
    })
}

impl<'a> PenalizedSdp<'a> {
    pub fn formulation(&self) -> &Formulation<'a> {
        &self.form
    }

    pub fn horizon(&self) -> usize {
        self.form.horizon()
    }

    pub fn num_links(&self) -> usize {
        self.form.num_links()
    }

    pub fn num_sensors(&self) -> usize {
        self.form.instance().num_sensors()
    }

    pub fn num_transmitters(&self) -> usize {
        self.energy.len()
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn z_trace_cap(&self) -> f64 {
        self.z_trace_cap
    }

    pub fn set_z_trace_cap(&mut self, cap: f64) {
        self.z_trace_cap = cap;
    }

    pub fn w_hat(&self) -> &DVector<f64> {
        &self.w_hat
    }

    pub fn w_hat_block(&self, k: usize) -> DVectorView<'_, f64> {
        self.form.block(&self.w_hat, k)
    }

    /// `sigma_e^2 / sigma_v^2`.
    pub fn gain_ratio(&self) -> f64 {
        self.gain_ratio
    }

    pub fn info_matrix(&self) -> &DMatrix<f64> {
        self.form.instance().info_matrix()
    }

    pub fn channel_embedding(&self, k: usize) -> &DMatrix<f64> {
        self.form.instance().channel_embedding(k)
    }

    /// `h_k / sigma_e`.
    pub fn scaled_obs(&self, k: usize) -> &DVector<f64> {
        &self.scaled_obs[k]
    }

    /// Variables that enter the energy form of transmitter `m`.
    pub fn energy_support(&self, m: usize) -> &[usize] {
        &self.energy[m].support
    }

    pub fn energy_root(&self, m: usize) -> &DMatrix<f64> {
        &self.energy[m].root
    }

    pub fn sqrt_budget(&self, m: usize) -> f64 {
        self.energy[m].sqrt_budget
    }

    /// `Q_m^{1/2} w` on the support of transmitter `m`.
    pub fn energy_image(&self, m: usize, w: &DVector<f64>) -> DVector<f64> {
        let e = &self.energy[m];
        let ws = DVector::from_iterator(e.support.len(), e.support.iter().map(|&i| w[i]));
        &e.root * ws
    }

    /// `[C - diag(p), I; I, V]`.
    pub fn lmi_big(&self, p: &DVector<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.horizon();
        let mut out = DMatrix::zeros(2 * k, 2 * k);
        let mut tl = self.info_matrix().clone();
        for i in 0..k {
            tl[(i, i)] -= p[i];
            out[(i, k + i)] = 1.0;
            out[(k + i, i)] = 1.0;
        }
        out.view_mut((0, 0), (k, k)).copy_from(&tl);
        out.view_mut((k, k), (k, k)).copy_from(v);
        out
    }

    /// `[p_k, h_k^T / sigma_e; h_k / sigma_e, I + c G_k^T U_k G_k]`.
    pub fn lmi_info(&self, k: usize, p_k: f64, u: &DMatrix<f64>) -> DMatrix<f64> {
        let g = self.channel_embedding(k);
        let n = g.ncols();
        let h = &self.scaled_obs[k];
        let mut out = DMatrix::zeros(n + 1, n + 1);
        out[(0, 0)] = p_k;
        out.view_mut((1, 0), (n, 1)).copy_from(h);
        out.view_mut((0, 1), (1, n)).copy_from(&h.transpose());
        let inner = DMatrix::identity(n, n) + g.transpose() * u * g * self.gain_ratio;
        out.view_mut((1, 1), (n, n)).copy_from(&inner);
        out
    }

    /// `[U_k, w_k; w_k^T, 1]`.
    pub fn lmi_lift(&self, u: &DMatrix<f64>, w_k: DVectorView<'_, f64>) -> DMatrix<f64> {
        let l = u.nrows();
        let mut out = DMatrix::zeros(l + 1, l + 1);
        out.view_mut((0, 0), (l, l)).copy_from(u);
        out.view_mut((0, l), (l, 1)).copy_from(&w_k);
        out.view_mut((l, 0), (1, l)).copy_from(&w_k.transpose());
        out[(l, l)] = 1.0;
        out
    }

    /// `Z_k - U_k + w_hat_k w_k^T + w_k w_hat_k^T - w_hat_k w_hat_k^T`.
    pub fn lmi_dc(&self, k: usize, z: &DMatrix<f64>, u: &DMatrix<f64>, w_k: DVectorView<'_, f64>) -> DMatrix<f64> {
        let wh = self.w_hat_block(k);
        z - u + wh * w_k.transpose() + w_k * wh.transpose() - wh * wh.transpose()
    }

    /// `tr(V) + tau sum_k tr(Z_k)`.
    pub fn objective(&self, primal: &PrimalSet) -> f64 {
        primal.v.trace() + self.tau * primal.z.iter().map(DMatrix::trace).sum::<f64>()
    }

    /// Most negative eigenvalue (scaled by the matrix size) across all LMIs, and the worst
    /// relative energy overrun; both `<= 0` at a feasible point.
    pub fn constraint_violation(&self, primal: &PrimalSet) -> f64 {
        let neg = |m: DMatrix<f64>| -linalg::sym_eigenvalues(&linalg::symmetrize(&m))[0];
        let mut worst = neg(self.lmi_big(&primal.p, &primal.v));
        for k in 0..self.horizon() {
            let wk = self.form.block(&primal.w, k);
            worst = worst
                .max(neg(self.lmi_info(k, primal.p[k], &primal.u[k])))
                .max(neg(self.lmi_lift(&primal.u[k], wk)))
                .max(neg(self.lmi_dc(k, &primal.z[k], &primal.u[k], wk)));
        }
        for m in 0..self.num_transmitters() {
            let cost = self.energy_image(m, &primal.w).norm_squared();
            let budget = self.sqrt_budget(m).powi(2);
            worst = worst.max(cost - budget);
        }
        worst
    }
}

/// `tau^t = min(mu tau^{t-1}, tau_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub tau0: f64,
    pub mu: f64,
    pub tau_max: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            tau0: 0.1,
            mu: 1.5,
            tau_max: 100.0,
        }
    }
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.mu > 1.0 && self.tau_max >= self.tau0) {
            return Err(Error::InvalidParameter(
                "penalty schedule needs tau0 > 0, mu > 1 and tau_max >= tau0".into(),
            ));
        }
        Ok(())
    }

    pub fn next(&self, tau: f64) -> f64 {
        (self.mu * tau).min(self.tau_max)
    }

    /// Number of updates needed to reach `tau_max`.
    pub fn steps_to_max(&self) -> usize {
        ((self.tau_max / self.tau0).ln() / self.mu.ln()).ceil().max(0.0) as usize
    }
}

/// How each ADMM call is started after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Fixed initialization every time.
    Cold,
    /// Previous primal iterate, slack and dual variables reset to zero.
    Primal,
    /// Previous primal, slack and dual variables.
    #[default]
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PccpConfig {
    pub schedule: PenaltySchedule,
    pub eps_ccp: f64,
    pub max_iters: usize,
    pub admm: AdmmConfig,
    pub warm_start: WarmStart,
}

impl Default for PccpConfig {
    fn default() -> Self {
        Self {
            schedule: PenaltySchedule::default(),
            eps_ccp: 1e-3,
            max_iters: 60,
            admm: AdmmConfig::default(),
            warm_start: WarmStart::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PccpIteration {
    pub iteration: usize,
    pub tau: f64,
    pub psi: f64,
    pub trace_v: f64,
    pub sum_trace_z: f64,
    pub max_rank1_residual: f64,
    pub admm_iters: usize,
    pub elapsed_ms: f64,
}

impl TraceRow for PccpIteration {
    fn objective(&self) -> f64 {
        self.psi
    }
}

#[derive(Debug, Clone)]
pub struct PccpOutcome {
    /// `objective` is `psi` at the last iteration; `plan` is energy-feasible.
    pub report: SolveReport<PccpIteration>,
    pub primal: PrimalSet,
    /// `max_k ||U_k - w_k w_k^T||_F / max(1, ||U_k||_F)` at the last ADMM solution.
    pub rank_one_residual: f64,
    /// `tr(P_w)` of the returned plan.
    pub distortion: f64,
    /// Number of ADMM calls that stopped on the iteration limit.
    pub admm_unconverged: usize,
}

/// `max_k ||U_k - w_k w_k^T||_F / max(1, ||U_k||_F)`.
pub fn rank_one_residual(form: &Formulation<'_>, primal: &PrimalSet) -> f64 {
    (0..form.horizon())
        .map(|k| {
            let wk = form.block(&primal.w, k);
            let u = &primal.u[k];
            (u - wk * wk.transpose()).norm() / u.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Largest `alpha <= 1` making `alpha w` energy-feasible.
fn energy_feasible(form: &Formulation<'_>, w: &DVector<f64>) -> DVector<f64> {
    let alpha = energy_scale(form, w).min(1.0);
    w * alpha
}

/// Run penalty CCP from the linearization point `w_hat0`.
pub fn run(form: &Formulation<'_>, w_hat0: &DVector<f64>, config: &PccpConfig) -> Result<PccpOutcome> {
    config.schedule.validate()?;
    let start = Instant::now();
    let mut w_hat = w_hat0.clone();
    let mut tau = config.schedule.tau0;
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut previous_psi = f64::NAN;
    let mut carried: Option<AdmmState> = None;
    let mut last_primal = None;
    let mut admm_unconverged = 0;
    for iteration in 1..=config.max_iters {
        let sdp = build_penalized_sdp(form, &w_hat, tau)?;
        let init = match (config.warm_start, carried.take()) {
            (WarmStart::Full, Some(state)) => state,
            (WarmStart::Primal, Some(state)) => AdmmState::primal_warm(&sdp, state.primal),
            _ => AdmmState::initial(&sdp),
        };
        let out = admm::solve(&sdp, &config.admm, init)?;
        if !out.report.status.is_converged() {
            admm_unconverged += 1;
        }
        let primal = &out.state.primal;
        let trace_v = primal.v.trace();
        let sum_trace_z: f64 = primal.z.iter().map(DMatrix::trace).sum();
        let psi = trace_v + tau * sum_trace_z;
        trace.push(PccpIteration {
            iteration,
            tau,
            psi,
            trace_v,
            sum_trace_z,
            max_rank1_residual: rank_one_residual(form, primal),
            admm_iters: out.report.iterations,
            elapsed_ms: elapsed_ms(start),
        });
        w_hat = primal.w.clone();
        last_primal = Some(primal.clone());
        carried = Some(out.state);
        tau = config.schedule.next(tau);
        if iteration >= 2 && (psi - previous_psi).abs() <= config.eps_ccp {
            status = SolveStatus::Converged;
            break;
        }
        previous_psi = psi;
    }
    let primal = last_primal.ok_or_else(|| Error::InvalidParameter("penalty CCP needs max_iters >= 1".into()))?;
    let w = energy_feasible(form, &primal.w);
    let plan = form.expand(&w)?;
    let distortion = estimator::error_covariance_correlated(form.instance(), &plan)?.trace;
    let objective = trace.last().map_or(f64::NAN, |r: &PccpIteration| r.psi);
    Ok(PccpOutcome {
        rank_one_residual: rank_one_residual(form, &primal),
        report: SolveReport {
            plan,
            objective,
            iterations: trace.len(),
            trace,
            status,
            wall_ms: elapsed_ms(start),
        },
        primal,
        distortion,
        admm_unconverged,
    })
}

/// Linearization point drawn from `U[0, 1]^n` on ChaCha8 stream `stream` of `seed`.
pub fn random_linearization_point(form: &Formulation<'_>, seed: u64, stream: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    DVector::from_fn(form.dim(), |_, _| rng.random::<f64>())
}

/// [`run`] from [`random_linearization_point`].
pub fn run_seeded(form: &Formulation<'_>, seed: u64, stream: u64, config: &PccpConfig) -> Result<PccpOutcome> {
    let w_hat0 = random_linearization_point(form, seed, stream);
    run(form, &w_hat0, config)
}

/// Plan helper for callers that only need `tr(P_w)` of a solver variable.
pub fn correlated_distortion(form: &Formulation<'_>, w: &DVector<f64>) -> Result<(CollaborationPlan, f64)> {
    let plan = form.expand(w)?;
    let trace = estimator::error_covariance_correlated(form.instance(), &plan)?.trace;
    Ok((plan, trace))
}
