//! Convex-concave procedure for the uncorrelated collaboration problem.
//!
//! The ratio objective is written in epigraph form with variables `(w, u, r, s)`:
//!
//! ```text
//! minimize   1^T u
//! subject to s_k^2 + u_k^2 + 2 r_k <= (s_k + u_k)^2
//!            s_k <= w_k^T S_k w_k + sigma_v^2
//!            sigma_e^2 w_k^T R_k w_k + sigma_v^2 <= r_k
//!            w^T Q_m w <= E_m,   s > 0
//! ```
//!
//! The two right-hand sides that make the problem nonconvex are replaced by their tangent
//! planes at the current point and the resulting convex program is solved with the barrier
//! method. The reported objective is `sigma_theta^2 1^T u`, the distortion of the plan.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::formulation::Formulation;
use crate::qcqp::{self, BarrierConfig, QcqpProblem, QcqpStatus, QuadConstraint};
use crate::report::{elapsed_ms, SolveReport, SolveStatus, TraceRow};

/// Lower bound standing in for the strict inequality `s > 0`.
pub const S_FLOOR: f64 = 1e-8;

/// Point `(w, u, r, s)` of the epigraph problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EpigraphState {
    pub w: DVector<f64>,
    pub u: DVector<f64>,
    pub r: DVector<f64>,
    pub s: DVector<f64>,
}

impl EpigraphState {
    /// State with `r`, `s`, `u` at their tight values for the given `w`.
    pub fn tight(form: &Formulation<'_>, w: DVector<f64>) -> Result<Self> {
        check_dim("collaboration variable", form.dim(), w.len())?;
        let inst = form.instance();
        let noise = inst.noise();
        let k_len = form.horizon();
        let mut u = DVector::zeros(k_len);
        let mut r = DVector::zeros(k_len);
        let mut s = DVector::zeros(k_len);
        for k in 0..k_len {
            let wk = form.block(&w, k);
            s[k] = wk.dot(&(inst.signal_gram(k) * wk)) + noise.sigma_varsigma_sq;
            r[k] = noise.sigma_eps_sq * wk.dot(&(inst.noise_gram(k) * wk)) + noise.sigma_varsigma_sq;
            u[k] = r[k] / s[k];
        }
        Ok(Self { w, u, r, s })
    }

    /// Largest violation of the epigraph constraints (negative when strictly feasible).
    pub fn max_violation(&self, form: &Formulation<'_>) -> f64 {
        let inst = form.instance();
        let noise = inst.noise();
        let mut worst = f64::NEG_INFINITY;
        for k in 0..form.horizon() {
            let wk = form.block(&self.w, k);
            let (s, u, r) = (self.s[k], self.u[k], self.r[k]);
            worst = worst
                .max(s * s + u * u + 2.0 * r - (s + u).powi(2))
                .max(s - wk.dot(&(inst.signal_gram(k) * wk)) - noise.sigma_varsigma_sq)
                .max(noise.sigma_eps_sq * wk.dot(&(inst.noise_gram(k) * wk)) + noise.sigma_varsigma_sq - r)
                .max(S_FLOOR - s);
        }
        for m in 0..inst.num_transmitters() {
            let q = form.energy_matrix(m);
            worst = worst.max(self.w.dot(&(q * &self.w)) - inst.budgets()[m]);
        }
        worst
    }

    fn pack(&self) -> DVector<f64> {
        let k = self.u.len();
        let dw = self.w.len();
        let mut x = DVector::zeros(dw + 3 * k);
        x.rows_mut(0, dw).copy_from(&self.w);
        x.rows_mut(dw, k).copy_from(&self.u);
        x.rows_mut(dw + k, k).copy_from(&self.r);
        x.rows_mut(dw + 2 * k, k).copy_from(&self.s);
        x
    }

    fn unpack(x: &DVector<f64>, dw: usize, k: usize) -> Self {
        Self {
            w: x.rows(0, dw).into_owned(),
            u: x.rows(dw, k).into_owned(),
            r: x.rows(dw + k, k).into_owned(),
            s: x.rows(dw + 2 * k, k).into_owned(),
        }
    }
}

/// Affine minorant `2 (s_hat + u_hat)(s + u) - (s_hat + u_hat)^2` of `(s + u)^2`.
pub fn g1_hat(s_hat: f64, u_hat: f64, s: f64, u: f64) -> f64 {
    let a = s_hat + u_hat;
    2.0 * a * (s + u) - a * a
}

/// Affine minorant `2 w_hat^T S w - w_hat^T S w_hat + sigma_v^2` of `w^T S w + sigma_v^2`.
pub fn g2_hat(signal_gram: &DMatrix<f64>, w_hat: &DVector<f64>, w: &DVector<f64>, sigma_varsigma_sq: f64) -> f64 {
    let sw = signal_gram * w_hat;
    2.0 * sw.dot(w) - sw.dot(w_hat) + sigma_varsigma_sq
}

/// Indices of the rows of `q` that are not identically zero.
fn active_support(q: &DMatrix<f64>) -> Vec<usize> {
    (0..q.nrows()).filter(|&i| q.row(i).iter().any(|&v| v != 0.0)).collect()
}

/// Convex restriction of the epigraph problem around `hat`.
///
/// Variable order: `[w; u; r; s]`.
pub fn linearized_subproblem(form: &Formulation<'_>, hat: &EpigraphState) -> Result<QcqpProblem> {
    let inst = form.instance();
    let noise = inst.noise();
    let k_len = form.horizon();
    let l = form.num_links();
    let dw = form.dim();
    check_dim("linearization point", dw, hat.w.len())?;
    let (iu, ir, is) = (dw, dw + k_len, dw + 2 * k_len);

    let mut objective = DVector::zeros(dw + 3 * k_len);
    objective.rows_mut(iu, k_len).fill(1.0);
    let mut prob = QcqpProblem::new(objective);

    for k in 0..k_len {
        let o = form.offset(k);
        let wk_hat = form.block(&hat.w, k).into_owned();
        let a = hat.s[k] + hat.u[k];

        // s^2 + u^2 + 2r - g1_hat(s, u) <= 0 over (u_k, r_k, s_k).
        prob.push(QuadConstraint::new(
            vec![iu + k, ir + k, is + k],
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0, 2.0])),
            DVector::from_vec(vec![-2.0 * a, 2.0, -2.0 * a]),
            a * a,
        )?);

        // s - g2_hat(w_k) <= 0 over (w_k, s_k).
        let sw = inst.signal_gram(k) * &wk_hat;
        let mut support: Vec<usize> = (o..o + l).collect();
        support.push(is + k);
        let mut q = DVector::zeros(l + 1);
        q.rows_mut(0, l).copy_from(&(&sw * -2.0));
        q[l] = 1.0;
        prob.push(QuadConstraint::affine(support.clone(), q, sw.dot(&wk_hat) - noise.sigma_varsigma_sq)?);

        // sigma_e^2 w_k^T R_k w_k + sigma_v^2 - r_k <= 0 over (w_k, r_k).
        support[l] = ir + k;
        let mut p = DMatrix::zeros(l + 1, l + 1);
        p.view_mut((0, 0), (l, l)).copy_from(&(inst.noise_gram(k) * (2.0 * noise.sigma_eps_sq)));
        let mut q = DVector::zeros(l + 1);
        q[l] = -1.0;
        prob.push(QuadConstraint::new(support, p, q, noise.sigma_varsigma_sq)?);

        prob.lower_bounds.push((is + k, S_FLOOR));
    }

    for m in 0..inst.num_transmitters() {
        let q_m = form.energy_matrix(m);
        let support = active_support(&q_m);
        let n = support.len();
        let p = DMatrix::from_fn(n, n, |a, b| 2.0 * q_m[(support[a], support[b])]);
        prob.push(QuadConstraint::new(support, p, DVector::zeros(n), -inst.budgets()[m])?);
    }
    Ok(prob)
}

/// Strictly feasible point of the restriction around the feasible point `hat`.
///
/// `w` is pulled slightly toward the origin, `s` below and `r` above their tight values, and
/// `u` is placed just inside the interval allowed by the first constraint.
fn interior_start(form: &Formulation<'_>, hat: &EpigraphState, prob: &QcqpProblem) -> Result<DVector<f64>> {
    let inst = form.instance();
    let noise = inst.noise();
    let k_len = form.horizon();
    let mut eps = 1e-6;
    for _ in 0..6 {
        let w = &hat.w * (1.0 - eps);
        let mut u = DVector::zeros(k_len);
        let mut r = DVector::zeros(k_len);
        let mut s = DVector::zeros(k_len);
        for k in 0..k_len {
            let wk = form.block(&w, k).into_owned();
            let wk_hat = form.block(&hat.w, k).into_owned();
            let g2 = g2_hat(inst.signal_gram(k), &wk_hat, &wk, noise.sigma_varsigma_sq);
            s[k] = (g2 * (1.0 - eps)).max(2.0 * S_FLOOR);
            r[k] = (noise.sigma_eps_sq * wk.dot(&(inst.noise_gram(k) * &wk)) + noise.sigma_varsigma_sq) * (1.0 + eps);
            let a = hat.s[k] + hat.u[k];
            let disc = s[k] * (2.0 * a - s[k]) - 2.0 * r[k];
            if disc <= 0.0 {
                return Err(Error::InfeasibleStart("linearization leaves no room for u".into()));
            }
            u[k] = a - (1.0 - 1e-2) * disc.sqrt();
        }
        let x = EpigraphState { w, u, r, s }.pack();
        if prob.max_violation(&x) < 0.0 {
            return Ok(x);
        }
        eps *= 10.0;
    }
    Err(Error::InfeasibleStart("could not find an interior point near the linearization point".into()))
}

/// Random start: `w ~ U[0,1]^n` scaled onto the tightest energy constraint, with `u`, `r`, `s`
/// at their tight values.
pub fn random_feasible_init<R: Rng + ?Sized>(form: &Formulation<'_>, rng: &mut R) -> Result<EpigraphState> {
    let w = DVector::from_fn(form.dim(), |_, _| rng.random::<f64>());
    let scale = energy_scale(form, &w);
    EpigraphState::tight(form, w * scale)
}

/// Largest `alpha` with `alpha^2 w^T Q_m w <= E_m` for every transmitter.
pub fn energy_scale(form: &Formulation<'_>, w: &DVector<f64>) -> f64 {
    let inst = form.instance();
    let mut alpha = f64::INFINITY;
    for m in 0..inst.num_transmitters() {
        let cost = w.dot(&(form.energy_matrix(m) * w));
        if cost > 0.0 {
            alpha = alpha.min((inst.budgets()[m] / cost).sqrt());
        }
    }
    if alpha.is_finite() {
        alpha
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcpConfig {
    pub eps_ccp: f64,
    pub max_iters: usize,
    pub barrier: BarrierConfig,
}

impl Default for CcpConfig {
    fn default() -> Self {
        Self {
            eps_ccp: 1e-3,
            max_iters: 100,
            barrier: BarrierConfig::default(),
        }
    }
}

/// One CCP iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcpIteration {
    pub iteration: usize,
    pub objective: f64,
    pub max_energy_violation: f64,
    pub subproblem_iters: usize,
    pub elapsed_ms: f64,
}

impl TraceRow for CcpIteration {
    fn objective(&self) -> f64 {
        self.objective
    }
}

/// CCP output: the generic report plus the final epigraph point.
#[derive(Debug, Clone)]
pub struct CcpOutcome {
    pub report: SolveReport<CcpIteration>,
    pub state: EpigraphState,
}

fn max_energy_violation(form: &Formulation<'_>, w: &DVector<f64>) -> f64 {
    let inst = form.instance();
    (0..inst.num_transmitters())
        .map(|m| w.dot(&(form.energy_matrix(m) * w)) - inst.budgets()[m])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Run CCP from a feasible starting point.
pub fn run(form: &Formulation<'_>, init: EpigraphState, config: &CcpConfig) -> Result<CcpOutcome> {
    let inst = form.instance();
    if inst.budgets().iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInstance("CCP needs strictly positive energy budgets".into()));
    }
    let tol = 1e-9 * (1.0 + init.u.amax());
    if init.max_violation(form) > tol {
        return Err(Error::InfeasibleStart("CCP initial point violates the epigraph constraints".into()));
    }
    let start = Instant::now();
    let sigma_theta_sq = inst.noise().sigma_theta_sq;
    let dw = form.dim();
    let k_len = form.horizon();
    let mut hat = init;
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut previous = sigma_theta_sq * hat.u.sum();
    for iteration in 1..=config.max_iters {
        let prob = linearized_subproblem(form, &hat)?;
        let x0 = interior_start(form, &hat, &prob)?;
        let sol = qcqp::solve(&prob, &x0, &config.barrier)?;
        let next = EpigraphState::unpack(&sol.x, dw, k_len);
        let objective = sigma_theta_sq * next.u.sum();
        trace.push(CcpIteration {
            iteration,
            objective,
            max_energy_violation: max_energy_violation(form, &next.w),
            subproblem_iters: sol.newton_iters,
            elapsed_ms: elapsed_ms(start),
        });
        hat = next;
        if sol.status == QcqpStatus::NewtonLimit && objective > previous {
            status = SolveStatus::Stalled;
            break;
        }
        if iteration >= 2 && (objective - previous).abs() <= config.eps_ccp {
            status = SolveStatus::Converged;
            break;
        }
        previous = objective;
    }
    let plan = form.expand(&hat.w)?;
    let objective = sigma_theta_sq * hat.u.sum();
    Ok(CcpOutcome {
        report: SolveReport {
            plan,
            objective,
            iterations: trace.len(),
            trace,
            status,
            wall_ms: elapsed_ms(start),
        },
        state: hat,
    })
}

/// Run CCP from a random start drawn from ChaCha8 stream `stream` of `seed`.
pub fn run_seeded(form: &Formulation<'_>, seed: u64, stream: u64, config: &CcpConfig) -> Result<CcpOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let init = random_feasible_init(form, &mut rng)?;
    run(form, init, config)
}

/// Independent runs from `starts` random initial points (streams `0..starts`), in parallel.
pub fn run_multistart(form: &Formulation<'_>, seed: u64, starts: usize, config: &CcpConfig) -> Result<Vec<CcpOutcome>> {
    (0..starts as u64)
        .into_par_iter()
        .map(|stream| run_seeded(form, seed, stream, config))
        .collect()
}

/// Best of [`run_multistart`] by final objective.
pub fn best_of(outcomes: Vec<CcpOutcome>) -> Option<CcpOutcome> {
    outcomes
        .into_iter()
        .min_by(|a, b| a.report.objective.total_cmp(&b.report.objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceConfig;

    #[test]
    fn g1_is_tangent_minorant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (sh, uh) = (0.7, 1.3);
        assert!((g1_hat(sh, uh, sh, uh) - (sh + uh).powi(2)).abs() < 1e-14);
        for _ in 0..100 {
            let s: f64 = rng.random_range(-3.0..3.0);
            let u: f64 = rng.random_range(-3.0..3.0);
            assert!(g1_hat(sh, uh, s, u) <= (s + u).powi(2) + 1e-12);
        }
    }

    #[test]
    fn zero_plan_state_has_unit_ratios() {
        let inst = InstanceConfig::paper_default(2).build().unwrap();
        let form = Formulation::time_varying(&inst);
        let st = EpigraphState::tight(&form, DVector::zeros(form.dim())).unwrap();
        assert!(st.u.iter().all(|&u| (u - 1.0).abs() < 1e-15));
    }

    #[test]
    fn hat_point_is_feasible_for_its_restriction() {
        let inst = InstanceConfig::paper_default(2).build().unwrap();
        let form = Formulation::time_varying(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hat = random_feasible_init(&form, &mut rng).unwrap();
        let prob = linearized_subproblem(&form, &hat).unwrap();
        assert!(prob.max_violation(&hat.pack()) <= 1e-12);
        assert!(hat.max_violation(&form) <= 1e-12);
        let x0 = interior_start(&form, &hat, &prob).unwrap();
        assert!(prob.max_violation(&x0) < 0.0);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let inst = InstanceConfig::paper_default(3).build().unwrap();
        let form = Formulation::time_varying(&inst);
        let a = random_feasible_init(&form, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_feasible_init(&form, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
