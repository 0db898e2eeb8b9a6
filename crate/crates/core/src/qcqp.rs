//! Log-barrier interior-point solver for linear objectives under convex quadratic
//! inequality constraints.
//!
//! Each constraint `1/2 x_S^T P x_S + q^T x_S + r <= 0` acts on an index set `S`, which keeps
//! Hessian assembly cheap when constraints only touch a block of the variables.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// Convex quadratic constraint on the variables listed in `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint {
    pub support: Vec<usize>,
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
}

impl QuadConstraint {
    pub fn new(support: Vec<usize>, p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Result<Self> {
        check_dim("constraint Hessian rows", support.len(), p.nrows())?;
        check_dim("constraint Hessian cols", support.len(), p.ncols())?;
        check_dim("constraint linear term", support.len(), q.len())?;
        Ok(Self { support, p, q, r })
    }

    /// Affine constraint `q^T x_S + r <= 0`.
    pub fn affine(support: Vec<usize>, q: DVector<f64>, r: f64) -> Result<Self> {
        let n = support.len();
        Self::new(support, DMatrix::zeros(n, n), q, r)
    }

    fn local(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.support.len(), self.support.iter().map(|&i| x[i]))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let xs = self.local(x);
        0.5 * xs.dot(&(&self.p * &xs)) + self.q.dot(&xs) + self.r
    }

    /// Value and local gradient `P x_S + q`.
    fn value_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let xs = self.local(x);
        let px = &self.p * &xs;
        let value = 0.5 * xs.dot(&px) + self.q.dot(&xs) + self.r;
        (value, px + &self.q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    pub objective: DVector<f64>,
    pub constraints: Vec<QuadConstraint>,
    /// `x_j >= l_j` for each `(j, l_j)`.
    pub lower_bounds: Vec<(usize, f64)>,
}

impl QcqpProblem {
    pub fn new(objective: DVector<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
            lower_bounds: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, c: QuadConstraint) {
        self.constraints.push(c);
    }

    pub fn num_inequalities(&self) -> usize {
        self.constraints.len() + self.lower_bounds.len()
    }

    /// Largest constraint value, `max_i f_i(x)` (lower bounds written as `l_j - x_j`).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let quad = self.constraints.iter().map(|c| c.value(x));
        let bounds = self.lower_bounds.iter().map(|&(j, l)| l - x[j]);
        quad.chain(bounds).fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        for c in &self.constraints {
            if c.support.iter().any(|&i| i >= n) {
                return Err(Error::InvalidParameter("constraint support index out of range".into()));
            }
        }
        if self.lower_bounds.iter().any(|&(j, _)| j >= n) {
            return Err(Error::InvalidParameter("lower bound index out of range".into()));
        }
        Ok(())
    }

    /// Barrier value `t c^T x - sum log(-f_i(x))`, or `+inf` outside the interior.
    fn barrier(&self, x: &DVector<f64>, t: f64) -> f64 {
        let mut v = t * self.objective.dot(x);
        for c in &self.constraints {
            let f = c.value(x);
            if !(f < 0.0) {
                return f64::INFINITY;
            }
            v -= (-f).ln();
        }
        for &(j, l) in &self.lower_bounds {
            let gap = x[j] - l;
            if !(gap > 0.0) {
                return f64::INFINITY;
            }
            v -= gap.ln();
        }
        v
    }

    fn barrier_derivatives(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut grad = &self.objective * t;
        let mut hess = DMatrix::zeros(n, n);
        for c in &self.constraints {
            let (f, g) = c.value_grad(x);
            let inv = -1.0 / f;
            for (a, &i) in c.support.iter().enumerate() {
                grad[i] += inv * g[a];
                for (b, &j) in c.support.iter().enumerate() {
                    hess[(i, j)] += inv * inv * g[a] * g[b] + inv * c.p[(a, b)];
                }
            }
        }
        for &(j, l) in &self.lower_bounds {
            let inv = 1.0 / (x[j] - l);
            grad[j] -= inv;
            hess[(j, j)] += inv * inv;
        }
        (grad, hess)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierConfig {
    pub t0: f64,
    pub mu: f64,
    /// Target duality gap `m / t`.
    pub tol: f64,
    /// Stop centering when `lambda^2 / 2` falls below this.
    pub newton_tol: f64,
    pub max_newton_per_stage: usize,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            tol: 1e-8,
            newton_tol: 1e-10,
            max_newton_per_stage: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QcqpStatus {
    Optimal,
    /// Some centering step hit its iteration cap; the iterate is feasible but the gap bound is
    /// not certified.
    NewtonLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: QcqpStatus,
    /// `m / t` at termination.
    pub gap: f64,
    pub newton_iters: usize,
    /// Objective after each centering stage.
    pub stage_objectives: Vec<f64>,
}

/// Minimize `c^T x` from the strictly feasible point `x0`.
pub fn solve(problem: &QcqpProblem, x0: &DVector<f64>, config: &BarrierConfig) -> Result<QcqpSolution> {
    problem.validate()?;
    check_dim("QCQP start point", problem.dim(), x0.len())?;
    if !(config.t0 > 0.0 && config.mu > 1.0 && config.tol > 0.0) {
        return Err(Error::InvalidParameter("barrier parameters must satisfy t0 > 0, mu > 1, tol > 0".into()));
    }
    let worst = problem.max_violation(x0);
    if !(worst < 0.0) {
        return Err(Error::InfeasibleStart(format!(
            "start point is not strictly feasible (max constraint value {worst:e})"
        )));
    }

    let m = problem.num_inequalities().max(1) as f64;
    let mut x = x0.clone();
    let mut t = config.t0;
    let mut newton_iters = 0;
    let mut status = QcqpStatus::Optimal;
    let mut stage_objectives = Vec::new();
    loop {
        let centered = center(problem, &mut x, t, config, &mut newton_iters)?;
        if !centered {
            status = QcqpStatus::NewtonLimit;
        }
        stage_objectives.push(problem.objective.dot(&x));
        if m / t <= config.tol {
            break;
        }
        t *= config.mu;
    }
    Ok(QcqpSolution {
        objective: problem.objective.dot(&x),
        x,
        status,
        gap: m / t,
        newton_iters,
        stage_objectives,
    })
}

/// Damped Newton on the barrier at fixed `t`; returns whether the decrement test passed.
fn center(
    problem: &QcqpProblem,
    x: &mut DVector<f64>,
    t: f64,
    config: &BarrierConfig,
    newton_iters: &mut usize,
) -> Result<bool> {
    const ALPHA: f64 = 0.01;
    const BETA: f64 = 0.5;
    let mut value = problem.barrier(x, t);
    for _ in 0..config.max_newton_per_stage {
        let (grad, hess) = problem.barrier_derivatives(x, t);
        let step = newton_direction(hess, &grad)?;
        let decrement = -grad.dot(&step);
        if decrement / 2.0 <= config.newton_tol {
            return Ok(true);
        }
        *newton_iters += 1;
        let mut s = 1.0;
        loop {
            let trial = &*x + &step * s;
            let v = problem.barrier(&trial, t);
            if v <= value - ALPHA * s * decrement {
                *x = trial;
                value = v;
                break;
            }
            s *= BETA;
            if s < 1e-20 {
                // No progress is possible in floating point; treat as centered.
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = hess.clone().cholesky() {
        return Ok(-chol.solve(grad));
    }
    let n = hess.nrows();
    let scale = hess.diagonal().amax().max(1.0);
    let mut reg = 1e-12 * scale;
    for _ in 0..12 {
        let shifted = &hess + DMatrix::identity(n, n) * reg;
        if let Some(chol) = shifted.cholesky() {
            return Ok(-chol.solve(grad));
        }
        reg *= 10.0;
    }
    Err(Error::SolverFailure("barrier Hessian is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_box() {
        let mut prob = QcqpProblem::new(DVector::from_element(1, 1.0));
        // x^2 - 4 <= 0
        prob.push(QuadConstraint::new(vec![0], DMatrix::from_element(1, 1, 2.0), DVector::zeros(1), -4.0).unwrap());
        let sol = solve(&prob, &DVector::zeros(1), &BarrierConfig::default()).unwrap();
        assert!((sol.x[0] + 2.0).abs() < 1e-6, "{}", sol.x[0]);
        assert_eq!(sol.status, QcqpStatus::Optimal);
        assert!(sol.gap <= 1e-8);
    }

    #[test]
    fn ball_constrained_linear_program() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let energy = 2.0;
        let mut prob = QcqpProblem::new(c.clone());
        prob.push(QuadConstraint::new(vec![0, 1, 2], DMatrix::identity(3, 3) * 2.0, DVector::zeros(3), -energy).unwrap());
        let sol = solve(&prob, &DVector::zeros(3), &BarrierConfig::default()).unwrap();
        let expect = -&c * (energy.sqrt() / c.norm());
        assert!((&sol.x - expect).amax() < 1e-6);
    }

    #[test]
    fn rejects_infeasible_start() {
        let mut prob = QcqpProblem::new(DVector::from_element(1, 1.0));
        prob.lower_bounds.push((0, 1.0));
        assert!(matches!(
            solve(&prob, &DVector::zeros(1), &BarrierConfig::default()),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn stage_objectives_do_not_increase() {
        let mut prob = QcqpProblem::new(DVector::from_vec(vec![1.0, 1.0]));
        prob.push(QuadConstraint::new(vec![0, 1], DMatrix::identity(2, 2) * 2.0, DVector::zeros(2), -1.0).unwrap());
        prob.lower_bounds.push((0, -0.5));
        let sol = solve(&prob, &DVector::zeros(2), &BarrierConfig::default()).unwrap();
        for pair in sol.stage_objectives.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        assert!(prob.max_violation(&sol.x) <= 1e-9);
    }
}
