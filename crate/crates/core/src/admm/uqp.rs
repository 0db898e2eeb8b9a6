//! The unconstrained quadratic program solved in the primal step.

use nalgebra::{DMatrix, DVector};

use super::state::{DualSet, PrimalSet, SlackSet};
use super::AdmmConfig;
use crate::pccp::PenalizedSdp;

/// Shifted targets `Upsilon = Lambda - Pi / rho` and `alpha_m = lambda_m - c_m - pi_m / rho`.
#[derive(Debug, Clone)]
pub struct UqpContext {
    pub rho: f64,
    pub alpha: Vec<DVector<f64>>,
    pub big: DMatrix<f64>,
    pub info: Vec<DMatrix<f64>>,
    pub lift: Vec<DMatrix<f64>>,
    pub dc: Vec<DMatrix<f64>>,
}

impl UqpContext {
    pub fn new(sdp: &PenalizedSdp<'_>, slack: &SlackSet, dual: &DualSet, rho: f64) -> Self {
        let inv = 1.0 / rho;
        let shift = |a: &[DMatrix<f64>], b: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
            a.iter().zip(b).map(|(x, y)| x - y * inv).collect()
        };
        let alpha = slack
            .lambda
            .iter()
            .zip(&dual.lambda)
            .enumerate()
            .map(|(m, (l, p))| {
                let mut a = l - p * inv;
                let last = a.len() - 1;
                a[last] -= sdp.sqrt_budget(m);
                a
            })
            .collect();
        Self {
            rho,
            alpha,
            big: &slack.big - &dual.big * inv,
            info: shift(&slack.info, &dual.info),
            lift: shift(&slack.lift, &dual.lift),
            dc: shift(&slack.dc, &dual.dc),
        }
    }
}

/// Gradient blocks of the UQP objective.
#[derive(Debug, Clone, PartialEq)]
pub struct UqpGradient {
    pub w: DVector<f64>,
    pub p: DVector<f64>,
    pub v: DMatrix<f64>,
    pub u: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
}

impl UqpGradient {
    /// `||grad_w||^2 + sum ||grad_U_k||_F^2 + sum ||grad_Z_k||_F^2`.
    pub fn c_grad(&self) -> f64 {
        self.w.norm_squared()
            + self.u.iter().map(DMatrix::norm_squared).sum::<f64>()
            + self.z.iter().map(DMatrix::norm_squared).sum::<f64>()
    }
}

/// `p = (diag(C) + gamma_2 - diag(Upsilon_1^11)) / 2`, `V = Upsilon_1^22 - I / rho`.
pub fn closed_form_p_v(sdp: &PenalizedSdp<'_>, ctx: &UqpContext) -> (DVector<f64>, DMatrix<f64>) {
    let k_len = sdp.horizon();
    let c = sdp.info_matrix();
    let p = DVector::from_fn(k_len, |k, _| 0.5 * (c[(k, k)] + ctx.info[k][(0, 0)] - ctx.big[(k, k)]));
    let lower = ctx.big.view((k_len, k_len), (k_len, k_len));
    let mut v = (lower + lower.transpose()) * 0.5;
    for i in 0..k_len {
        v[(i, i)] -= 1.0 / ctx.rho;
    }
    (p, v)
}

/// Objective value and gradient of the UQP at `x`.
pub fn objective_and_gradient(sdp: &PenalizedSdp<'_>, ctx: &UqpContext, x: &PrimalSet) -> (f64, UqpGradient) {
    let rho = ctx.rho;
    let k_len = sdp.horizon();
    let l = sdp.num_links();
    let cr = sdp.gain_ratio();
    let form = sdp.formulation();
    let tau = sdp.tau();

    let mut value = x.v.trace() + tau * x.z.iter().map(DMatrix::trace).sum::<f64>();
    let mut gw = DVector::zeros(x.w.len());

    for m in 0..sdp.num_transmitters() {
        let support = sdp.energy_support(m);
        let n = support.len();
        let alpha = &ctx.alpha[m];
        let resid = sdp.energy_image(m, &x.w) - alpha.rows(0, n);
        value += 0.5 * rho * (resid.norm_squared() + alpha[n] * alpha[n]);
        let back = sdp.energy_root(m).transpose() * resid * rho;
        for (a, &i) in support.iter().enumerate() {
            gw[i] += back[a];
        }
    }

    let b1 = sdp.lmi_big(&x.p, &x.v) - &ctx.big;
    value += 0.5 * rho * b1.norm_squared();
    let mut gp = DVector::from_fn(k_len, |k, _| -rho * b1[(k, k)]);
    let mut gv = b1.view((k_len, k_len), (k_len, k_len)) * rho;
    for i in 0..k_len {
        gv[(i, i)] += 1.0;
    }

    let mut gu = Vec::with_capacity(k_len);
    let mut gz = Vec::with_capacity(k_len);
    for k in 0..k_len {
        let o = form.offset(k);
        let wk = x.w.rows(o, l);
        let wh = sdp.w_hat_block(k);
        let g = sdp.channel_embedding(k);
        let u = &x.u[k];

        let b2 = sdp.lmi_info(k, x.p[k], u) - &ctx.info[k];
        value += 0.5 * rho * b2.norm_squared();
        gp[k] += rho * b2[(0, 0)];
        let n = g.ncols();
        let a2 = b2.view((1, 1), (n, n));
        let mut grad_u = g * a2 * g.transpose() * (rho * cr);

        let b3 = sdp.lmi_lift(u, wk) - &ctx.lift[k];
        value += 0.5 * rho * b3.norm_squared();
        grad_u += b3.view((0, 0), (l, l)) * rho;
        let col = b3.view((0, l), (l, 1));
        let row = b3.view((l, 0), (1, l));
        let mut gwk = (col + row.transpose()) * rho;

        let d4 = sdp.lmi_dc(k, &x.z[k], u, wk) - &ctx.dc[k];
        value += 0.5 * rho * d4.norm_squared();
        grad_u -= &d4 * rho;
        gwk += (&d4 + d4.transpose()) * wh * rho;
        let mut grad_z = &d4 * rho;
        for i in 0..l {
            grad_z[(i, i)] += tau;
        }

        let mut seg = gw.rows_mut(o, l);
        seg += gwk;
        gu.push(grad_u);
        gz.push(grad_z);
    }

    (
        value,
        UqpGradient {
            w: gw,
            p: gp,
            v: gv,
            u: gu,
            z: gz,
        },
    )
}

/// UQP objective at `x`.
pub fn objective(sdp: &PenalizedSdp<'_>, ctx: &UqpContext, x: &PrimalSet) -> f64 {
    objective_and_gradient(sdp, ctx, x).0
}

/// Half the curvature along `d = (d_w, d_U, d_Z)`: `phi(x + s d) = phi(x) + s g.d + s^2 q`.
fn curvature(sdp: &PenalizedSdp<'_>, rho: f64, d: &UqpGradient) -> f64 {
    let l = sdp.num_links();
    let cr = sdp.gain_ratio();
    let form = sdp.formulation();
    let mut q = 0.0;
    for m in 0..sdp.num_transmitters() {
        q += sdp.energy_image(m, &d.w).norm_squared();
    }
    for k in 0..sdp.horizon() {
        let dw = d.w.rows(form.offset(k), l);
        let wh = sdp.w_hat_block(k);
        let g = sdp.channel_embedding(k);
        let du = &d.u[k];
        q += (g.transpose() * du * g).norm_squared() * cr * cr;
        q += du.norm_squared() + 2.0 * dw.norm_squared();
        let t = &d.z[k] - du + wh * dw.transpose() + dw * wh.transpose();
        q += t.norm_squared();
    }
    0.5 * rho * q
}

/// Outcome of the gradient-descent loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientRun {
    pub iterations: usize,
    pub c_grad: f64,
    pub stalled: bool,
}

/// Primal step: closed-form `(p, V)`, then gradient descent with backtracking on
/// `(w, {U_k}, {Z_k})` until `c_grad <= eps_grad`.
///
/// The objective is quadratic, so each trial value in the line search is evaluated exactly
/// from the gradient norm and the curvature along the gradient.
pub fn x_minimize(sdp: &PenalizedSdp<'_>, ctx: &UqpContext, start: &PrimalSet, config: &AdmmConfig) -> (PrimalSet, GradientRun) {
    let mut x = start.clone();
    let (p, v) = closed_form_p_v(sdp, ctx);
    x.p = p;
    x.v = v;
    let mut run = GradientRun {
        iterations: 0,
        c_grad: f64::INFINITY,
        stalled: false,
    };
    let cap = sdp.z_trace_cap();
    loop {
        let (phi, g) = objective_and_gradient(sdp, ctx, &x);
        let c = g.c_grad();
        run.c_grad = c;
        if c <= config.eps_grad || run.iterations >= config.max_grad_iters {
            break;
        }
        let q = curvature(sdp, ctx.rho, &g);
        let mut kappa = 1.0;
        loop {
            kappa *= config.a2;
            let trial = phi - kappa * c + kappa * kappa * q;
            if trial < phi - config.a1 * kappa * c {
                break;
            }
            if kappa < 1e-16 {
                run.stalled = true;
                break;
            }
        }
        if run.stalled {
            break;
        }
        x.w -= &g.w * kappa;
        for k in 0..x.u.len() {
            x.u[k] -= &g.u[k] * kappa;
            x.z[k] -= &g.z[k] * kappa;
            crate::linalg::symmetrize_in_place(&mut x.u[k]);
            crate::linalg::symmetrize_in_place(&mut x.z[k]);
        }
        run.iterations += 1;
    }
    for z in &mut x.z {
        let tr = z.trace();
        if tr > cap {
            let shift = (tr - cap) / z.nrows() as f64;
            for i in 0..z.nrows() {
                z[(i, i)] -= shift;
            }
        }
    }
    (x, run)
}
