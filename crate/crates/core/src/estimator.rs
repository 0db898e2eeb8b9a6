//! LMMSE error covariances, distortion objectives, transmission costs and Monte Carlo
//! validation of a collaboration plan.
//!
//! Three algebraic routes to the error covariance are provided and are expected to agree:
//!
//! * [`error_covariance_general`] assembles the stacked measurement model
//!   `y = D_W D_h theta + nu` densely and inverts the Bayesian information matrix;
//! * [`error_covariance_correlated`] uses the collaboration-vector form, where each time
//!   step only contributes a rank-one correction handled with Sherman-Morrison;
//! * [`distortion_uncorrelated`] is the sum of quadratic ratios, valid when the prior
//!   covariance is `sigma_theta^2 I`.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::ProblemInstance;

/// Stacked collaboration vector `w = [w_1; ...; w_K]`, each block of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollaborationPlan {
    num_links: usize,
    w: DVector<f64>,
}

impl CollaborationPlan {
    pub fn new(horizon: usize, num_links: usize, w: DVector<f64>) -> Result<Self> {
        check_dim("collaboration plan length", horizon * num_links, w.len())?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("collaboration plan has non-finite entries".into()));
        }
        Ok(Self { num_links, w })
    }

    pub fn zeros(instance: &ProblemInstance) -> Self {
        Self {
            num_links: instance.num_links(),
            w: DVector::zeros(instance.horizon() * instance.num_links()),
        }
    }

    pub fn from_blocks(blocks: &[DVector<f64>]) -> Result<Self> {
        let l = blocks.first().map_or(0, |b| b.len());
        let mut w = DVector::zeros(l * blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            check_dim("collaboration block length", l, b.len())?;
            w.rows_mut(k * l, l).copy_from(b);
        }
        Self::new(blocks.len(), l, w)
    }

    pub fn horizon(&self) -> usize {
        if self.num_links == 0 {
            0
        } else {
            self.w.len() / self.num_links
        }
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.w
    }

    /// `w_k`.
    pub fn block(&self, k: usize) -> DVectorView<'_, f64> {
        self.w.rows(k * self.num_links, self.num_links)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            num_links: self.num_links,
            w: &self.w * alpha,
        }
    }

    /// `W_k` (M x N), supported inside the topology matrix.
    pub fn reconstruct_matrix(&self, instance: &ProblemInstance, k: usize) -> Result<DMatrix<f64>> {
        instance.topology().scatter(self.block(k).as_slice())
    }
}

/// Error covariance `P` and its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub covariance: DMatrix<f64>,
    pub trace: f64,
}

impl ErrorReport {
    fn from_covariance(mut covariance: DMatrix<f64>) -> Self {
        linalg::symmetrize_in_place(&mut covariance);
        let trace = covariance.trace();
        Self { covariance, trace }
    }
}

/// Monte Carlo estimate of `E ||theta_hat - theta||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseEstimate {
    pub mse: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

/// JSON form of an evaluated plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub trace: f64,
    /// Row-major K x K error covariance.
    pub covariance: Vec<f64>,
    pub mse: f64,
    pub trials: usize,
    pub seed: u64,
}

impl EstimationReport {
    pub fn new(report: &ErrorReport, mc: &MseEstimate) -> Self {
        let k = report.covariance.nrows();
        let covariance = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| report.covariance[(i, j)])
            .collect();
        Self {
            trace: report.trace,
            covariance,
            mse: mc.mse,
            trials: mc.trials,
            seed: mc.seed,
        }
    }
}

fn check_plan(instance: &ProblemInstance, plan: &CollaborationPlan) -> Result<()> {
    check_dim("plan links", instance.num_links(), plan.num_links())?;
    check_dim("plan horizon", instance.horizon(), plan.horizon())
}

/// Rows `g_k^T W_k` (length N) of the block-diagonal `D_W`, via the reconstructed `W_k`.
fn effective_rows(instance: &ProblemInstance, plan: &CollaborationPlan) -> Result<Vec<DVector<f64>>> {
    (0..instance.horizon())
        .map(|k| {
            let w_mat = plan.reconstruct_matrix(instance, k)?;
            Ok(w_mat.transpose() * instance.channel_gains(k))
        })
        .collect()
}

/// `D_W = blkdiag{g_k^T W_k}` (K x KN) and `D_h = blkdiag{h_k}` (KN x K).
fn stacked_model(instance: &ProblemInstance, plan: &CollaborationPlan) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k_len = instance.horizon();
    let n = instance.num_sensors();
    let rows = effective_rows(instance, plan)?;
    let mut d_w = DMatrix::zeros(k_len, k_len * n);
    let mut d_h = DMatrix::zeros(k_len * n, k_len);
    for k in 0..k_len {
        d_w.view_mut((k, k * n), (1, n)).copy_from(&rows[k].transpose());
        d_h.view_mut((k * n, k), (n, 1)).copy_from(instance.obs_gains(k));
    }
    Ok((d_w, d_h))
}

/// `P_W = (Sigma^{-1} + D_h^T D_W^T D_nu^{-1} D_W D_h)^{-1}` with
/// `D_nu = sigma_eps^2 D_W D_W^T + sigma_varsigma^2 I`.
pub fn error_covariance_general(instance: &ProblemInstance, plan: &CollaborationPlan) -> Result<ErrorReport> {
    check_plan(instance, plan)?;
    let noise = instance.noise();
    let (d_w, d_h) = stacked_model(instance, plan)?;
    let k_len = instance.horizon();
    let d_nu = &d_w * d_w.transpose() * noise.sigma_eps_sq
        + DMatrix::identity(k_len, k_len) * noise.sigma_varsigma_sq;
    let d_nu_inv = linalg::spd_inverse(&d_nu, "noise covariance")?;
    let mix = &d_w * &d_h;
    let info = instance.theta_cov_inv() + mix.transpose() * d_nu_inv * &mix;
    Ok(ErrorReport::from_covariance(linalg::spd_inverse(&info, "Bayesian information")?))
}

/// Sum of quadratic ratios
/// `sum_k (s_t s_e w_k^T R_k w_k + s_t s_v) / (w_k^T S_k w_k + s_v)`
/// (`s_t`, `s_e`, `s_v` the three variances).
///
/// Equals `tr(P_W)` when the prior covariance is `sigma_theta^2 I`; for a correlated prior it
/// is the error of the estimator that ignores the correlation.
pub fn distortion_uncorrelated(instance: &ProblemInstance, plan: &CollaborationPlan) -> Result<f64> {
    check_plan(instance, plan)?;
    Ok((0..instance.horizon())
        .map(|k| step_distortion(instance, plan.block(k), k))
        .sum())
}

/// The `k`-th quadratic ratio of the uncorrelated distortion.
pub fn step_distortion(instance: &ProblemInstance, w_k: DVectorView<'_, f64>, k: usize) -> f64 {
    let noise = instance.noise();
    let rq = w_k.dot(&(instance.noise_gram(k) * w_k));
    let sq = w_k.dot(&(instance.signal_gram(k) * w_k));
    noise.sigma_theta_sq * (noise.sigma_eps_sq * rq + noise.sigma_varsigma_sq) / (sq + noise.sigma_varsigma_sq)
}

/// `P_w = (C - sigma_eps^{-2} diag{h_k^T (I + c G_k^T w_k w_k^T G_k)^{-1} h_k})^{-1}` with
/// `c = sigma_eps^2 / sigma_varsigma^2`; the inner inverse is the Sherman-Morrison form.
pub fn error_covariance_correlated(instance: &ProblemInstance, plan: &CollaborationPlan) -> Result<ErrorReport> {
    check_plan(instance, plan)?;
    let noise = instance.noise();
    let c = noise.sigma_eps_sq / noise.sigma_varsigma_sq;
    let mut fisher = instance.info_matrix().clone();
    for k in 0..instance.horizon() {
        let h = instance.obs_gains(k);
        let v = instance.channel_embedding(k).transpose() * plan.block(k);
        let hv = h.dot(&v);
        let quad = h.norm_squared() - c * hv * hv / (1.0 + c * v.norm_squared());
        fisher[(k, k)] -= quad / noise.sigma_eps_sq;
    }
    Ok(ErrorReport::from_covariance(linalg::spd_inverse(&fisher, "Bayesian information")?))
}

/// LMMSE gain `Sigma_p D^T (D Sigma_p D^T + D_nu)^{-1}` for an assumed prior `Sigma_p`.
fn lmmse_gain(
    instance: &ProblemInstance,
    plan: &CollaborationPlan,
    prior: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let noise = instance.noise();
    let (d_w, d_h) = stacked_model(instance, plan)?;
    let k_len = instance.horizon();
    let mix = &d_w * &d_h;
    let d_nu = &d_w * d_w.transpose() * noise.sigma_eps_sq
        + DMatrix::identity(k_len, k_len) * noise.sigma_varsigma_sq;
    let innov = &mix * prior * mix.transpose() + &d_nu;
    let innov_inv = linalg::spd_inverse(&innov, "innovation covariance")?;
    let gain = prior * mix.transpose() * innov_inv;
    Ok((gain, mix, d_nu))
}

/// Error covariance of the LMMSE estimator built for prior `assumed_prior` when the
/// parameters actually follow the instance prior.
///
/// With `assumed_prior = sigma_theta^2 I` this is the error achieved by a fusion center that
/// ignores temporal correlation.
pub fn error_covariance_mismatched(
    instance: &ProblemInstance,
    plan: &CollaborationPlan,
    assumed_prior: &DMatrix<f64>,
) -> Result<ErrorReport> {
    check_plan(instance, plan)?;
    let k_len = instance.horizon();
    check_dim("assumed prior", k_len, assumed_prior.nrows())?;
    let (gain, mix, d_nu) = lmmse_gain(instance, plan, assumed_prior)?;
    let resid = DMatrix::identity(k_len, k_len) - &gain * &mix;
    let cov = &resid * instance.theta_cov() * resid.transpose() + &gain * d_nu * gain.transpose();
    Ok(ErrorReport::from_covariance(cov))
}

/// Total transmission cost `sum_k w_k^T Q_{k,m} w_k` of transmitter `m`.
pub fn transmission_cost(instance: &ProblemInstance, plan: &CollaborationPlan, m: usize) -> Result<f64> {
    check_plan(instance, plan)?;
    if m >= instance.num_transmitters() {
        return Err(Error::InvalidParameter(format!(
            "transmitter index {m} out of range (M = {})",
            instance.num_transmitters()
        )));
    }
    Ok((0..instance.horizon())
        .map(|k| {
            let w_k = plan.block(k);
            w_k.dot(&(instance.energy_form(k, m) * w_k))
        })
        .sum())
}

/// Largest relative budget overrun `max_m (cost_m - E_m) / max(E_m, 1e-300)`, or zero.
pub fn max_energy_violation(instance: &ProblemInstance, plan: &CollaborationPlan) -> Result<f64> {
    let mut worst = 0.0_f64;
    for m in 0..instance.num_transmitters() {
        let e = instance.budgets()[m];
        let cost = transmission_cost(instance, plan, m)?;
        worst = worst.max((cost - e) / e.max(1e-300));
    }
    Ok(worst)
}

/// Monte Carlo MSE of the LMMSE estimator using the instance prior.
pub fn simulate_mse(instance: &ProblemInstance, plan: &CollaborationPlan, trials: usize, seed: u64) -> Result<MseEstimate> {
    simulate_mse_with_prior(instance, plan, instance.theta_cov(), trials, seed)
}

/// Monte Carlo MSE of the LMMSE estimator designed for `assumed_prior`.
///
/// Parameters are drawn from `N(0, Sigma_theta)` of the instance, measurements, collaboration
/// and the coherent channel are simulated sample by sample, and `theta_hat = K y`.
/// Trial `i` draws from ChaCha8 stream `i` of `seed`, so the result does not depend on
/// thread scheduling.
pub fn simulate_mse_with_prior(
    instance: &ProblemInstance,
    plan: &CollaborationPlan,
    assumed_prior: &DMatrix<f64>,
    trials: usize,
    seed: u64,
) -> Result<MseEstimate> {
    check_plan(instance, plan)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let k_len = instance.horizon();
    let n = instance.num_sensors();
    let noise = *instance.noise();
    let (gain, _, _) = lmmse_gain(instance, plan, assumed_prior)?;
    let chol = instance
        .theta_cov()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInstance("parameter covariance is not positive definite".into()))?;
    let prior_factor = chol.l();
    let weights: Vec<DMatrix<f64>> = (0..k_len)
        .map(|k| plan.reconstruct_matrix(instance, k))
        .collect::<Result<_>>()?;
    let eps_sd = noise.sigma_eps_sq.sqrt();
    let chan_sd = noise.sigma_varsigma_sq.sqrt();

    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let z = DVector::from_fn(k_len, |_, _| StandardNormal.sample(&mut rng));
            let theta = &prior_factor * z;
            let mut y = DVector::zeros(k_len);
            for k in 0..k_len {
                let x = DVector::from_fn(n, |i, _| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    instance.obs_gains(k)[i] * theta[k] + eps_sd * e
                });
                let zk = &weights[k] * x;
                let v: f64 = StandardNormal.sample(&mut rng);
                y[k] = instance.channel_gains(k).dot(&zk) + chan_sd * v;
            }
            (&gain * y - theta).norm_squared()
        })
        .collect();
    let count = trials as f64;
    let mse = errors.iter().sum::<f64>() / count;
    let var = if trials > 1 {
        errors.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    Ok(MseEstimate {
        mse,
        stderr: (var / count).sqrt(),
        trials,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_instance, CollaborationTopology, CorrelationSpec, GainsSource, NoiseSpec};

    fn scalar_instance() -> ProblemInstance {
        assemble_instance(
            CollaborationTopology::diagonal(1),
            1,
            &GainsSource::Explicit {
                obs: vec![DVector::from_element(1, 1.0)],
                channel: vec![DVector::from_element(1, 1.0)],
            },
            NoiseSpec::unit(),
            CorrelationSpec::Uncorrelated,
            DVector::from_element(1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_distortion_is_two_thirds() {
        let inst = scalar_instance();
        let plan = CollaborationPlan::new(1, 1, DVector::from_element(1, 1.0)).unwrap();
        let d = distortion_uncorrelated(&inst, &plan).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
        let p = error_covariance_general(&inst, &plan).unwrap();
        assert!((p.trace - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_transmission_cost() {
        let inst = scalar_instance();
        let plan = CollaborationPlan::new(1, 1, DVector::from_element(1, 0.5)).unwrap();
        assert!((transmission_cost(&inst, &plan, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!(transmission_cost(&inst, &plan, 1).is_err());
    }

    #[test]
    fn zero_plan_returns_prior() {
        let inst = crate::model::InstanceConfig::paper_default(11).build().unwrap();
        let plan = CollaborationPlan::zeros(&inst);
        let g = error_covariance_general(&inst, &plan).unwrap();
        let c = error_covariance_correlated(&inst, &plan).unwrap();
        assert!((&g.covariance - inst.theta_cov()).amax() < 1e-12);
        assert!((&c.covariance - inst.theta_cov()).amax() < 1e-12);
        assert!((distortion_uncorrelated(&inst, &plan).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn plan_rejects_nan_and_bad_length() {
        assert!(CollaborationPlan::new(2, 2, DVector::from_element(3, 0.0)).is_err());
        assert!(CollaborationPlan::new(1, 1, DVector::from_element(1, f64::NAN)).is_err());
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let inst = scalar_instance();
        let plan = CollaborationPlan::new(1, 1, DVector::from_element(1, 0.7)).unwrap();
        let a = simulate_mse(&inst, &plan, 200, 17).unwrap();
        let b = simulate_mse(&inst, &plan, 200, 17).unwrap();
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        assert!(simulate_mse(&inst, &plan, 0, 17).is_err());
    }
}
