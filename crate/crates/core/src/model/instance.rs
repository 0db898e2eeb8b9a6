use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::topology::CollaborationTopology;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, block_diag};

/// Variances of the parameter and the two noise sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Prior variance of each `theta_k`.
    pub sigma_theta_sq: f64,
    /// Measurement noise variance.
    pub sigma_eps_sq: f64,
    /// Channel noise variance at the fusion center.
    pub sigma_varsigma_sq: f64,
}

impl NoiseSpec {
    pub fn unit() -> Self {
        Self {
            sigma_theta_sq: 1.0,
            sigma_eps_sq: 1.0,
            sigma_varsigma_sq: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_theta_sq", self.sigma_theta_sq),
            ("sigma_eps_sq", self.sigma_eps_sq),
            ("sigma_varsigma_sq", self.sigma_varsigma_sq),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Temporal correlation model of the parameter sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationSpec {
    Uncorrelated,
    /// `cov(theta_i, theta_j) = sigma_theta^2 exp(-|i - j| rho_corr)`.
    OrnsteinUhlenbeck { rho_corr: f64 },
}

impl CorrelationSpec {
    pub fn covariance(&self, horizon: usize, sigma_theta_sq: f64) -> Result<DMatrix<f64>> {
        match *self {
            CorrelationSpec::Uncorrelated => {
                if !(sigma_theta_sq > 0.0) {
                    return Err(Error::InvalidParameter("sigma_theta_sq must be positive".into()));
                }
                Ok(DMatrix::identity(horizon, horizon) * sigma_theta_sq)
            }
            CorrelationSpec::OrnsteinUhlenbeck { rho_corr } => {
                ou_covariance(horizon, rho_corr, sigma_theta_sq)
            }
        }
    }
}

/// Ornstein-Uhlenbeck prior covariance, entries `sigma_theta^2 exp(-|i - j| rho_corr)`.
///
/// Larger `rho_corr` means weaker correlation; `rho_corr -> inf` gives `sigma_theta^2 I`.
pub fn ou_covariance(horizon: usize, rho_corr: f64, sigma_theta_sq: f64) -> Result<DMatrix<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    if !(rho_corr > 0.0) {
        return Err(Error::InvalidParameter(format!("rho_corr must be positive, got {rho_corr}")));
    }
    if !(sigma_theta_sq > 0.0 && sigma_theta_sq.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma_theta_sq must be positive, got {sigma_theta_sq}"
        )));
    }
    Ok(DMatrix::from_fn(horizon, horizon, |i, j| {
        let lag = i.abs_diff(j) as f64;
        sigma_theta_sq * (-lag * rho_corr).exp()
    }))
}

/// Where the observation and channel gains come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GainsSource {
    /// Every `h_{k,n}` and `g_{k,m}` i.i.d. uniform on `[0.1, 1)`, fresh for each time step.
    Random { seed: u64 },
    Explicit {
        obs: Vec<DVector<f64>>,
        channel: Vec<DVector<f64>>,
    },
}

impl GainsSource {
    /// Draw (or copy) the gain traces for a horizon `k` on an N-sensor, M-transmitter network.
    pub fn realize(
        &self,
        horizon: usize,
        num_sensors: usize,
        num_transmitters: usize,
    ) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        match self {
            GainsSource::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(draw_uniform_gains(horizon, num_sensors, num_transmitters, &mut rng))
            }
            GainsSource::Explicit { obs, channel } => {
                check_dim("observation gain traces", horizon, obs.len())?;
                check_dim("channel gain traces", horizon, channel.len())?;
                for h in obs {
                    check_dim("observation gains", num_sensors, h.len())?;
                }
                for g in channel {
                    check_dim("channel gains", num_transmitters, g.len())?;
                }
                Ok((obs.clone(), channel.clone()))
            }
        }
    }
}

/// Gains uniform on `[0.1, 1)`; per time step the N observation gains come first, then the
/// M channel gains.
pub fn draw_uniform_gains<R: Rng + ?Sized>(
    horizon: usize,
    num_sensors: usize,
    num_transmitters: usize,
    rng: &mut R,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let mut obs = Vec::with_capacity(horizon);
    let mut channel = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        obs.push(DVector::from_fn(num_sensors, |_, _| rng.random_range(0.1..1.0)));
        channel.push(DVector::from_fn(num_transmitters, |_, _| rng.random_range(0.1..1.0)));
    }
    (obs, channel)
}

/// A fully specified collaboration problem with every derived matrix cached.
///
/// Instances are immutable after assembly and can be shared across threads.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    topology: CollaborationTopology,
    horizon: usize,
    obs_gains: Vec<DVector<f64>>,
    channel_gains: Vec<DVector<f64>>,
    noise: NoiseSpec,
    correlation: CorrelationSpec,
    theta_cov: DMatrix<f64>,
    theta_cov_inv: DMatrix<f64>,
    budgets: DVector<f64>,
    // derived
    channel_embed: Vec<DMatrix<f64>>,
    signal_gram: Vec<DMatrix<f64>>,
    noise_gram: Vec<DMatrix<f64>>,
    energy: Vec<Vec<DMatrix<f64>>>,
    info: DMatrix<f64>,
}

/// Build an instance and all its derived matrices.
pub fn assemble_instance(
    topology: CollaborationTopology,
    horizon: usize,
    gains: &GainsSource,
    noise: NoiseSpec,
    correlation: CorrelationSpec,
    budgets: DVector<f64>,
) -> Result<ProblemInstance> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    noise.validate()?;
    let m = topology.num_transmitters();
    let n = topology.num_sensors();
    check_dim("energy budgets", m, budgets.len())?;
    if budgets.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("energy budgets must be finite and non-negative".into()));
    }
    let (obs_gains, channel_gains) = gains.realize(horizon, n, m)?;
    let theta_cov = correlation.covariance(horizon, noise.sigma_theta_sq)?;
    let theta_cov_inv = linalg::spd_inverse(&theta_cov, "parameter covariance")
        .map_err(|e| Error::InvalidInstance(e.to_string()))?;

    let mut channel_embed = Vec::with_capacity(horizon);
    let mut signal_gram = Vec::with_capacity(horizon);
    let mut noise_gram = Vec::with_capacity(horizon);
    let mut energy = Vec::with_capacity(horizon);
    let selectors: Vec<DMatrix<f64>> = (0..m)
        .map(|i| {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            topology.embedding(&e)
        })
        .collect::<Result<_>>()?;
    for k in 0..horizon {
        let h = &obs_gains[k];
        let g_embed = topology.embedding(&channel_gains[k])?;
        // sigma_theta^2 h h^T + sigma_eps^2 I: second moment of the raw measurements
        let mut moment = h * h.transpose() * noise.sigma_theta_sq;
        for i in 0..n {
            moment[(i, i)] += noise.sigma_eps_sq;
        }
        let mut s = &g_embed * &moment * g_embed.transpose();
        linalg::symmetrize_in_place(&mut s);
        let mut r = &g_embed * g_embed.transpose();
        linalg::symmetrize_in_place(&mut r);
        let q_k: Vec<DMatrix<f64>> = selectors
            .iter()
            .map(|sel| {
                let mut q = sel * &moment * sel.transpose();
                linalg::symmetrize_in_place(&mut q);
                q
            })
            .collect();
        channel_embed.push(g_embed);
        signal_gram.push(s);
        noise_gram.push(r);
        energy.push(q_k);
    }
    let mut info = theta_cov_inv.clone();
    for k in 0..horizon {
        info[(k, k)] += obs_gains[k].norm_squared() / noise.sigma_eps_sq;
    }

    Ok(ProblemInstance {
        topology,
        horizon,
        obs_gains,
        channel_gains,
        noise,
        correlation,
        theta_cov,
        theta_cov_inv,
        budgets,
        channel_embed,
        signal_gram,
        noise_gram,
        energy,
        info,
    })
}

impl ProblemInstance {
    pub fn topology(&self) -> &CollaborationTopology {
        &self.topology
    }

    /// Horizon `K`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of links `L`.
    pub fn num_links(&self) -> usize {
        self.topology.num_links()
    }

    pub fn num_sensors(&self) -> usize {
        self.topology.num_sensors()
    }

    pub fn num_transmitters(&self) -> usize {
        self.topology.num_transmitters()
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn correlation(&self) -> CorrelationSpec {
        self.correlation
    }

    /// `h_k`.
    pub fn obs_gains(&self, k: usize) -> &DVector<f64> {
        &self.obs_gains[k]
    }

    /// `g_k`.
    pub fn channel_gains(&self, k: usize) -> &DVector<f64> {
        &self.channel_gains[k]
    }

    pub fn theta_cov(&self) -> &DMatrix<f64> {
        &self.theta_cov
    }

    pub fn theta_cov_inv(&self) -> &DMatrix<f64> {
        &self.theta_cov_inv
    }

    pub fn budgets(&self) -> &DVector<f64> {
        &self.budgets
    }

    /// `G_k` (L x N): `g_k^T W_k = w_k^T G_k`.
    pub fn channel_embedding(&self, k: usize) -> &DMatrix<f64> {
        &self.channel_embed[k]
    }

    /// `S_k = G_k (sigma_theta^2 h_k h_k^T + sigma_eps^2 I) G_k^T`.
    pub fn signal_gram(&self, k: usize) -> &DMatrix<f64> {
        &self.signal_gram[k]
    }

    /// `R_k = G_k G_k^T`.
    pub fn noise_gram(&self, k: usize) -> &DMatrix<f64> {
        &self.noise_gram[k]
    }

    /// `Q_{k,m}`: transmission cost of transmitter `m` at time `k` is `w_k^T Q_{k,m} w_k`.
    pub fn energy_form(&self, k: usize, m: usize) -> &DMatrix<f64> {
        &self.energy[k][m]
    }

    /// `Q_m = blkdiag{Q_{k,m}}`, built on demand.
    pub fn stacked_energy_form(&self, m: usize) -> DMatrix<f64> {
        let blocks: Vec<DMatrix<f64>> = (0..self.horizon).map(|k| self.energy[k][m].clone()).collect();
        block_diag(&blocks)
    }

    /// `C = Sigma_theta^{-1} + sigma_eps^{-2} diag{||h_k||^2}`.
    pub fn info_matrix(&self) -> &DMatrix<f64> {
        &self.info
    }

    /// Same network, gains and noise with a different prior correlation.
    pub fn with_correlation(&self, correlation: CorrelationSpec) -> Result<ProblemInstance> {
        self.rebuild(correlation, self.budgets.clone())
    }

    /// Same instance with different energy budgets.
    pub fn with_budgets(&self, budgets: DVector<f64>) -> Result<ProblemInstance> {
        self.rebuild(self.correlation, budgets)
    }

    fn rebuild(&self, correlation: CorrelationSpec, budgets: DVector<f64>) -> Result<ProblemInstance> {
        assemble_instance(
            self.topology.clone(),
            self.horizon,
            &GainsSource::Explicit {
                obs: self.obs_gains.clone(),
                channel: self.channel_gains.clone(),
            },
            self.noise,
            correlation,
            budgets,
        )
    }
}
