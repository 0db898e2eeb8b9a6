use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::instance::{
    assemble_instance, draw_uniform_gains, CorrelationSpec, GainsSource, NoiseSpec, ProblemInstance,
};
use super::topology::{deploy_uniform, CollaborationTopology};
use crate::error::{Error, Result};

/// `rho_corr` in the JSON document: a positive rate or the string `"uncorrelated"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoCorr {
    Rate(f64),
    Named(Uncorrelated),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Uncorrelated {
    Uncorrelated,
}

impl From<RhoCorr> for CorrelationSpec {
    fn from(value: RhoCorr) -> Self {
        match value {
            RhoCorr::Rate(rho_corr) => CorrelationSpec::OrnsteinUhlenbeck { rho_corr },
            RhoCorr::Named(_) => CorrelationSpec::Uncorrelated,
        }
    }
}

/// Explicit gain traces, one row per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitGains {
    pub obs: Vec<Vec<f64>>,
    pub channel: Vec<Vec<f64>>,
}

/// Serialized description of a problem instance.
///
/// Without explicit `adjacency`/`gains` the network is `RGG(N, d)` and the gains are drawn
/// from `U(0.1, 1)`, both from a ChaCha8 stream seeded with `seed`: N positions first, then
/// for each time step the N observation gains and the M channel gains. The positions are
/// always drawn so that changing `d` or `adjacency` never changes the gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub seed: u64,
    #[serde(rename = "N")]
    pub num_sensors: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub num_transmitters: Option<usize>,
    #[serde(rename = "K")]
    pub horizon: usize,
    pub d: f64,
    pub sigma_theta_sq: f64,
    pub sigma_eps_sq: f64,
    pub sigma_varsigma_sq: f64,
    pub rho_corr: RhoCorr,
    #[serde(rename = "E_total")]
    pub energy_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<ExplicitGains>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<u8>>>,
}

impl InstanceConfig {
    /// N = M = 10, K = 3, d = 0.3, unit variances, rho_corr = 0.5, E_total = 1.
    pub fn paper_default(seed: u64) -> Self {
        Self {
            seed,
            num_sensors: 10,
            num_transmitters: None,
            horizon: 3,
            d: 0.3,
            sigma_theta_sq: 1.0,
            sigma_eps_sq: 1.0,
            sigma_varsigma_sq: 1.0,
            rho_corr: RhoCorr::Rate(0.5),
            energy_total: 1.0,
            gains: None,
            adjacency: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn transmitters(&self) -> usize {
        self.num_transmitters.unwrap_or(self.num_sensors)
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma_theta_sq: self.sigma_theta_sq,
            sigma_eps_sq: self.sigma_eps_sq,
            sigma_varsigma_sq: self.sigma_varsigma_sq,
        }
    }

    /// Schema-level checks (no instance is assembled).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_sensors == 0 {
            return bad("N must be positive".into());
        }
        let m = self.transmitters();
        if m == 0 || m > self.num_sensors {
            return bad(format!("M must satisfy 1 <= M <= N, got M = {m}"));
        }
        if self.horizon == 0 {
            return bad("K must be positive".into());
        }
        if self.adjacency.is_none() && !(self.d > 0.0 && self.d <= std::f64::consts::SQRT_2) {
            return bad(format!("d must lie in (0, sqrt 2], got {}", self.d));
        }
        for (name, v) in [
            ("sigma_theta_sq", self.sigma_theta_sq),
            ("sigma_eps_sq", self.sigma_eps_sq),
            ("sigma_varsigma_sq", self.sigma_varsigma_sq),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let RhoCorr::Rate(r) = self.rho_corr {
            if !(r > 0.0) {
                return bad(format!("rho_corr must be positive or \"uncorrelated\", got {r}"));
            }
        }
        if !(self.energy_total >= 0.0 && self.energy_total.is_finite()) {
            return bad(format!("E_total must be non-negative, got {}", self.energy_total));
        }
        if let Some(adj) = &self.adjacency {
            if adj.len() != m || adj.iter().any(|r| r.len() != self.num_sensors) {
                return bad(format!("adjacency must be {m} x {}", self.num_sensors));
            }
        }
        if let Some(g) = &self.gains {
            if g.obs.len() != self.horizon || g.channel.len() != self.horizon {
                return bad(format!("gains must have K = {} rows", self.horizon));
            }
            if g.obs.iter().any(|r| r.len() != self.num_sensors) || g.channel.iter().any(|r| r.len() != m) {
                return bad("gain rows must have lengths N (obs) and M (channel)".into());
            }
        }
        Ok(())
    }

    fn realize(&self) -> Result<(CollaborationTopology, Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        self.validate()?;
        let n = self.num_sensors;
        let m = self.transmitters();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let positions = deploy_uniform(n, &mut rng);
        let topology = match &self.adjacency {
            Some(rows) => CollaborationTopology::from_rows(rows)?,
            None => CollaborationTopology::from_positions(&positions, self.d, m),
        };
        let (obs, channel) = match &self.gains {
            Some(g) => (
                g.obs.iter().map(|r| DVector::from_column_slice(r)).collect(),
                g.channel.iter().map(|r| DVector::from_column_slice(r)).collect(),
            ),
            None => draw_uniform_gains(self.horizon, n, m, &mut rng),
        };
        Ok((topology, obs, channel))
    }

    /// Assemble the instance; budgets are `E_m = E_total / M`.
    pub fn build(&self) -> Result<ProblemInstance> {
        let (topology, obs, channel) = self.realize()?;
        let m = topology.num_transmitters();
        assemble_instance(
            topology,
            self.horizon,
            &GainsSource::Explicit { obs, channel },
            self.noise(),
            self.rho_corr.into(),
            DVector::from_element(m, self.energy_total / m as f64),
        )
    }

    /// Copy of this configuration with the realized adjacency and gains written out.
    pub fn to_explicit(&self) -> Result<Self> {
        let (topology, obs, channel) = self.realize()?;
        let mut out = self.clone();
        out.adjacency = Some(topology.to_rows());
        out.gains = Some(ExplicitGains {
            obs: obs.iter().map(|v| v.iter().copied().collect()).collect(),
            channel: channel.iter().map(|v| v.iter().copied().collect()).collect(),
        });
        Ok(out)
    }
}
