use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sensor_collab::formulation::Layout;
use sensor_collab::model::InstanceConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Per-iteration objectives from one or more initial points; grid values are start indices.
    ConvergenceTrace,
    /// Grid values are `rho_corr`.
    CorrelationSweep,
    /// Grid values are `E_total`.
    EnergySweep,
    /// Grid values are the collaboration radius `d`.
    RadiusSweep,
    /// Grid values are `d`; also fits the growth of wall time in the number of links.
    TimingSweep,
    /// Grid values are start indices.
    SingleSolve,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::ConvergenceTrace => "convergence_trace",
            Scenario::CorrelationSweep => "correlation_sweep",
            Scenario::EnergySweep => "energy_sweep",
            Scenario::RadiusSweep => "radius_sweep",
            Scenario::TimingSweep => "timing_sweep",
            Scenario::SingleSolve => "single_solve",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| CliError::Config(format!("unknown scenario `{s}`")))
    }

    /// Whether grid values select the solver's initial point rather than an instance parameter.
    pub fn grid_is_start(self) -> bool {
        matches!(self, Scenario::ConvergenceTrace | Scenario::SingleSolve)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// CCP on the problem that ignores temporal correlation.
    Ccp,
    /// Penalty CCP with ADMM on the correlated problem.
    Pccp,
    CcpTimeInvariant,
    PccpTimeInvariant,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Ccp,
        Algorithm::Pccp,
        Algorithm::CcpTimeInvariant,
        Algorithm::PccpTimeInvariant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ccp => "ccp",
            Algorithm::Pccp => "pccp",
            Algorithm::CcpTimeInvariant => "ccp_time_invariant",
            Algorithm::PccpTimeInvariant => "pccp_time_invariant",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown algorithm `{s}`")))
    }

    pub fn layout(self) -> Layout {
        match self {
            Algorithm::Ccp | Algorithm::Pccp => Layout::TimeVarying,
            Algorithm::CcpTimeInvariant | Algorithm::PccpTimeInvariant => Layout::TimeInvariant,
        }
    }

    pub fn is_penalty(self) -> bool {
        matches!(self, Algorithm::Pccp | Algorithm::PccpTimeInvariant)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_trials() -> usize {
    1000
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Ccp, Algorithm::Pccp]
}

/// Experiment description: the instance document plus scenario fields.
///
/// The instance `seed` fixes topology and gains for every grid point; it also seeds the
/// Monte Carlo draws, so all grid points share their random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(flatten)]
    pub instance: InstanceConfig,
    pub grid: Vec<f64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    #[serde(default)]
    pub gnuplot: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, instance: InstanceConfig, grid: Vec<f64>) -> Self {
        Self {
            scenario,
            instance,
            grid,
            algorithms: default_algorithms(),
            trials: default_trials(),
            output: None,
            gnuplot: false,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> u64 {
        self.instance.seed
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.instance.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.grid.is_empty() {
            return bad("grid must not be empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        for &g in &self.grid {
            let ok = match self.scenario {
                Scenario::ConvergenceTrace | Scenario::SingleSolve => g >= 0.0 && g.fract() == 0.0,
                Scenario::CorrelationSweep => g > 0.0 && g.is_finite(),
                Scenario::EnergySweep => g >= 0.0 && g.is_finite(),
                Scenario::RadiusSweep | Scenario::TimingSweep => g > 0.0 && g <= std::f64::consts::SQRT_2,
            };
            if !ok {
                return bad(format!("grid value {g} is not valid for scenario {}", self.scenario));
            }
        }
        Ok(())
    }

    /// Instance parameters at one grid point.
    pub fn instance_at(&self, grid_value: f64) -> InstanceConfig {
        let mut cfg = self.instance.clone();
        match self.scenario {
            Scenario::CorrelationSweep => cfg.rho_corr = sensor_collab::model::RhoCorr::Rate(grid_value),
            Scenario::EnergySweep => cfg.energy_total = grid_value,
            Scenario::RadiusSweep | Scenario::TimingSweep => cfg.d = grid_value,
            Scenario::ConvergenceTrace | Scenario::SingleSolve => {}
        }
        cfg
    }

    /// Random-number stream of the solver's initial point at one grid point.
    pub fn start_stream(&self, grid_value: f64) -> u64 {
        if self.scenario.grid_is_start() {
            grid_value as u64
        } else {
            0
        }
    }
}
