//! Problem instances: collaboration topologies, gain traces, priors and the derived
//! quadratic forms used by every solver.

mod config;
mod instance;
mod topology;

pub use config::{ExplicitGains, InstanceConfig, RhoCorr, Uncorrelated};
pub use instance::{
    assemble_instance, draw_uniform_gains, ou_covariance, CorrelationSpec, GainsSource, NoiseSpec,
    ProblemInstance,
};
pub use topology::{deploy_uniform, generate_rgg, CollaborationTopology, Link};
