//! Solver outcomes shared by CCP, penalty CCP and ADMM.

use std::fmt;

use serde::Serialize;

use crate::estimator::CollaborationPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// A subproblem or line search could not make progress; the best iterate is returned.
    Stalled,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::Stalled => "stalled",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of an iterative solve: the final plan, the per-iteration trace and timing.
///
/// `R` is the algorithm's trace row; every row type serializes to one CSV record.
#[derive(Debug, Clone)]
pub struct SolveReport<R> {
    pub plan: CollaborationPlan,
    /// Objective reported by the algorithm at its final iterate.
    pub objective: f64,
    pub trace: Vec<R>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub wall_ms: f64,
}

impl<R> SolveReport<R> {
    pub fn objectives(&self) -> Vec<f64>
    where
        R: TraceRow,
    {
        self.trace.iter().map(TraceRow::objective).collect()
    }
}

/// A per-iteration record carrying the tracked objective.
pub trait TraceRow {
    fn objective(&self) -> f64;
}

pub(crate) fn elapsed_ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
