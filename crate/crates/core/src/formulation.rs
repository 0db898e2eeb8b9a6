//! Decision-variable layouts.
//!
//! A [`Formulation`] maps the per-step blocks `w_k` onto a solver variable. In the
//! time-varying layout every step owns its block (`K L` entries); in the time-invariant layout
//! all steps share one length-`L` block, which imposes `w_1 = ... = w_K`.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::estimator::CollaborationPlan;
use crate::model::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    TimeVarying,
    TimeInvariant,
}

#[derive(Debug, Clone, Copy)]
pub struct Formulation<'a> {
    instance: &'a ProblemInstance,
    layout: Layout,
}

impl<'a> Formulation<'a> {
    pub fn new(instance: &'a ProblemInstance, layout: Layout) -> Self {
        Self { instance, layout }
    }

    pub fn time_varying(instance: &'a ProblemInstance) -> Self {
        Self::new(instance, Layout::TimeVarying)
    }

    pub fn instance(&self) -> &'a ProblemInstance {
        self.instance
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn num_links(&self) -> usize {
        self.instance.num_links()
    }

    pub fn horizon(&self) -> usize {
        self.instance.horizon()
    }

    /// Length of the solver's collaboration variable.
    pub fn dim(&self) -> usize {
        match self.layout {
            Layout::TimeVarying => self.horizon() * self.num_links(),
            Layout::TimeInvariant => self.num_links(),
        }
    }

    /// Offset of `w_k` inside the solver variable.
    pub fn offset(&self, k: usize) -> usize {
        match self.layout {
            Layout::TimeVarying => k * self.num_links(),
            Layout::TimeInvariant => 0,
        }
    }

    pub fn block<'v>(&self, w: &'v DVector<f64>, k: usize) -> DVectorView<'v, f64> {
        w.rows(self.offset(k), self.num_links())
    }

    /// Energy form of transmitter `m` on the solver variable: `blkdiag{Q_{k,m}}` or
    /// `sum_k Q_{k,m}`.
    pub fn energy_matrix(&self, m: usize) -> DMatrix<f64> {
        let l = self.num_links();
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for k in 0..self.horizon() {
            let o = self.offset(k);
            let mut view = out.view_mut((o, o), (l, l));
            view += self.instance.energy_form(k, m);
        }
        out
    }

    /// Full collaboration plan for the solver variable `w`.
    pub fn expand(&self, w: &DVector<f64>) -> Result<CollaborationPlan> {
        check_dim("solver variable", self.dim(), w.len())?;
        let l = self.num_links();
        let k_len = self.horizon();
        let mut full = DVector::zeros(k_len * l);
        for k in 0..k_len {
            full.rows_mut(k * l, l).copy_from(&self.block(w, k));
        }
        CollaborationPlan::new(k_len, l, full)
    }
}

/// Time-invariant view of `instance`: one collaboration block shared by all time steps.
pub fn time_invariant_reduction(instance: &ProblemInstance) -> Formulation<'_> {
    Formulation::new(instance, Layout::TimeInvariant)
}
