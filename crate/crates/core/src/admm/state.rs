use nalgebra::{DMatrix, DVector};

use crate::pccp::PenalizedSdp;

/// Primal variables `(w, p, V, {U_k}, {Z_k})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSet {
    pub w: DVector<f64>,
    pub p: DVector<f64>,
    pub v: DMatrix<f64>,
    pub u: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
}

impl PrimalSet {
    /// `w = 1, p = 1, V = I, U_k = Z_k = I`.
    pub fn initial(sdp: &PenalizedSdp<'_>) -> Self {
        let k_len = sdp.horizon();
        let l = sdp.num_links();
        Self {
            w: DVector::from_element(sdp.dim(), 1.0),
            p: DVector::from_element(k_len, 1.0),
            v: DMatrix::identity(k_len, k_len),
            u: vec![DMatrix::identity(l, l); k_len],
            z: vec![DMatrix::identity(l, l); k_len],
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.w.norm()
            + self.p.norm()
            + self.v.norm()
            + self.u.iter().map(DMatrix::norm).sum::<f64>()
            + self.z.iter().map(DMatrix::norm).sum::<f64>()
    }
}

/// Cone-constrained slack variables.
///
/// Each `lambda[m]` stores the second-order-cone slack restricted to the links that transmitter
/// `m` pays for, followed by the cone's scalar coordinate; the remaining coordinates of the full
/// slack are identically zero and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackSet {
    pub lambda: Vec<DVector<f64>>,
    /// `2K x 2K`.
    pub big: DMatrix<f64>,
    /// `(N+1) x (N+1)` per step.
    pub info: Vec<DMatrix<f64>>,
    /// `(L+1) x (L+1)` per step.
    pub lift: Vec<DMatrix<f64>>,
    /// `L x L` per step.
    pub dc: Vec<DMatrix<f64>>,
}

impl SlackSet {
    pub fn zeros(sdp: &PenalizedSdp<'_>) -> Self {
        let k_len = sdp.horizon();
        let l = sdp.num_links();
        let n = sdp.num_sensors();
        Self {
            lambda: (0..sdp.num_transmitters())
                .map(|m| DVector::zeros(sdp.energy_support(m).len() + 1))
                .collect(),
            big: DMatrix::zeros(2 * k_len, 2 * k_len),
            info: vec![DMatrix::zeros(n + 1, n + 1); k_len],
            lift: vec![DMatrix::zeros(l + 1, l + 1); k_len],
            dc: vec![DMatrix::zeros(l, l); k_len],
        }
    }

    /// Sum of the Frobenius norms of all blocks.
    pub fn norm_sum(&self) -> f64 {
        self.lambda.iter().map(|v| v.norm()).sum::<f64>()
            + self.big.norm()
            + self.info.iter().map(DMatrix::norm).sum::<f64>()
            + self.lift.iter().map(DMatrix::norm).sum::<f64>()
            + self.dc.iter().map(DMatrix::norm).sum::<f64>()
    }

    /// Sum of blockwise Frobenius distances to `other`.
    pub fn distance(&self, other: &SlackSet) -> f64 {
        fn mats(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum()
        }
        self.lambda.iter().zip(&other.lambda).map(|(x, y)| (x - y).norm()).sum::<f64>()
            + (&self.big - &other.big).norm()
            + mats(&self.info, &other.info)
            + mats(&self.lift, &other.lift)
            + mats(&self.dc, &other.dc)
    }
}

/// Dual variables; shapes mirror [`SlackSet`].
pub type DualSet = SlackSet;

/// Full ADMM iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub primal: PrimalSet,
    pub slack: SlackSet,
    pub dual: DualSet,
}

impl AdmmState {
    pub fn initial(sdp: &PenalizedSdp<'_>) -> Self {
        Self {
            primal: PrimalSet::initial(sdp),
            slack: SlackSet::zeros(sdp),
            dual: SlackSet::zeros(sdp),
        }
    }

    /// Keep the primal iterate, reset slack and dual variables.
    pub fn primal_warm(sdp: &PenalizedSdp<'_>, primal: PrimalSet) -> Self {
        Self {
            primal,
            slack: SlackSet::zeros(sdp),
            dual: SlackSet::zeros(sdp),
        }
    }
}
