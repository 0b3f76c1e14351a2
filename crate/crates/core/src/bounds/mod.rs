//! Fundamental bounds posed as quadratically constrained quadratic programs:
//! a lower bound on Q (optionally with TM radiation only), an upper bound on
//! realized gain of a matched antenna, and an upper bound on the power
//! absorbed in a fixed lossy region.

mod pencil;
mod power;
mod q;
mod qcqp;

pub use pencil::{hermitian_pencil_eig, hermitian_pencil_max_eig, hermitian_pencil_min_eig, DEFLATION_TOL};
pub use power::{
    absorbed_power_bound, absorbed_power_problem, realized_gain_bound, realized_gain_problem, tuned_gain_bound,
};
pub use q::{q_lower_bound, q_problem, resonant_min};
pub use qcqp::{solve_dual, DualSolution, QuadForm, Qcqp, RESIDUAL_TOL};

use serde::Serialize;

use crate::linalg::{CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Q,
    QTm,
    RealizedGain,
    AbsorbedPower,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Q => "q",
            BoundKind::QTm => "q_tm",
            BoundKind::RealizedGain => "realized_gain",
            BoundKind::AbsorbedPower => "absorbed_power",
        }
    }

    /// True when the bound is an upper bound (maximized metric).
    pub fn is_upper(&self) -> bool {
        matches!(self, BoundKind::RealizedGain | BoundKind::AbsorbedPower)
    }
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    pub kind: BoundKind,
    pub value: f64,
    /// Optimal current over all N DOF.
    pub current: CVec,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    /// Relative constraint violations at the returned current.
    pub residuals: Vec<f64>,
    /// Set when the Q dual never changed sign: no resonant current exists and
    /// `value` is the unconstrained minimum.
    pub no_resonance: bool,
}

/// A bound problem in reduced coordinates x together with the affine map
/// I = P x + q back to full currents.
#[derive(Debug, Clone)]
pub struct BoundProblem {
    pub kind: BoundKind,
    pub qcqp: Qcqp,
    pub p: CMat,
    pub q: CVec,
    /// Fully determined problems (no free coordinates) skip the constraints.
    pub determined: bool,
}

impl BoundProblem {
    pub fn current(&self, x: &CVec) -> CVec {
        &self.p * x + &self.q
    }

    pub fn dim(&self) -> usize {
        self.p.ncols()
    }
}
