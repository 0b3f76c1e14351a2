use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{Meta, OperatorBundle};

use super::C0;

/// Series RLC cells coupled to their nearest neighbours by a mutual
/// inductance. Cell 0 carries a unit-volt source and is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct RlcLadder {
    pub resistance: Vec<f64>,
    pub inductance: Vec<f64>,
    pub capacitance: Vec<f64>,
    /// Mutual inductance between neighbouring cells, H.
    pub coupling: f64,
    pub frequency: f64,
}

impl RlcLadder {
    pub fn uniform(n: usize, r: f64, l: f64, c: f64, coupling: f64, frequency: f64) -> Self {
        RlcLadder {
            resistance: vec![r; n],
            inductance: vec![l; n],
            capacitance: vec![c; n],
            coupling,
            frequency,
        }
    }

    /// Frequency at which a cell with the given L and C resonates.
    pub fn resonance(l: f64, c: f64) -> f64 {
        1.0 / (2.0 * PI * (l * c).sqrt())
    }
}

pub fn gen_rlc_ladder(p: &RlcLadder) -> Result<OperatorBundle> {
    let n = p.resistance.len();
    if n == 0 || p.inductance.len() != n || p.capacitance.len() != n {
        return Err(Error::Domain("ladder needs n >= 1 cells with R, L, C each".into()));
    }
    let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
    if !positive(&p.resistance) || !positive(&p.inductance) || !positive(&p.capacitance) {
        return Err(Error::Domain("element values must be positive".into()));
    }
    if !(p.frequency > 0.0) || p.coupling < 0.0 || !p.coupling.is_finite() {
        return Err(Error::Domain("frequency must be > 0 and coupling >= 0".into()));
    }
    let omega = 2.0 * PI * p.frequency;

    let mut r0 = CMat::zeros(n, n);
    let mut x = CMat::zeros(n, n);
    let mut w = CMat::zeros(n, n);
    for i in 0..n {
        let (l, c) = (p.inductance[i], p.capacitance[i]);
        r0[(i, i)] = C64::new(p.resistance[i], 0.0);
        x[(i, i)] = C64::new(omega * l - 1.0 / (omega * c), 0.0);
        // ω ∂X/∂ω of ωL - 1/(ωC)
        w[(i, i)] = C64::new(omega * l + 1.0 / (omega * c), 0.0);
        if i + 1 < n {
            let m = C64::new(omega * p.coupling, 0.0);
            x[(i, i + 1)] = m;
            x[(i + 1, i)] = m;
            w[(i, i + 1)] = m;
            w[(i + 1, i)] = m;
        }
    }
    let z = &r0 + &x * C64::new(0.0, 1.0);
    let mut v = CVec::zeros(n);
    v[0] = C64::new(1.0, 0.0);
    let mut fixed = vec![false; n];
    fixed[0] = true;
    let controllable = fixed.iter().map(|&f| !f).collect();

    Ok(OperatorBundle {
        z,
        r0,
        x,
        w: Some(w),
        r_rho: None,
        far_field: Vec::new(),
        excitations: vec![v],
        tm_projector: None,
        fixed,
        controllable,
        chip: None,
        meta: Meta {
            frequency: p.frequency,
            wavenumber: omega / C0,
            radius: 0.0,
        },
    })
}
