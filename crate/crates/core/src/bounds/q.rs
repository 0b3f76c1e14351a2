use super::pencil::{hermitian_pencil_eig, isotropic_mix};
use super::{BoundKind, BoundProblem, BoundResult, QuadForm, Qcqp};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, CMat, CVec, C64};
use crate::model::OperatorBundle;

/// |h(ν)| accepted as resonant, relative to vᴴBv = 1.
const RESONANCE_TOL: f64 = 1e-9;
const NU_LIMIT: f64 = 1e12;

/// Result of min vᴴAv subject to vᴴBv = 1 and vᴴXv = 0.
#[derive(Debug, Clone)]
pub struct ResonantMin {
    pub value: f64,
    pub v: CVec,
    pub nu: f64,
    pub iterations: usize,
    pub no_resonance: bool,
}

struct Sample {
    lambda: f64,
    h: f64,
    vals: Vec<f64>,
    vecs: CMat,
}

fn sample(a: &CMat, x: &CMat, b: &CMat, nu: f64) -> Result<Sample> {
    let (vals, vecs) = hermitian_pencil_eig(&(a + x * C64::new(nu, 0.0)), b)?;
    let v = vecs.column(0).into_owned();
    Ok(Sample { lambda: vals[0], h: quad_form(x, &v).re, vals, vecs })
}

/// Dual of min vᴴAv s.t. vᴴBv = 1, vᴴXv = 0: maximize the concave
/// g(ν) = λ_min(A + νX, B), whose slope is h(ν) = vᴴXv for the minimizing
/// eigenvector. The sign change of h is bracketed by doubling and bisected.
pub fn resonant_min(a: &CMat, b: &CMat, x: &CMat) -> Result<ResonantMin> {
    let s0 = sample(a, x, b, 0.0)?;
    let done = |s: &Sample, nu: f64, iterations: usize| ResonantMin {
        value: s.lambda,
        v: s.vecs.column(0).into_owned(),
        nu,
        iterations,
        no_resonance: false,
    };
    if s0.h.abs() <= RESONANCE_TOL {
        return Ok(done(&s0, 0.0, 0));
    }
    // g increases in the direction of sign(h)
    let dir = s0.h.signum();
    let (mut lo, mut hi) = (0.0, dir);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let s = sample(a, x, b, hi)?;
        if s.h.abs() <= RESONANCE_TOL {
            return Ok(done(&s, hi, iterations));
        }
        if s.h.signum() != dir {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi.abs() > NU_LIMIT {
            return Ok(ResonantMin {
                value: s0.lambda,
                v: s0.vecs.column(0).into_owned(),
                nu: 0.0,
                iterations,
                no_resonance: true,
            });
        }
    }
    // invariant: h(lo) has sign dir, h(hi) has the opposite sign
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let s = sample(a, x, b, mid)?;
        if s.h.abs() <= RESONANCE_TOL {
            return Ok(done(&s, mid, iterations));
        }
        if mid == lo || mid == hi || (hi - lo).abs() <= 1e-15 * mid.abs().max(1e-300) {
            // the two lowest eigenvectors cross here: combine them into a resonant one
            return degenerate(x, &s, mid, iterations);
        }
        if s.h.signum() == dir {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

fn degenerate(x: &CMat, s: &Sample, nu: f64, iterations: usize) -> Result<ResonantMin> {
    if s.vals.len() < 2 {
        return Err(Error::Solver("resonance bracket collapsed on a simple eigenvalue".into()));
    }
    let v1 = s.vecs.column(0).into_owned();
    let v2 = s.vecs.column(1).into_owned();
    let xv2 = x * &v2;
    let h12 = v1.dotc(&xv2);
    let (c1, c2) = isotropic_mix(quad_form(x, &v1).re, h12, v2.dotc(&xv2).re)
        .ok_or_else(|| Error::Solver("degenerate resonance without an isotropic mixture".into()))?;
    let v = v1 * c1 + v2 * c2;
    Ok(ResonantMin {
        value: 0.5 * (s.vals[0] + s.vals[1]),
        v,
        nu,
        iterations,
        no_resonance: false,
    })
}

fn q_operators(bundle: &OperatorBundle, tm: bool) -> Result<(CMat, CMat)> {
    let w = bundle
        .w
        .clone()
        .ok_or_else(|| Error::Missing("Q bound requires the W matrix".into()))?;
    let r0 = if tm {
        let u = bundle
            .tm_projector
            .as_ref()
            .ok_or_else(|| Error::Missing("TM bound requires the TM projector (TMPR section)".into()))?;
        u.adjoint() * u
    } else {
        bundle.r0.clone()
    };
    Ok((w, r0))
}

/// min IᴴWI s.t. IᴴR₀I = 1, IᴴXI = 0, in full coordinates.
pub fn q_problem(bundle: &OperatorBundle, tm: bool) -> Result<BoundProblem> {
    let (w, r0) = q_operators(bundle, tm)?;
    let n = bundle.n_dof();
    Ok(BoundProblem {
        kind: if tm { BoundKind::QTm } else { BoundKind::Q },
        qcqp: Qcqp {
            objective: QuadForm::homogeneous(-w),
            constraints: [
                QuadForm::new(r0, CVec::zeros(n), -1.0),
                QuadForm::homogeneous(bundle.x.clone()),
            ],
        },
        p: CMat::identity(n, n),
        q: CVec::zeros(n),
        determined: false,
    })
}

/// Lower bound on Q over all currents on the bundle's DOF.
///
/// Q_lb = ½ min IᴴWI over IᴴR₀I = 1, IᴴXI = 0; the ½ matches the Q
/// evaluation ½IᴴWI/IᴴR₀I of a resonant current.
pub fn q_lower_bound(bundle: &OperatorBundle, tm: bool) -> Result<BoundResult> {
    let (w, r0) = q_operators(bundle, tm)?;
    let sol = resonant_min(&w, &r0, &bundle.x)?;
    let norm = quad_form(&r0, &sol.v).re;
    let resonance = quad_form(&bundle.x, &sol.v).re.abs() / norm.max(f64::MIN_POSITIVE);
    let value = if sol.no_resonance {
        0.5 * sol.value
    } else {
        0.5 * quad_form(&w, &sol.v).re / norm
    };
    Ok(BoundResult {
        kind: if tm { BoundKind::QTm } else { BoundKind::Q },
        value,
        current: sol.v,
        multipliers: vec![sol.nu],
        iterations: sol.iterations,
        residuals: vec![(norm - 1.0).abs(), resonance],
        no_resonance: sol.no_resonance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opgen::{gen_random_passive, gen_rlc_ladder, RandomPassive, RlcLadder};

    #[test]
    fn scalar_case() {
        let b = gen_rlc_ladder(&RlcLadder::uniform(1, 3.0, 2e-6, 5e-12, 0.0, RlcLadder::resonance(2e-6, 5e-12))).unwrap();
        let r = q_lower_bound(&b, false).unwrap();
        let w = b.w.as_ref().unwrap()[(0, 0)].re;
        assert!((r.value - w / 6.0).abs() <= 1e-12 * r.value);
        assert!(!r.no_resonance);
    }

    #[test]
    fn forced_ratio_bound_is_one() {
        let mut b = gen_random_passive(&RandomPassive::new(6, 3));
        b.w = Some(&b.r0 * C64::new(2.0, 0.0));
        let r = q_lower_bound(&b, false).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
        assert!(r.residuals[1] <= 1e-8);
    }

    #[test]
    fn definite_reactance_has_no_resonance() {
        let mut b = gen_random_passive(&RandomPassive::new(4, 3));
        b.x = b.r0.clone();
        let r = q_lower_bound(&b, false).unwrap();
        assert!(r.no_resonance);
    }

    #[test]
    fn optimal_current_is_normalized_and_resonant() {
        for seed in 0..10 {
            let b = gen_random_passive(&RandomPassive::new(8, seed));
            let r = q_lower_bound(&b, false).unwrap();
            assert!((quad_form(&b.r0, &r.current).re - 1.0).abs() <= 1e-10);
            assert!(r.residuals[1] <= 1e-8);
        }
    }

    #[test]
    fn tm_bound_needs_projector() {
        let b = gen_random_passive(&RandomPassive::new(4, 3));
        assert!(matches!(q_lower_bound(&b, true), Err(Error::Missing(_))));
    }
}
