use super::q::resonant_min;
use super::qcqp::{solve_dual, QuadForm, Qcqp};
use super::{BoundKind, BoundProblem, BoundResult};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, inverse_with_cond, quad_form, submatrix, subvector, CMat, CVec, C64};
use crate::model::{mask_indices, OperatorBundle};
use crate::reanalysis::COND_LIMIT;

/// The real and imaginary parts of IᴴZI = IᴴV as two quadratic forms in I.
fn power_constraints(bundle: &OperatorBundle, v: &CVec) -> [QuadForm; 2] {
    let half = C64::new(0.5, 0.0);
    [
        QuadForm::new(bundle.total_resistance(), -v * half, 0.0),
        QuadForm::new(bundle.x.clone(), v * C64::new(0.0, 0.5), 0.0),
    ]
}

fn excitation(bundle: &OperatorBundle, index: usize) -> Result<&CVec> {
    bundle
        .excitations
        .get(index)
        .ok_or_else(|| Error::Config(format!("excitation index {index} out of range")))
}

/// Orthonormal basis of the orthogonal complement of v.
fn complement_basis(v: &CVec) -> CMat {
    let n = v.len();
    let vv = v.dotc(v);
    let proj = CMat::identity(n, n) - v * v.adjoint() / vv;
    let (vals, vecs) = hermitian_eigen(&proj);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    CMat::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])])
}

/// |fᵀI|² as a Hermitian form: Iᴴ (f̄ fᵀ) I.
fn field_form(f: &CVec) -> CMat {
    let fc = f.conjugate();
    &fc * fc.adjoint()
}

/// Matched realized gain problem: maximize |F·I|² subject to IᴴZI = IᴴV and
/// VᴴI = VᴴV / Z₀, parametrized as I = V/Z₀ + N t with N spanning V⊥.
pub fn realized_gain_problem(
    bundle: &OperatorBundle,
    field_index: usize,
    z0: C64,
    excitation_index: usize,
) -> Result<BoundProblem> {
    let f = bundle
        .far_field
        .get(field_index)
        .ok_or_else(|| Error::Missing(format!("realized gain bound requires far-field row {field_index}")))?;
    let v = excitation(bundle, excitation_index)?;
    if !(v.norm() > 0.0) {
        return Err(Error::Config("excitation vector is zero".into()));
    }
    if !(z0.norm() > 0.0) {
        return Err(Error::Config("reference impedance must be nonzero".into()));
    }
    let q = v / z0;
    let p = complement_basis(v);
    let [c1, c2] = power_constraints(bundle, v);
    let objective = QuadForm::homogeneous(field_form(f));
    Ok(BoundProblem {
        kind: BoundKind::RealizedGain,
        qcqp: Qcqp {
            objective: objective.compose(&p, &q),
            constraints: [c1.compose(&p, &q), c2.compose(&p, &q)],
        },
        determined: p.ncols() == 0,
        p,
        q,
    })
}

fn gain_of(bundle: &OperatorBundle, f: &CVec, current: &CVec) -> f64 {
    f.dot(current).norm_sqr() / quad_form(&bundle.total_resistance(), current).re
}

fn finish(problem: &BoundProblem, value_of: impl Fn(&CVec) -> f64) -> Result<BoundResult> {
    if problem.determined {
        let current = problem.q.clone();
        return Ok(BoundResult {
            kind: problem.kind,
            value: value_of(&current),
            current,
            multipliers: Vec::new(),
            iterations: 0,
            residuals: Vec::new(),
            no_resonance: false,
        });
    }
    let sol = solve_dual(&problem.qcqp)?;
    let current = problem.current(&sol.x);
    let value = value_of(&current);
    if !value.is_finite() {
        return Err(Error::Solver("bound value is not finite".into()));
    }
    Ok(BoundResult {
        kind: problem.kind,
        value,
        current,
        multipliers: vec![sol.alpha, sol.beta],
        iterations: sol.iterations,
        residuals: sol.residuals.to_vec(),
        no_resonance: false,
    })
}

/// Upper bound on the realized gain of a matched design (Γ = 0), reported as
/// G = |F·I|² / Iᴴ(R₀+Rρ)I at the optimal current.
pub fn realized_gain_bound(
    bundle: &OperatorBundle,
    field_index: usize,
    z0: C64,
    excitation_index: usize,
) -> Result<BoundResult> {
    let problem = realized_gain_problem(bundle, field_index, z0, excitation_index)?;
    let f = &bundle.far_field[field_index];
    finish(&problem, |i| gain_of(bundle, f, i))
}

/// Largest gain of a self-resonant current, without the matching constraint:
/// max |F·I|² / Iᴴ(R₀+Rρ)I subject to IᴴXI = 0.
pub fn tuned_gain_bound(bundle: &OperatorBundle, field_index: usize) -> Result<BoundResult> {
    let f = bundle
        .far_field
        .get(field_index)
        .ok_or_else(|| Error::Missing(format!("no far-field row {field_index}")))?;
    let r = bundle.total_resistance();
    let sol = resonant_min(&-field_form(f), &r, &bundle.x)?;
    let norm = quad_form(&r, &sol.v).re;
    Ok(BoundResult {
        kind: BoundKind::RealizedGain,
        value: gain_of(bundle, f, &sol.v),
        residuals: vec![(norm - 1.0).abs(), quad_form(&bundle.x, &sol.v).re.abs() / norm],
        current: sol.v,
        multipliers: vec![sol.nu],
        iterations: sol.iterations,
        no_resonance: sol.no_resonance,
    })
}

/// Chip (uncontrollable) currents eliminated through the chip rows of
/// Z I = V: I_u = Z_uu⁻¹(V_u − Z_uc I_c). The remaining free variables are
/// the currents on every non-chip DOF.
pub fn absorbed_power_problem(bundle: &OperatorBundle, excitation_index: usize) -> Result<BoundProblem> {
    let r_rho = bundle
        .r_rho
        .as_ref()
        .ok_or_else(|| Error::Missing("absorbed power bound requires R_rho".into()))?;
    let chip = bundle
        .chip
        .as_ref()
        .ok_or_else(|| Error::Missing("absorbed power bound requires a chip mask".into()))?;
    let v = excitation(bundle, excitation_index)?;
    let n = bundle.n_dof();
    let u = mask_indices(chip);
    let c: Vec<usize> = (0..n).filter(|&i| !chip[i]).collect();

    let mut objective = CMat::zeros(n, n);
    for &a in &u {
        for &b in &u {
            objective[(a, b)] = r_rho[(a, b)] * C64::new(0.5, 0.0);
        }
    }
    let mut p = CMat::zeros(n, c.len());
    let mut q = CVec::zeros(n);
    if !u.is_empty() {
        let (zuu_inv, cond) = inverse_with_cond(&submatrix(&bundle.z, &u, &u))
            .ok_or_else(|| Error::Domain("chip block Z_uu is singular".into()))?;
        if cond > COND_LIMIT {
            return Err(Error::Domain(format!("chip block Z_uu condition estimate {cond:.3e}")));
        }
        let coupling = -(&zuu_inv * submatrix(&bundle.z, &u, &c));
        let forced = &zuu_inv * subvector(v, &u);
        for (k, &i) in u.iter().enumerate() {
            for j in 0..c.len() {
                p[(i, j)] = coupling[(k, j)];
            }
            q[i] = forced[k];
        }
    }
    for (j, &i) in c.iter().enumerate() {
        p[(i, j)] = C64::new(1.0, 0.0);
    }
    let [c1, c2] = power_constraints(bundle, v);
    Ok(BoundProblem {
        kind: BoundKind::AbsorbedPower,
        qcqp: Qcqp {
            objective: QuadForm::homogeneous(objective).compose(&p, &q),
            constraints: [c1.compose(&p, &q), c2.compose(&p, &q)],
        },
        determined: c.is_empty() || u.is_empty(),
        p,
        q,
    })
}

/// Upper bound on the power dissipated in the chip region.
pub fn absorbed_power_bound(bundle: &OperatorBundle, excitation_index: usize) -> Result<BoundResult> {
    let problem = absorbed_power_problem(bundle, excitation_index)?;
    let r_rho = bundle.r_rho.as_ref().expect("checked by the problem builder");
    let chip = bundle.chip_indices();
    finish(&problem, |i| {
        let ic = subvector(i, &chip);
        0.5 * quad_form(&submatrix(r_rho, &chip, &chip), &ic).re
    })
}
