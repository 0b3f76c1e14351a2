//! Brute-force reference computations. None of them reuses the incremental
//! kernel, the candidate batches or the bound solvers they are used to check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bounds::{BoundKind, BoundProblem, QuadForm};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, scatter, submatrix, subvector, CMat, CVec, C64};
use crate::model::{materialize, ObjectiveSpec, OperatorBundle, Word};
use crate::objectives::Evaluator;

pub const DENSE_SOLVE_MAX_DOF: usize = 512;
pub const ENUMERATION_MAX_BITS: usize = 20;
pub const SAMPLER_MAX_DOF: usize = 16;

/// Full-length current of a word by direct LU solve of Z[S,S] I = V[S].
pub fn dense_solve(bundle: &OperatorBundle, word: &Word, excitation_index: usize) -> Result<CVec> {
    if bundle.n_dof() > DENSE_SOLVE_MAX_DOF {
        return Err(Error::Config(format!("dense oracle limited to {DENSE_SOLVE_MAX_DOF} DOF")));
    }
    let v = bundle
        .excitations
        .get(excitation_index)
        .ok_or_else(|| Error::Config(format!("excitation index {excitation_index} out of range")))?;
    let s = materialize(word, bundle)?;
    let lu = submatrix(&bundle.z, &s, &s).lu();
    let i = lu
        .solve(&subvector(v, &s))
        .filter(|i| i.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Infeasible("Z[S,S] is singular".into()))?;
    Ok(scatter(bundle.n_dof(), &s, &i))
}

/// Signed objective of a word from a dense solve; +∞ when singular.
pub fn dense_objective(bundle: &OperatorBundle, spec: &ObjectiveSpec, word: &Word) -> Result<f64> {
    let eval = Evaluator::new(bundle, spec)?;
    Ok(match dense_solve(bundle, word, spec.excitation_index) {
        Ok(i) => eval.value_full(&i),
        Err(Error::Infeasible(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    })
}

/// Global optimum over all 2^N_opt words; ties go to the lexicographically
/// lowest word string.
pub fn enumerate_optimum(bundle: &OperatorBundle, spec: &ObjectiveSpec) -> Result<(Word, f64)> {
    let n = bundle.n_opt();
    if n > ENUMERATION_MAX_BITS {
        return Err(Error::Config(format!("enumeration limited to {ENUMERATION_MAX_BITS} bits")));
    }
    let eval = Evaluator::new(bundle, spec)?;
    let mut best: Option<(Word, f64)> = None;
    for code in 0..(1u64 << n) {
        let w = Word::from_index(code, n);
        let f = match dense_solve(bundle, &w, spec.excitation_index) {
            Ok(i) => eval.value_full(&i),
            Err(Error::Infeasible(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let better = match &best {
            None => true,
            Some((bw, bf)) => f < *bf || (f == *bf && w.to_string() < bw.to_string()),
        };
        if better {
            best = Some((w, f));
        }
    }
    Ok(best.expect("at least one word"))
}

/// Objective values of all words, indexed by `Word::from_index` code.
pub fn enumerate_all(bundle: &OperatorBundle, spec: &ObjectiveSpec) -> Result<Vec<f64>> {
    let n = bundle.n_opt();
    if n > ENUMERATION_MAX_BITS {
        return Err(Error::Config(format!("enumeration limited to {ENUMERATION_MAX_BITS} bits")));
    }
    (0..(1u64 << n))
        .map(|code| dense_objective(bundle, spec, &Word::from_index(code, n)))
        .collect()
}

/// Eigenvalues of the pencil (A, B) with B positive definite, through a
/// hand-rolled Cholesky factor and a cyclic Jacobi sweep on the real
/// 2n×2n embedding of L⁻¹AL⁻ᴴ. Ascending.
pub fn pencil_eigenvalues_oracle(a: &CMat, b: &CMat) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 {
            return Err(Error::Domain("metric is not positive definite".into()));
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    // C = L⁻¹ A L⁻ᴴ by forward substitution on columns, then on rows
    let forward = |m: &CMat| {
        let mut out = m.clone();
        for c in 0..n {
            for i in 0..n {
                let mut s = out[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * out[(k, c)];
                }
                out[(i, c)] = s / l[(i, i)];
            }
        }
        out
    };
    let half = forward(a);
    let c = forward(&half.adjoint()).adjoint();
    let m = 2 * n;
    let mut s = vec![vec![0.0; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (c[(i, j)] + c[(j, i)].conj());
            s[i][j] = z.re;
            s[i + n][j + n] = z.re;
            s[i][j + n] = -z.im;
            s[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i][j] * s[i][j])
            .sum();
        if off < 1e-28 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if s[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..m {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = cs * skp - sn * skq;
                    s[k][q] = sn * skp + cs * skq;
                }
                for k in 0..m {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = cs * spk - sn * sqk;
                    s[q][k] = sn * spk + cs * sqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..m).map(|i| s[i][i]).collect();
    vals.sort_by(f64::total_cmp);
    // every eigenvalue appears twice in the real embedding
    Ok(vals.into_iter().step_by(2).collect())
}

/// Metric of a full current for a bound problem kind, in the bound's units.
pub fn bound_metric(bundle: &OperatorBundle, kind: BoundKind, field_index: usize, current: &CVec) -> f64 {
    match kind {
        BoundKind::Q | BoundKind::QTm => {
            let r0 = match (kind, &bundle.tm_projector) {
                (BoundKind::QTm, Some(u)) => u.adjoint() * u,
                _ => bundle.r0.clone(),
            };
            let w = bundle.w.as_ref().expect("Q problems carry W");
            0.5 * quad_form(w, current).re / quad_form(&r0, current).re
        }
        BoundKind::RealizedGain => {
            let f = &bundle.far_field[field_index];
            f.dot(current).norm_sqr() / quad_form(&bundle.total_resistance(), current).re
        }
        BoundKind::AbsorbedPower => {
            let chip = bundle.chip_indices();
            let r = bundle.r_rho.as_ref().expect("absorbed power carries R_rho");
            let ic = subvector(current, &chip);
            0.5 * quad_form(&submatrix(r, &chip, &chip), &ic).re
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Minimum-norm Gauss-Newton projection onto {g₁ = 0, g₂ = 0}.
fn project(cons: &[QuadForm; 2], mut x: CVec) -> Option<CVec> {
    let resid = |x: &CVec| {
        let g = [cons[0].eval(x), cons[1].eval(x)];
        let s = [cons[0].scale(x), cons[1].scale(x)];
        (g, (g[0] / s[0].max(1e-300)).abs().max((g[1] / s[1].max(1e-300)).abs()))
    };
    let (mut g, mut err) = resid(&x);
    for _ in 0..100 {
        if err <= 1e-12 {
            return Some(x);
        }
        let grads: Vec<CVec> = cons.iter().map(|c| (&c.a * &x + &c.b) * C64::new(2.0, 0.0)).collect();
        let gram = [
            [grads[0].dotc(&grads[0]).re, grads[0].dotc(&grads[1]).re],
            [grads[1].dotc(&grads[0]).re, grads[1].dotc(&grads[1]).re],
        ];
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        let lam = if det.abs() > 1e-14 * gram[0][0] * gram[1][1] {
            [
                (gram[1][1] * g[0] - gram[0][1] * g[1]) / det,
                (gram[0][0] * g[1] - gram[1][0] * g[0]) / det,
            ]
        } else {
            let k = if gram[0][0] >= gram[1][1] { 0 } else { 1 };
            let mut l = [0.0, 0.0];
            l[k] = g[k] / gram[k][k].max(1e-300);
            l
        };
        let step = &grads[0] * C64::new(lam[0], 0.0) + &grads[1] * C64::new(lam[1], 0.0);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let cand = &x - &step * C64::new(t, 0.0);
            let (gc, ec) = resid(&cand);
            if ec < err {
                x = cand;
                g = gc;
                err = ec;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (err <= 1e-10).then_some(x)
}

/// Best metric value found by sampling the feasible set of a bound problem:
/// random points projected onto the constraints, then the best few polished
/// by a projected random walk. A correct bound must weakly dominate it.
pub fn sample_feasible_bound_oracle(
    bundle: &OperatorBundle,
    problem: &BoundProblem,
    field_index: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if bundle.n_dof() > SAMPLER_MAX_DOF {
        return Err(Error::Config(format!("sampler limited to {SAMPLER_MAX_DOF} DOF")));
    }
    let metric = |x: &CVec| bound_metric(bundle, problem.kind, field_index, &problem.current(x));
    let better = |a: f64, b: f64| if problem.kind.is_upper() { a > b } else { a < b };
    if problem.determined {
        return Ok(metric(&CVec::zeros(problem.dim())));
    }
    let cons = &problem.qcqp.constraints;
    let m = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<(f64, CVec)> = Vec::new();
    let keep = 8;
    for _ in 0..n_samples {
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let Some(x) = project(cons, gauss(&mut rng, m) * C64::new(scale, 0.0)) else { continue };
        let f = metric(&x);
        if !f.is_finite() {
            continue;
        }
        if pool.len() < keep || better(f, pool[pool.len() - 1].0) {
            pool.push((f, x));
            pool.sort_by(|a, b| if better(a.0, b.0) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
            pool.truncate(keep);
        }
    }
    if pool.is_empty() {
        return Err(Error::Solver("no feasible sample found".into()));
    }
    let mut best = pool[0].0;
    for (mut f, mut x) in pool {
        let mut sigma = 0.1;
        for _ in 0..4000 {
            let step = gauss(&mut rng, m) * C64::new(sigma * x.norm().max(1e-12) / (m as f64).sqrt(), 0.0);
            match project(cons, &x + step) {
                Some(y) => {
                    let fy = metric(&y);
                    if fy.is_finite() && better(fy, f) {
                        x = y;
                        f = fy;
                        sigma = (sigma * 1.5).min(1.0);
                        continue;
                    }
                    sigma *= 0.8;
                }
                None => sigma *= 0.8,
            }
            if sigma < 1e-9 {
                break;
            }
        }
        if better(f, best) {
            best = f;
        }
    }
    Ok(best)
}
