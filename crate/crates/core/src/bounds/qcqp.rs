//! maximize J(x) = xᴴA₀x + 2Re(b₀ᴴx) + c₀ subject to two quadratic equality
//! constraints gₖ(x) = xᴴAₖx + 2Re(bₖᴴx) + cₖ = 0, through the Lagrange dual
//!
//! D(α, β) = sup_x J(x) − α g₁(x) − β g₂(x),
//!
//! finite when H = A₀ − αA₁ − βA₂ ≺ 0, with maximizer x = −H⁻¹b. D is convex
//! and ∇D = −(g₁, g₂) at that maximizer, so the dual is minimized by a damped
//! Newton iteration on the constraint residuals.

use nalgebra::Cholesky;

use super::pencil::hermitian_pencil_max_eig;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, max_abs, quad_form, CMat, CVec, C64};

/// Relative constraint residual accepted as converged.
pub const RESIDUAL_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 200;
const FD_STEP: f64 = 1e-7;
/// Multiplier magnitude taken as evidence of an infeasible problem.
const DIVERGENCE: f64 = 1e12;

/// xᴴAx + 2Re(bᴴx) + c with A Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    pub a: CMat,
    pub b: CVec,
    pub c: f64,
}

impl QuadForm {
    pub fn new(a: CMat, b: CVec, c: f64) -> Self {
        QuadForm { a: hermitian_part(&a), b, c }
    }

    pub fn homogeneous(a: CMat) -> Self {
        let n = a.nrows();
        QuadForm::new(a, CVec::zeros(n), 0.0)
    }

    pub fn eval(&self, x: &CVec) -> f64 {
        quad_form(&self.a, x).re + 2.0 * self.b.dotc(x).re + self.c
    }

    /// Upper estimate of the individual term magnitudes at x, used to make
    /// residuals relative. ‖Ax‖‖x‖ rather than |xᴴAx| so that indefinite
    /// homogeneous constraints still get a meaningful scale.
    pub fn scale(&self, x: &CVec) -> f64 {
        let nx = x.norm();
        (&self.a * x).norm() * nx + 2.0 * self.b.norm() * nx + self.c.abs()
    }

    /// The same form in coordinates x with I = P x + q.
    pub fn compose(&self, p: &CMat, q: &CVec) -> QuadForm {
        let aq = &self.a * q;
        QuadForm::new(
            p.adjoint() * &self.a * p,
            p.adjoint() * (&aq + &self.b),
            quad_form(&self.a, q).re + 2.0 * self.b.dotc(q).re + self.c,
        )
    }
}

/// Cholesky factor of a Hermitian matrix, or `None` unless it is positive
/// definite. The complex factorization takes square roots of negative
/// pivots without complaint, so the pivots are checked here.
fn positive_cholesky(m: CMat) -> Option<Cholesky<C64, nalgebra::Dyn>> {
    let chol = Cholesky::new(m)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

#[derive(Debug, Clone)]
pub struct Qcqp {
    pub objective: QuadForm,
    pub constraints: [QuadForm; 2],
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub x: CVec,
    pub alpha: f64,
    pub beta: f64,
    pub value: f64,
    pub dual_value: f64,
    pub iterations: usize,
    pub residuals: [f64; 2],
}

struct Point {
    alpha: f64,
    beta: f64,
    x: CVec,
    dual: f64,
    g: [f64; 2],
    rel: [f64; 2],
}

impl Qcqp {
    pub fn dim(&self) -> usize {
        self.objective.a.nrows()
    }

    pub fn residuals(&self, x: &CVec) -> [f64; 2] {
        let rel = |k: usize| {
            let c = &self.constraints[k];
            c.eval(x).abs() / c.scale(x).max(f64::MIN_POSITIVE)
        };
        [rel(0), rel(1)]
    }

    fn point(&self, alpha: f64, beta: f64) -> Option<Point> {
        let [c1, c2] = &self.constraints;
        let o = &self.objective;
        let (a, b) = (C64::new(alpha, 0.0), C64::new(beta, 0.0));
        let neg_h = hermitian_part(&(&c1.a * a + &c2.a * b - &o.a));
        let rhs = &o.b - &c1.b * a - &c2.b * b;
        let chol = positive_cholesky(neg_h)?;
        let x = chol.solve(&rhs);
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
        let dual = o.c - alpha * c1.c - beta * c2.c + rhs.dotc(&x).re;
        let g = [c1.eval(&x), c2.eval(&x)];
        let s = [c1.scale(&x), c2.scale(&x)];
        Some(Point {
            alpha,
            beta,
            dual,
            g,
            rel: [g[0].abs() / s[0].max(f64::MIN_POSITIVE), g[1].abs() / s[1].max(f64::MIN_POSITIVE)],
            x,
        })
    }

    /// Smallest α keeping H ≺ 0 at fixed β, plus a margin.
    fn feasible_alpha(&self, beta: f64) -> Option<f64> {
        let [c1, c2] = &self.constraints;
        let shifted = &self.objective.a - &c2.a * C64::new(beta, 0.0);
        let lmax = hermitian_pencil_max_eig(&shifted, &c1.a).ok()?;
        let alpha = lmax + 0.5 * lmax.abs().max(1e-3);
        self.point(alpha, beta).map(|_| alpha)
    }

    fn newton(&self, alpha0: f64, beta0: f64) -> (Point, usize, bool) {
        let mut cur = match self.point(alpha0, beta0) {
            Some(p) => p,
            None => unreachable!("start point is dual feasible"),
        };
        for it in 0..MAX_ITERS {
            if cur.rel[0] <= RESIDUAL_TOL && cur.rel[1] <= RESIDUAL_TOL {
                return (cur, it, true);
            }
            // Hessian of D is the Jacobian of −g, by central differences
            let h = FD_STEP * (cur.alpha.abs() + cur.beta.abs()).max(1e-12);
            let mut jac = [[0.0; 2]; 2];
            let mut ok = true;
            for (k, (da, db)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
                match (
                    self.point(cur.alpha + da, cur.beta + db),
                    self.point(cur.alpha - da, cur.beta - db),
                ) {
                    (Some(p), Some(m)) => {
                        jac[0][k] = -(p.g[0] - m.g[0]) / (2.0 * h);
                        jac[1][k] = -(p.g[1] - m.g[1]) / (2.0 * h);
                    }
                    _ => ok = false,
                }
            }
            let grad = [-cur.g[0], -cur.g[1]];
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let mut dir = if ok && det > 0.0 && jac[0][0] > 0.0 {
                [
                    -(jac[1][1] * grad[0] - jac[0][1] * grad[1]) / det,
                    -(-jac[1][0] * grad[0] + jac[0][0] * grad[1]) / det,
                ]
            } else {
                [-grad[0], -grad[1]]
            };
            let mut slope = grad[0] * dir[0] + grad[1] * dir[1];
            if slope >= 0.0 {
                dir = [-grad[0], -grad[1]];
                slope = -(grad[0] * grad[0] + grad[1] * grad[1]);
            }
            let mut t = 1.0;
            let mut next = None;
            for _ in 0..60 {
                if let Some(p) = self.point(cur.alpha + t * dir[0], cur.beta + t * dir[1]) {
                    if p.dual <= cur.dual + 1e-4 * t * slope {
                        next = Some(p);
                        break;
                    }
                }
                t *= 0.5;
            }
            match next {
                Some(p) => cur = p,
                None => return (cur, it, false),
            }
        }
        let done = cur.rel[0] <= RESIDUAL_TOL && cur.rel[1] <= RESIDUAL_TOL;
        (cur, MAX_ITERS, done)
    }
}

/// Solves the two-constraint QCQP through its dual, restarting from up to
/// five multiplier seeds.
pub fn solve_dual(problem: &Qcqp) -> Result<DualSolution> {
    let [c1, c2] = &problem.constraints;
    let ratio = max_abs(&c1.a) / max_abs(&c2.a).max(f64::MIN_POSITIVE);
    let ratio = if ratio.is_finite() && ratio > 0.0 { ratio } else { 1.0 };
    let seeds = [0.0, 1.0, -1.0, 10.0, -10.0];
    let mut best: Option<(Point, usize)> = None;
    let mut total_iters = 0;
    for s in seeds {
        let beta0 = s * ratio * 0.1;
        let Some(alpha0) = problem.feasible_alpha(beta0) else { continue };
        let (p, iters, done) = problem.newton(alpha0, beta0);
        total_iters += iters;
        if done {
            let value = problem.objective.eval(&p.x);
            return Ok(DualSolution {
                alpha: p.alpha,
                beta: p.beta,
                value,
                dual_value: p.dual,
                iterations: total_iters,
                residuals: p.rel,
                x: p.x,
            });
        }
        let worse = best
            .as_ref()
            .is_none_or(|(b, _)| p.rel[0].max(p.rel[1]) < b.rel[0].max(b.rel[1]));
        if worse {
            best = Some((p, iters));
        }
    }
    match best {
        // the dual decreases without bound only when the constraint set is empty
        Some((p, _)) if p.alpha.abs().max(p.beta.abs()) > DIVERGENCE * ratio.max(1.0 / ratio) => Err(Error::Domain(format!(
            "constraint set appears empty: dual multipliers diverge (alpha={:.3e}, beta={:.3e})",
            p.alpha, p.beta
        ))),
        Some((p, _)) => Err(Error::Solver(format!(
            "dual Newton did not converge from 5 seeds; best residuals ({:.3e}, {:.3e}) at alpha={:.6e}, beta={:.6e}",
            p.rel[0], p.rel[1], p.alpha, p.beta
        ))),
        None => Err(Error::Solver("no dual-feasible multiplier seed found".into())),
    }
}
