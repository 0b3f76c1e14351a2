//! Exact reanalysis: keep Y = Z[S,S]⁻¹ for the enabled set S and evaluate
//! every single-DOF removal or addition by rank-one algebra on Y.
//!
//! All transposes are unconjugated; Z is complex symmetric, so Y is too.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{inverse_with_cond, max_abs, submatrix, subvector, CMat, CVec, C64};
use crate::model::{materialize, Word};
use crate::objectives::Evaluator;

/// Relative tolerance below which a pivot is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;
/// Condition number above which a fresh factorization is rejected.
pub const COND_LIMIT: f64 = 1e14;
/// Relative residual that triggers a refactorization.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Remove(usize),
    Add(usize),
}

impl Move {
    pub fn dof(&self) -> usize {
        match *self {
            Move::Remove(n) | Move::Add(n) => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Move::Remove(_) => "remove",
            Move::Add(_) => "add",
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.dof())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub removals_evaluated: u64,
    pub additions_evaluated: u64,
}

impl Counters {
    pub fn total(&self) -> u64 {
        self.removals_evaluated + self.additions_evaluated
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub commits: u64,
    pub refactorizations: u64,
}

/// Candidate currents of one batch, all expressed on the current enabled set S.
///
/// Column k of `currents` is the candidate current restricted to S (a removed
/// DOF carries a zero). An addition candidate additionally carries the new
/// DOF and its current.
#[derive(Debug, Clone)]
pub struct CandidateBatch {
    enabled: Vec<usize>,
    moves: Vec<Move>,
    feasible: Vec<bool>,
    currents: CMat,
    added: Vec<Option<(usize, C64)>>,
}

impl CandidateBatch {
    fn empty(enabled: &[usize]) -> Self {
        CandidateBatch {
            enabled: enabled.to_vec(),
            moves: Vec::new(),
            feasible: Vec::new(),
            currents: CMat::zeros(enabled.len(), 0),
            added: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn feasible(&self) -> &[bool] {
        &self.feasible
    }

    /// Candidate current scattered to all N DOF.
    pub fn full_current(&self, k: usize, n_dof: usize) -> CVec {
        let mut out = CVec::zeros(n_dof);
        for (p, &i) in self.enabled.iter().enumerate() {
            out[i] = self.currents[(p, k)];
        }
        if let Some((m, im)) = self.added[k] {
            out[m] = im;
        }
        out
    }

    /// Real part of cᴴ M c for every candidate (M Hermitian, N×N).
    pub fn quad_forms(&self, m: &CMat) -> Vec<f64> {
        let s = &self.enabled;
        let mc = submatrix(m, s, s) * &self.currents;
        (0..self.len())
            .map(|k| {
                let c = self.currents.column(k);
                let mut acc = c.dotc(&mc.column(k)).re;
                if let Some((add, im)) = self.added[k] {
                    let mut cross = C64::new(0.0, 0.0);
                    for (p, &i) in s.iter().enumerate() {
                        cross += c[p].conj() * m[(i, add)];
                    }
                    acc += 2.0 * (cross * im).re + im.norm_sqr() * m[(add, add)].re;
                }
                acc
            })
            .collect()
    }

    /// cᴴ M c restricted to the DOF in `block`, which must all be enabled.
    pub fn block_quad_forms(&self, m: &CMat, block: &[usize]) -> Vec<f64> {
        let pos: Vec<usize> = block
            .iter()
            .map(|b| self.enabled.binary_search(b).expect("block DOF must be enabled"))
            .collect();
        let sub = submatrix(m, block, block);
        let rows = CMat::from_fn(pos.len(), self.len(), |r, k| self.currents[(pos[r], k)]);
        let mc = &sub * &rows;
        (0..self.len()).map(|k| rows.column(k).dotc(&mc.column(k)).re).collect()
    }

    /// Unconjugated fᵀ c for every candidate.
    pub fn linear_forms(&self, f: &CVec) -> Vec<C64> {
        let fs = subvector(f, &self.enabled);
        (0..self.len())
            .map(|k| {
                let mut acc = fs.dot(&self.currents.column(k));
                if let Some((add, im)) = self.added[k] {
                    acc += f[add] * im;
                }
                acc
            })
            .collect()
    }

    /// Current on one DOF for every candidate.
    pub fn entries(&self, dof: usize) -> Vec<C64> {
        let pos = self.enabled.binary_search(&dof).ok();
        (0..self.len())
            .map(|k| match (pos, self.added[k]) {
                (Some(p), _) => self.currents[(p, k)],
                (None, Some((m, im))) if m == dof => im,
                _ => C64::new(0.0, 0.0),
            })
            .collect()
    }

    fn append(&mut self, other: CandidateBatch) {
        let cols = self.len() + other.len();
        let mut currents = CMat::zeros(self.enabled.len(), cols);
        currents.columns_mut(0, self.len()).copy_from(&self.currents);
        currents.columns_mut(self.len(), other.len()).copy_from(&other.currents);
        self.currents = currents;
        self.moves.extend(other.moves);
        self.feasible.extend(other.feasible);
        self.added.extend(other.added);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub mv: Move,
    pub f_candidate: f64,
    pub tau: f64,
}

/// Enabled set, its maintained inverse, the solved current and objective value.
#[derive(Debug, Clone)]
pub struct StructureState<'a> {
    eval: &'a Evaluator<'a>,
    enabled: Vec<usize>,
    y: CMat,
    current: CVec,
    f_val: f64,
    counters: Counters,
    diagnostics: Diagnostics,
    since_refactor: usize,
    refactor_period: usize,
}

/// Factorizes Z[S,S] for the word and solves for the current.
pub fn init_state<'a>(eval: &'a Evaluator<'a>, word: &Word, refactor_period: usize) -> Result<StructureState<'a>> {
    let enabled = materialize(word, eval.bundle())?;
    init_state_on(eval, enabled, refactor_period)
}

pub fn init_state_on<'a>(
    eval: &'a Evaluator<'a>,
    enabled: Vec<usize>,
    refactor_period: usize,
) -> Result<StructureState<'a>> {
    if enabled.is_empty() {
        return Err(Error::Infeasible("empty enabled set".into()));
    }
    let (y, current) = factorize(eval, &enabled)?;
    let f_val = eval.value(&enabled, &current);
    Ok(StructureState {
        eval,
        enabled,
        y,
        current,
        f_val,
        counters: Counters::default(),
        diagnostics: Diagnostics::default(),
        since_refactor: 0,
        refactor_period: refactor_period.max(1),
    })
}

fn factorize(eval: &Evaluator, enabled: &[usize]) -> Result<(CMat, CVec)> {
    let zs = submatrix(&eval.bundle().z, enabled, enabled);
    let (y, cond) = inverse_with_cond(&zs)
        .ok_or_else(|| Error::Infeasible("Z[S,S] is singular".into()))?;
    if cond > COND_LIMIT {
        return Err(Error::Infeasible(format!("Z[S,S] condition estimate {cond:.3e}")));
    }
    let y = (&y + y.transpose()) * C64::new(0.5, 0.0);
    let current = &y * subvector(eval.excitation(), enabled);
    Ok((y, current))
}

fn diag_scale(m: &CMat) -> f64 {
    (0..m.nrows()).fold(0.0, |acc, i| acc.max(m[(i, i)].norm()))
}

impl<'a> StructureState<'a> {
    pub fn evaluator(&self) -> &'a Evaluator<'a> {
        self.eval
    }

    pub fn enabled(&self) -> &[usize] {
        &self.enabled
    }

    pub fn inverse(&self) -> &CMat {
        &self.y
    }

    pub fn current(&self) -> &CVec {
        &self.current
    }

    pub fn full_current(&self) -> CVec {
        crate::linalg::scatter(self.eval.bundle().n_dof(), &self.enabled, &self.current)
    }

    pub fn f_val(&self) -> f64 {
        self.f_val
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn word(&self) -> Word {
        Word::from_enabled(&self.enabled, self.eval.bundle())
    }

    /// ‖Z[S,S] I − V[S]‖ / ‖V[S]‖.
    pub fn residual(&self) -> f64 {
        let s = &self.enabled;
        let vs = subvector(self.eval.excitation(), s);
        let r = submatrix(&self.eval.bundle().z, s, s) * &self.current - &vs;
        r.norm() / vs.norm().max(f64::MIN_POSITIVE)
    }

    /// Removal candidates R(g) = enabled ∖ fixed, ascending.
    pub fn removal_candidates(&self) -> Vec<usize> {
        let fixed = &self.eval.bundle().fixed;
        self.enabled.iter().copied().filter(|&i| !fixed[i]).collect()
    }

    /// Addition candidates A(g) = controllable ∖ enabled, ascending.
    pub fn addition_candidates(&self) -> Vec<usize> {
        let b = self.eval.bundle();
        (0..b.n_dof())
            .filter(|&i| b.controllable[i] && self.enabled.binary_search(&i).is_err())
            .collect()
    }

    fn removal_pivot_ok(&self, d: C64) -> bool {
        d.norm() > PIVOT_TOL * diag_scale(&self.y)
    }

    fn addition_pivot_ok(&self, s: C64) -> bool {
        s.norm() > PIVOT_TOL * diag_scale(&self.eval.bundle().z)
    }

    pub fn batch_removal_currents(&mut self) -> CandidateBatch {
        let cands = self.removal_candidates();
        self.counters.removals_evaluated += cands.len() as u64;
        let mut batch = CandidateBatch::empty(&self.enabled);
        batch.currents = CMat::zeros(self.enabled.len(), cands.len());
        for (k, &n) in cands.iter().enumerate() {
            let p = self.enabled.binary_search(&n).expect("candidate is enabled");
            let d = self.y[(p, p)];
            let ok = self.removal_pivot_ok(d);
            if ok {
                let alpha = self.current[p] / d;
                let mut col = &self.current - self.y.column(p) * alpha;
                col[p] = C64::new(0.0, 0.0);
                batch.currents.set_column(k, &col);
            }
            batch.moves.push(Move::Remove(n));
            batch.feasible.push(ok);
            batch.added.push(None);
        }
        batch
    }

    pub fn batch_addition_currents(&mut self) -> CandidateBatch {
        let cands = self.addition_candidates();
        self.counters.additions_evaluated += cands.len() as u64;
        let b = self.eval.bundle();
        let v = self.eval.excitation();
        let mut batch = CandidateBatch::empty(&self.enabled);
        batch.currents = CMat::zeros(self.enabled.len(), cands.len());
        if cands.is_empty() {
            return batch;
        }
        let bm = submatrix(&b.z, &self.enabled, &cands);
        let u = &self.y * &bm;
        for (k, &m) in cands.iter().enumerate() {
            let bcol = bm.column(k);
            let ucol = u.column(k);
            let s = b.z[(m, m)] - bcol.dot(&ucol);
            let ok = self.addition_pivot_ok(s);
            let mut added = None;
            if ok {
                let im = (v[m] - bcol.dot(&self.current)) / s;
                batch.currents.set_column(k, &(&self.current - ucol * im));
                added = Some((m, im));
            }
            batch.moves.push(Move::Add(m));
            batch.feasible.push(ok);
            batch.added.push(added);
        }
        batch
    }

    /// Removals followed by additions, each ascending by DOF.
    pub fn batch_all(&mut self) -> CandidateBatch {
        let mut batch = self.batch_removal_currents();
        let adds = self.batch_addition_currents();
        batch.append(adds);
        batch
    }

    /// Objective value and τ of every candidate move (infeasible ones at +∞).
    pub fn evaluate_candidates(&mut self) -> Vec<Sensitivity> {
        let batch = self.batch_all();
        let values = self.eval.batch_values(&batch);
        batch
            .moves()
            .iter()
            .zip(values)
            .map(|(&mv, f)| Sensitivity { mv, f_candidate: f, tau: f - self.f_val })
            .collect()
    }

    /// Applies a move through a rank-one update of Y.
    pub fn commit(&mut self, mv: Move) -> Result<()> {
        match mv {
            Move::Remove(n) => self.commit_removal(n)?,
            Move::Add(m) => self.commit_addition(m)?,
        }
        self.diagnostics.commits += 1;
        self.since_refactor += 1;
        if self.since_refactor >= self.refactor_period || self.residual() > RESIDUAL_TOL {
            self.refactor()?;
        }
        self.f_val = self.eval.value(&self.enabled, &self.current);
        Ok(())
    }

    fn commit_removal(&mut self, n: usize) -> Result<()> {
        if self.eval.bundle().fixed.get(n).copied().unwrap_or(true) {
            return Err(Error::Logic(format!("DOF {n} is fixed or out of range")));
        }
        let p = self
            .enabled
            .binary_search(&n)
            .map_err(|_| Error::Logic(format!("DOF {n} is not enabled")))?;
        let d = self.y[(p, p)];
        if !self.removal_pivot_ok(d) {
            return Err(Error::Logic(format!("removal of DOF {n} is infeasible")));
        }
        let y = self.y.column(p).into_owned();
        let alpha = self.current[p] / d;
        let current = &self.current - &y * alpha;
        let updated = &self.y - &y * y.transpose() / d;
        self.y = updated.remove_row(p).remove_column(p);
        self.current = current.remove_row(p);
        self.enabled.remove(p);
        Ok(())
    }

    fn commit_addition(&mut self, m: usize) -> Result<()> {
        let b = self.eval.bundle();
        if !b.controllable.get(m).copied().unwrap_or(false) {
            return Err(Error::Logic(format!("DOF {m} is not controllable")));
        }
        let q = match self.enabled.binary_search(&m) {
            Ok(_) => return Err(Error::Logic(format!("DOF {m} is already enabled"))),
            Err(q) => q,
        };
        let bcol = CVec::from_fn(self.enabled.len(), |i, _| b.z[(self.enabled[i], m)]);
        let u = &self.y * &bcol;
        let s = b.z[(m, m)] - bcol.dot(&u);
        if !self.addition_pivot_ok(s) {
            return Err(Error::Logic(format!("addition of DOF {m} is infeasible")));
        }
        let im = (self.eval.excitation()[m] - bcol.dot(&self.current)) / s;
        let current_s = &self.current - &u * im;

        let k = self.enabled.len();
        let inner = &self.y + &u * u.transpose() / s;
        // position in the new ordering of each old index
        let map = |i: usize| if i < q { i } else { i + 1 };
        let mut y = CMat::zeros(k + 1, k + 1);
        for j in 0..k {
            for i in 0..k {
                y[(map(i), map(j))] = inner[(i, j)];
            }
            y[(map(j), q)] = -u[j] / s;
            y[(q, map(j))] = -u[j] / s;
        }
        y[(q, q)] = C64::new(1.0, 0.0) / s;
        self.y = y;
        self.current = current_s.insert_row(q, im);
        self.enabled.insert(q, m);
        Ok(())
    }

    /// Rebuilds Y and I by direct factorization.
    pub fn refactor(&mut self) -> Result<()> {
        let (y, current) = factorize(self.eval, &self.enabled)?;
        self.y = y;
        self.current = current;
        self.since_refactor = 0;
        self.diagnostics.refactorizations += 1;
        Ok(())
    }

    /// Largest deviation of Y from its transpose relative to max |Y|.
    pub fn symmetry_defect(&self) -> f64 {
        crate::linalg::max_abs_diff(&self.y, &self.y.transpose()) / max_abs(&self.y).max(f64::MIN_POSITIVE)
    }
}
