//! Metrics evaluated on a current vector: Q-factor and its untuned/tuning
//! split, reflection coefficient, the Q-plus-matching composite, realized
//! gain and power absorbed in a chip region.
//!
//! The free functions take full-length (N) current vectors with zeros on
//! disabled DOF. [`Evaluator`] binds an objective to a bundle and evaluates
//! whole candidate batches from the reanalysis kernel at once.

use crate::error::{Error, Result};
use crate::linalg::{quad_form, scatter, CVec, C64};
use crate::model::{mask_indices, ObjectiveKind, ObjectiveSpec, OperatorBundle};
use crate::reanalysis::CandidateBatch;

/// Radiated power below this is treated as a non-radiating structure.
pub const POWER_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QBreakdown {
    pub q_u: f64,
    pub q_e: f64,
    pub q: f64,
    pub p_rad: f64,
    pub p_lost: f64,
    pub p_react: f64,
}

pub fn eval_q(current: &CVec, bundle: &OperatorBundle) -> Result<QBreakdown> {
    let w = bundle
        .w
        .as_ref()
        .ok_or_else(|| Error::Missing("Q requires the W matrix".into()))?;
    let p_rad = 0.5 * quad_form(&bundle.r0, current).re;
    let p_react = 0.5 * quad_form(&bundle.x, current).re;
    let p_lost = bundle
        .r_rho
        .as_ref()
        .map_or(0.0, |r| 0.5 * quad_form(r, current).re);
    if p_rad <= POWER_FLOOR {
        let inf = f64::INFINITY;
        return Ok(QBreakdown { q_u: inf, q_e: inf, q: inf, p_rad, p_lost, p_react });
    }
    let q_u = 0.5 * quad_form(w, current).re / (2.0 * p_rad);
    let q_e = p_react.abs() / (2.0 * p_rad);
    Ok(QBreakdown { q_u, q_e, q: q_u + q_e, p_rad, p_lost, p_react })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma {
    pub z_in: C64,
    pub gamma: C64,
    /// Set when the feed current vanished and Γ was forced to 1.
    pub open: bool,
}

impl Gamma {
    pub fn mismatch(&self) -> f64 {
        self.gamma.norm_sqr()
    }
}

pub fn reflection(z_in: C64, z0: C64) -> C64 {
    if !z_in.re.is_finite() || !z_in.im.is_finite() {
        return C64::new(1.0, 0.0);
    }
    (z_in - z0) / (z_in + z0)
}

fn gamma_from_feed(v_feed: C64, i_feed: C64, z0: C64) -> Gamma {
    if i_feed.norm() <= POWER_FLOOR {
        return Gamma {
            z_in: C64::new(f64::INFINITY, 0.0),
            gamma: C64::new(1.0, 0.0),
            open: true,
        };
    }
    let z_in = v_feed / i_feed;
    Gamma { z_in, gamma: reflection(z_in, z0), open: false }
}

pub fn eval_gamma(current: &CVec, v: &CVec, feed_index: usize, z0: C64) -> Gamma {
    gamma_from_feed(v[feed_index], current[feed_index], z0)
}

pub fn eval_q_matched(
    current: &CVec,
    v: &CVec,
    bundle: &OperatorBundle,
    zeta: f64,
    z0: C64,
    q_lb_ref: f64,
    feed_index: usize,
) -> Result<f64> {
    if !(q_lb_ref > 0.0) {
        return Err(Error::Config("q_lb_ref must be > 0".into()));
    }
    let q = eval_q(current, bundle)?.q;
    let g = eval_gamma(current, v, feed_index, z0);
    Ok(q / q_lb_ref * (1.0 + zeta * g.mismatch()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainResult {
    pub gain: f64,
    pub realized_gain: f64,
    pub gamma: Gamma,
}

pub fn eval_realized_gain(
    current: &CVec,
    v: &CVec,
    bundle: &OperatorBundle,
    field_index: usize,
    z0: C64,
    feed_index: usize,
) -> Result<GainResult> {
    let f = bundle
        .far_field
        .get(field_index)
        .ok_or_else(|| Error::Missing(format!("no far-field row {field_index}")))?;
    let p = quad_form(&bundle.total_resistance(), current).re;
    if p <= POWER_FLOOR {
        return Err(Error::Infeasible("no power accepted by the structure".into()));
    }
    let gain = f.dot(current).norm_sqr() / p;
    let gamma = eval_gamma(current, v, feed_index, z0);
    Ok(GainResult { gain, realized_gain: gain * (1.0 - gamma.mismatch()), gamma })
}

pub fn eval_absorbed_power(current: &CVec, bundle: &OperatorBundle, chip: &[bool]) -> Result<f64> {
    let r = bundle
        .r_rho
        .as_ref()
        .ok_or_else(|| Error::Missing("absorbed power requires R_rho".into()))?;
    let idx = mask_indices(chip);
    if idx.is_empty() {
        log::warn!("empty chip mask, absorbed power is zero");
        return Ok(0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    for &a in &idx {
        for &b in &idx {
            acc += current[a].conj() * r[(a, b)] * current[b];
        }
    }
    Ok(0.5 * acc.re)
}

/// An objective bound to one bundle: scalar evaluation for committed states
/// and batched evaluation for candidate sweeps.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    bundle: &'a OperatorBundle,
    spec: ObjectiveSpec,
}

impl<'a> Evaluator<'a> {
    pub fn new(bundle: &'a OperatorBundle, spec: &ObjectiveSpec) -> Result<Self> {
        let spec = spec.resolve(bundle)?;
        Ok(Evaluator { bundle, spec })
    }

    pub fn bundle(&self) -> &'a OperatorBundle {
        self.bundle
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    pub fn excitation(&self) -> &'a CVec {
        &self.bundle.excitations[self.spec.excitation_index]
    }

    fn feed(&self) -> usize {
        self.spec.feed_index.unwrap_or(0)
    }

    /// Signed metric of the full-length current; +∞ when degenerate.
    pub fn value_full(&self, current: &CVec) -> f64 {
        let b = self.bundle;
        let s = &self.spec;
        let v = self.excitation();
        let metric = match s.kind {
            ObjectiveKind::Q => eval_q(current, b).map(|q| q.q),
            ObjectiveKind::QMatched => {
                eval_q_matched(current, v, b, s.zeta, s.z0, s.q_lb_ref.unwrap_or(1.0), self.feed())
            }
            ObjectiveKind::RealizedGain => {
                eval_realized_gain(current, v, b, s.field_index, s.z0, self.feed()).map(|g| g.realized_gain)
            }
            ObjectiveKind::AbsorbedPower => {
                eval_absorbed_power(current, b, b.chip.as_deref().unwrap_or(&[]))
            }
        };
        self.signed(metric.ok())
    }

    /// Signed metric of a current living on the sorted enabled set.
    pub fn value(&self, enabled: &[usize], current: &CVec) -> f64 {
        self.value_full(&scatter(self.bundle.n_dof(), enabled, current))
    }

    fn signed(&self, metric: Option<f64>) -> f64 {
        match metric {
            Some(m) if m.is_finite() => self.spec.sign * m,
            _ => f64::INFINITY,
        }
    }

    /// Signed metric of every candidate in the batch; infeasible candidates
    /// get +∞.
    pub fn batch_values(&self, batch: &CandidateBatch) -> Vec<f64> {
        let b = self.bundle;
        let s = &self.spec;
        let k = batch.len();
        let metrics: Vec<Option<f64>> = match s.kind {
            ObjectiveKind::Q | ObjectiveKind::QMatched => {
                let w = batch.quad_forms(b.w.as_ref().expect("resolved spec has W"));
                let r0 = batch.quad_forms(&b.r0);
                let x = batch.quad_forms(&b.x);
                let feed = (s.kind == ObjectiveKind::QMatched).then(|| batch.entries(self.feed()));
                (0..k)
                    .map(|c| {
                        if r0[c] <= 2.0 * POWER_FLOOR {
                            return None;
                        }
                        let q = 0.5 * (w[c] + x[c].abs()) / r0[c];
                        match &feed {
                            None => Some(q),
                            Some(feed) => {
                                let g = gamma_from_feed(self.excitation()[self.feed()], feed[c], s.z0);
                                Some(q / s.q_lb_ref.unwrap_or(1.0) * (1.0 + s.zeta * g.mismatch()))
                            }
                        }
                    })
                    .collect()
            }
            ObjectiveKind::RealizedGain => {
                let p = batch.quad_forms(&b.total_resistance());
                let lin = batch.linear_forms(&b.far_field[s.field_index]);
                let feed = batch.entries(self.feed());
                (0..k)
                    .map(|c| {
                        if p[c] <= POWER_FLOOR {
                            return None;
                        }
                        let g = gamma_from_feed(self.excitation()[self.feed()], feed[c], s.z0);
                        Some(lin[c].norm_sqr() / p[c] * (1.0 - g.mismatch()))
                    })
                    .collect()
            }
            ObjectiveKind::AbsorbedPower => {
                let chip = b.chip_indices();
                let r = b.r_rho.as_ref().expect("resolved spec has R_rho");
                batch.block_quad_forms(r, &chip).into_iter().map(|p| Some(0.5 * p)).collect()
            }
        };
        metrics
            .into_iter()
            .zip(batch.feasible())
            .map(|(m, &ok)| if ok { self.signed(m) } else { f64::INFINITY })
            .collect()
    }
}
