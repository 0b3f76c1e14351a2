//! Domain types shared by every stage of the pipeline: operator bundles,
//! words, objective descriptors and run configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, max_abs, max_abs_diff, CMat, CVec, C64};

/// Relative tolerance for the exact algebraic identities of a bundle.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Relative tolerance for positive semi-definiteness.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Meta {
    /// Frequency in Hz.
    pub frequency: f64,
    /// Wavenumber in 1/m.
    pub wavenumber: f64,
    /// Radius of the smallest circumscribing sphere in m (0 when unknown).
    pub radius: f64,
}

impl Meta {
    pub fn ka(&self) -> f64 {
        self.wavenumber * self.radius
    }
}

/// All system matrices of one design problem, dense.
///
/// Far-field rows and excitation vectors are stored as length-N column
/// vectors; `F·I` is the unconjugated product `far_field[i].transpose() * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBundle {
    pub z: CMat,
    pub r0: CMat,
    pub x: CMat,
    pub w: Option<CMat>,
    pub r_rho: Option<CMat>,
    pub far_field: Vec<CVec>,
    pub excitations: Vec<CVec>,
    pub tm_projector: Option<CMat>,
    pub fixed: Vec<bool>,
    pub controllable: Vec<bool>,
    pub chip: Option<Vec<bool>>,
    pub meta: Meta,
}

fn check_square(name: &str, m: &CMat, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::validation(
            &format!("{name} shape"),
            format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn check_hermitian(name: &str, m: &CMat) -> Result<()> {
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let dev = max_abs_diff(m, &m.adjoint());
    if dev > IDENTITY_TOL * scale {
        return Err(Error::validation(
            &format!("{name} Hermitian"),
            format!("max |{name} - {name}^H| = {dev:.3e} (scale {scale:.3e})"),
        ));
    }
    Ok(())
}

fn check_psd(name: &str, m: &CMat) -> Result<()> {
    let (vals, _) = hermitian_eigen(m);
    let norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL * norm {
        return Err(Error::validation(
            &format!("{name} PSD"),
            format!("min eigenvalue {min:.3e} below -{PSD_TOL:e} * {norm:.3e}"),
        ));
    }
    Ok(())
}

impl OperatorBundle {
    pub fn n_dof(&self) -> usize {
        self.z.nrows()
    }

    pub fn fixed_indices(&self) -> Vec<usize> {
        mask_indices(&self.fixed)
    }

    pub fn controllable_indices(&self) -> Vec<usize> {
        mask_indices(&self.controllable)
    }

    pub fn chip_indices(&self) -> Vec<usize> {
        self.chip.as_deref().map(mask_indices).unwrap_or_default()
    }

    pub fn n_opt(&self) -> usize {
        self.controllable.iter().filter(|&&b| b).count()
    }

    /// R0 + Rρ (the total-loss resistance operator).
    pub fn total_resistance(&self) -> CMat {
        match &self.r_rho {
            Some(r) => &self.r0 + r,
            None => self.r0.clone(),
        }
    }

    /// Runs every structural check. Errors name the failed check.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_dof();
        if n == 0 {
            return Err(Error::validation("dimension", "bundle has zero DOF"));
        }
        check_square("Z", &self.z, n)?;
        check_square("R0", &self.r0, n)?;
        check_square("X", &self.x, n)?;
        if let Some(w) = &self.w {
            check_square("W", w, n)?;
        }
        if let Some(r) = &self.r_rho {
            check_square("R_rho", r, n)?;
        }
        for (i, f) in self.far_field.iter().enumerate() {
            if f.len() != n {
                return Err(Error::validation(
                    "F shape",
                    format!("row {i} has length {}, expected {n}", f.len()),
                ));
            }
        }
        if self.excitations.is_empty() {
            return Err(Error::validation("V present", "no excitation vector"));
        }
        for (i, v) in self.excitations.iter().enumerate() {
            if v.len() != n {
                return Err(Error::validation(
                    "V shape",
                    format!("vector {i} has length {}, expected {n}", v.len()),
                ));
            }
        }
        if let Some(u) = &self.tm_projector {
            if u.ncols() != n || u.nrows() == 0 {
                return Err(Error::validation(
                    "TM projector shape",
                    format!("got {}x{}, expected Mx{n}", u.nrows(), u.ncols()),
                ));
            }
        }
        if self.fixed.len() != n || self.controllable.len() != n {
            return Err(Error::validation("mask length", "fixed/controllable masks must have N entries"));
        }
        if let Some(c) = &self.chip {
            if c.len() != n {
                return Err(Error::validation("mask length", "chip mask must have N entries"));
            }
        }
        if let Some(i) = (0..n).find(|&i| self.fixed[i] && self.controllable[i]) {
            return Err(Error::validation(
                "mask overlap fixed/controllable",
                format!("DOF {i} is both fixed and controllable"),
            ));
        }
        if let Some(chip) = &self.chip {
            if let Some(i) = (0..n).find(|&i| chip[i] && self.controllable[i]) {
                return Err(Error::validation(
                    "mask overlap chip/controllable",
                    format!("DOF {i} is both chip and controllable"),
                ));
            }
        }

        let all_finite = |m: &CMat| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !all_finite(&self.z) || !all_finite(&self.r0) || !all_finite(&self.x) {
            return Err(Error::validation("finite", "non-finite matrix entry"));
        }

        let scale = max_abs(&self.z).max(f64::MIN_POSITIVE);
        let asym = max_abs_diff(&self.z, &self.z.transpose());
        if asym > IDENTITY_TOL * scale {
            return Err(Error::validation(
                "Z symmetry",
                format!("max |Z - Z^T| = {asym:.3e} exceeds {IDENTITY_TOL:e} * {scale:.3e}"),
            ));
        }

        check_hermitian("R0", &self.r0)?;
        check_hermitian("X", &self.x)?;
        if let Some(w) = &self.w {
            check_hermitian("W", w)?;
        }
        if let Some(r) = &self.r_rho {
            check_hermitian("R_rho", r)?;
        }

        let recomposed = self.total_resistance() + &self.x * C64::new(0.0, 1.0);
        let dev = max_abs_diff(&self.z, &recomposed);
        if dev > IDENTITY_TOL * scale {
            return Err(Error::validation(
                "Z decomposition",
                format!("max |Z - (R0 + R_rho + jX)| = {dev:.3e} (scale {scale:.3e})"),
            ));
        }

        check_psd("R0", &self.r0)?;
        if let Some(r) = &self.r_rho {
            check_psd("R_rho", r)?;
        }

        let m = &self.meta;
        if !(m.frequency.is_finite() && m.wavenumber.is_finite() && m.radius.is_finite()) {
            return Err(Error::validation("META", "non-finite metadata"));
        }
        Ok(())
    }
}

pub fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

/// Binary gene over the controllable DOF, in ascending DOF order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    bits: Vec<bool>,
}

impl Word {
    pub fn new(bits: Vec<bool>) -> Self {
        Word { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Word { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        Word { bits: vec![true; n] }
    }

    /// Word whose bits are the binary digits of `code`, bit 0 first.
    pub fn from_index(code: u64, n: usize) -> Self {
        Word {
            bits: (0..n).map(|i| (code >> i) & 1 == 1).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn hamming(&self, other: &Word) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Inverse of [`materialize`]: read the controllable bits off an enabled set.
    pub fn from_enabled(enabled: &[usize], bundle: &OperatorBundle) -> Self {
        let ctrl = bundle.controllable_indices();
        Word {
            bits: ctrl.iter().map(|i| enabled.binary_search(i).is_ok()).collect(),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!("invalid word character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word::new)
    }
}

/// Enabled set of a word: fixed DOF plus the controllable DOF whose bit is set,
/// sorted ascending.
pub fn materialize(word: &Word, bundle: &OperatorBundle) -> Result<Vec<usize>> {
    let ctrl = bundle.controllable_indices();
    if word.len() != ctrl.len() {
        return Err(Error::Config(format!(
            "word length {} does not match {} controllable DOF",
            word.len(),
            ctrl.len()
        )));
    }
    let mut set = bundle.fixed_indices();
    set.extend(ctrl.iter().zip(word.bits()).filter_map(|(&i, &b)| b.then_some(i)));
    set.sort_unstable();
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    /// Q-factor, minimized.
    Q,
    /// Q normalized by a reference bound and penalized by mismatch.
    QMatched,
    /// Realized gain, maximized by negation.
    RealizedGain,
    /// Power absorbed in the chip region, maximized by negation.
    AbsorbedPower,
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Q => "q",
            ObjectiveKind::QMatched => "q_matched",
            ObjectiveKind::RealizedGain => "realized_gain",
            ObjectiveKind::AbsorbedPower => "absorbed_power",
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q" => Ok(ObjectiveKind::Q),
            "q_matched" | "qmatched" => Ok(ObjectiveKind::QMatched),
            "realized_gain" | "gain" | "gr" => Ok(ObjectiveKind::RealizedGain),
            "absorbed_power" | "pabs" => Ok(ObjectiveKind::AbsorbedPower),
            other => Err(Error::Config(format!("unknown objective kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub zeta: f64,
    pub z0: C64,
    pub q_lb_ref: Option<f64>,
    pub field_index: usize,
    /// Delta-gap DOF; `None` resolves to the first fixed DOF with a nonzero excitation.
    pub feed_index: Option<usize>,
    pub excitation_index: usize,
    /// +1 minimizes the metric, -1 maximizes it by negation.
    pub sign: f64,
}

impl ObjectiveSpec {
    fn base(kind: ObjectiveKind, sign: f64) -> Self {
        ObjectiveSpec {
            kind,
            zeta: 0.0,
            z0: C64::new(50.0, 0.0),
            q_lb_ref: None,
            field_index: 0,
            feed_index: None,
            excitation_index: 0,
            sign,
        }
    }

    pub fn q() -> Self {
        Self::base(ObjectiveKind::Q, 1.0)
    }

    pub fn q_matched(zeta: f64, z0: C64, q_lb_ref: f64) -> Self {
        ObjectiveSpec {
            zeta,
            z0,
            q_lb_ref: Some(q_lb_ref),
            ..Self::base(ObjectiveKind::QMatched, 1.0)
        }
    }

    pub fn realized_gain(field_index: usize, z0: C64) -> Self {
        ObjectiveSpec {
            field_index,
            z0,
            ..Self::base(ObjectiveKind::RealizedGain, -1.0)
        }
    }

    pub fn absorbed_power() -> Self {
        Self::base(ObjectiveKind::AbsorbedPower, -1.0)
    }

    /// Checks the objective's prerequisites against a bundle and resolves the
    /// feed index.
    pub fn resolve(&self, bundle: &OperatorBundle) -> Result<ObjectiveSpec> {
        let mut spec = self.clone();
        let v = bundle.excitations.get(self.excitation_index).ok_or_else(|| {
            Error::Config(format!("excitation index {} out of range", self.excitation_index))
        })?;
        if self.zeta < 0.0 || !self.zeta.is_finite() {
            return Err(Error::Config("zeta must be finite and >= 0".into()));
        }
        let needs_feed = matches!(self.kind, ObjectiveKind::QMatched | ObjectiveKind::RealizedGain);
        match self.kind {
            ObjectiveKind::Q | ObjectiveKind::QMatched => {
                if bundle.w.is_none() {
                    return Err(Error::Missing("Q objectives require the W matrix".into()));
                }
            }
            ObjectiveKind::RealizedGain => {
                if bundle.far_field.get(self.field_index).is_none() {
                    return Err(Error::Missing(format!(
                        "realized gain requires far-field row {}",
                        self.field_index
                    )));
                }
            }
            ObjectiveKind::AbsorbedPower => {
                if bundle.chip.is_none() || bundle.r_rho.is_none() {
                    return Err(Error::Missing(
                        "absorbed power requires a chip mask and R_rho".into(),
                    ));
                }
            }
        }
        if self.kind == ObjectiveKind::QMatched {
            match self.q_lb_ref {
                Some(q) if q > 0.0 && q.is_finite() => {}
                _ => return Err(Error::Config("Q_MATCHED requires q_lb_ref > 0".into())),
            }
        }
        if needs_feed {
            if !(self.z0.norm() > 0.0) {
                return Err(Error::Config("reference impedance Z0 must be nonzero".into()));
            }
            let feed = match self.feed_index {
                Some(f) => f,
                None => bundle
                    .fixed_indices()
                    .into_iter()
                    .find(|&i| v[i].norm() > 0.0)
                    .ok_or_else(|| Error::Config("no excited fixed DOF to act as feed".into()))?,
            };
            if feed >= bundle.n_dof() || !bundle.fixed[feed] {
                return Err(Error::Config(format!("feed DOF {feed} must be a fixed DOF")));
            }
            spec.feed_index = Some(feed);
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_agents: usize,
    pub max_global_iters: usize,
    /// Relative improvement of the best f below which the global step stops;
    /// 0 disables the test and runs all `max_global_iters` iterations.
    pub eps_glob: f64,
    pub eps_loc: f64,
    pub max_local_iters: usize,
    pub rng_seed: u64,
    pub crossover_rate: f64,
    /// Per-bit mutation probability; `None` means 1/N_opt.
    pub mutation_rate: Option<f64>,
    pub tournament_size: usize,
    pub elitism_count: usize,
    pub init_fill_probability: f64,
    pub refactor_period: usize,
    pub output_dir: Option<std::path::PathBuf>,
    /// Record wall-clock times in traces and logs. Off by default so that logs
    /// are reproducible byte for byte.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_agents: 16,
            max_global_iters: 250,
            eps_glob: 1e-7,
            eps_loc: 1e-7,
            max_local_iters: 100_000,
            rng_seed: 0,
            crossover_rate: 1.0,
            mutation_rate: None,
            tournament_size: 2,
            elitism_count: 1,
            init_fill_probability: 0.5,
            refactor_period: 64,
            output_dir: None,
            timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, r: f64| {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")))
            }
        };
        if self.n_agents < 2 {
            return Err(Error::Config("n_agents must be >= 2".into()));
        }
        if self.max_global_iters < 1 {
            return Err(Error::Config("max_global_iters must be >= 1".into()));
        }
        if !(self.eps_glob >= 0.0 && self.eps_loc >= 0.0) {
            return Err(Error::Config("eps_glob and eps_loc must be >= 0".into()));
        }
        rate("crossover_rate", self.crossover_rate)?;
        if let Some(m) = self.mutation_rate {
            rate("mutation_rate", m)?;
        }
        rate("init_fill_probability", self.init_fill_probability)?;
        if self.tournament_size < 1 {
            return Err(Error::Config("tournament_size must be >= 1".into()));
        }
        if self.elitism_count > self.n_agents {
            return Err(Error::Config("elitism_count cannot exceed n_agents".into()));
        }
        if self.refactor_period < 1 {
            return Err(Error::Config("refactor_period must be >= 1".into()));
        }
        Ok(())
    }

    pub fn mutation_rate_for(&self, n_opt: usize) -> f64 {
        self.mutation_rate
            .unwrap_or_else(|| if n_opt == 0 { 0.0 } else { 1.0 / n_opt as f64 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opgen::{gen_random_passive, RandomPassive};

    fn bundle_with_masks(fixed: Vec<bool>, controllable: Vec<bool>) -> OperatorBundle {
        let mut b = gen_random_passive(&RandomPassive::new(fixed.len(), 3));
        b.fixed = fixed;
        b.controllable = controllable;
        b
    }

    #[test]
    fn materialize_only_fixed_survives() {
        let b = bundle_with_masks(vec![true, false, false, false], vec![false, true, true, true]);
        assert_eq!(materialize(&Word::zeros(3), &b).unwrap(), vec![0]);
    }

    #[test]
    fn materialize_full_structure() {
        let b = bundle_with_masks(vec![true, false, false, false], vec![false, true, true, true]);
        assert_eq!(materialize(&Word::ones(3), &b).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn materialize_direct_definition() {
        let b = bundle_with_masks(vec![true, false, false, false], vec![false, true, true, true]);
        let w: Word = "101".parse().unwrap();
        assert_eq!(materialize(&w, &b).unwrap(), vec![0, 1, 3]);
        assert_eq!(Word::from_enabled(&[0, 1, 3], &b), w);
    }

    #[test]
    fn materialize_length_mismatch() {
        let b = bundle_with_masks(vec![true, false, false, false], vec![false, true, true, true]);
        assert!(matches!(materialize(&Word::ones(2), &b), Err(Error::Config(_))));
    }

    #[test]
    fn materialize_is_injective() {
        let b = bundle_with_masks(
            vec![true, false, false, false, false],
            vec![false, true, true, true, true],
        );
        let mut seen = std::collections::HashSet::new();
        for code in 0..16 {
            let s = materialize(&Word::from_index(code, 4), &b).unwrap();
            assert!(s.contains(&0));
            assert!(seen.insert(s));
        }
    }

    #[test]
    fn mask_overlap_rejected() {
        let b = bundle_with_masks(vec![true, true, false, false], vec![false, true, true, true]);
        let err = b.validate().unwrap_err();
        assert_eq!(err.check(), Some("mask overlap fixed/controllable"));
    }

    #[test]
    fn q_objective_requires_w() {
        let mut b = gen_random_passive(&RandomPassive::new(4, 1));
        b.w = None;
        assert!(matches!(ObjectiveSpec::q().resolve(&b), Err(Error::Missing(_))));
    }

    #[test]
    fn feed_resolves_to_excited_fixed_dof() {
        let b = gen_random_passive(&RandomPassive::new(4, 1));
        let spec = ObjectiveSpec::realized_gain(0, C64::new(1.0, 0.0)).resolve(&b).unwrap();
        assert_eq!(spec.feed_index, Some(0));
    }

    #[test]
    fn word_display_roundtrip() {
        let w = Word::from_index(0b1101, 5);
        assert_eq!(w.to_string(), "10110");
        assert_eq!(w.to_string().parse::<Word>().unwrap(), w);
        assert!("10a".parse::<Word>().is_err());
    }

    #[test]
    fn run_config_rejects_single_agent() {
        let cfg = RunConfig { n_agents: 1, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
