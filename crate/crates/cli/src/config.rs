//! TOML run configuration for `optimize` and `sweep`.

use std::path::{Path, PathBuf};

use memdes::linalg::C64;
use memdes::{Error, ObjectiveKind, ObjectiveSpec, Result, RunConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Bundle path, relative to the config file.
    pub bundle: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub ga: GaSection,
    #[serde(default)]
    pub local: LocalSection,
}

/// A number, or the string "auto" meaning "compute it from the bundle".
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AutoValue {
    Value(f64),
    Keyword(Keyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Auto,
    None,
}

/// Real impedance, or [re, im].
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Impedance {
    Real(f64),
    Complex([f64; 2]),
}

impl Impedance {
    pub fn value(self) -> C64 {
        match self {
            Impedance::Real(r) => C64::new(r, 0.0),
            Impedance::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: String,
    #[serde(default)]
    pub zeta: f64,
    pub z0: Option<Impedance>,
    pub q_lb_ref: Option<AutoValue>,
    #[serde(default)]
    pub field_index: usize,
    pub feed_index: Option<usize>,
    #[serde(default)]
    pub excitation_index: usize,
    /// Bound reported next to the result: a value, "auto" or "none".
    pub bound: Option<AutoValue>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    pub n_agents: Option<usize>,
    pub max_global_iters: Option<usize>,
    pub eps_glob: Option<f64>,
    pub rng_seed: Option<u64>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
    pub tournament_size: Option<usize>,
    pub elitism_count: Option<usize>,
    pub init_fill_probability: Option<f64>,
    pub timing: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSection {
    pub eps_loc: Option<f64>,
    pub max_local_iters: Option<usize>,
    pub refactor_period: Option<usize>,
}

pub struct LoadedConfig {
    pub file: FileConfig,
    pub bundle_path: PathBuf,
    pub run: RunConfig,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let file: FileConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let bundle_path = base.join(&file.bundle);
    let d = RunConfig::default();
    let (ga, local) = (&file.ga, &file.local);
    let run = RunConfig {
        n_agents: ga.n_agents.unwrap_or(d.n_agents),
        max_global_iters: ga.max_global_iters.unwrap_or(d.max_global_iters),
        eps_glob: ga.eps_glob.unwrap_or(d.eps_glob),
        eps_loc: local.eps_loc.unwrap_or(d.eps_loc),
        max_local_iters: local.max_local_iters.unwrap_or(d.max_local_iters),
        rng_seed: ga.rng_seed.unwrap_or(d.rng_seed),
        crossover_rate: ga.crossover_rate.unwrap_or(d.crossover_rate),
        mutation_rate: ga.mutation_rate.or(d.mutation_rate),
        tournament_size: ga.tournament_size.unwrap_or(d.tournament_size),
        elitism_count: ga.elitism_count.unwrap_or(d.elitism_count),
        init_fill_probability: ga.init_fill_probability.unwrap_or(d.init_fill_probability),
        refactor_period: local.refactor_period.unwrap_or(d.refactor_period),
        output_dir: file.output_dir.as_ref().map(|o| base.join(o)),
        timing: ga.timing.unwrap_or(d.timing),
    };
    run.validate()?;
    Ok(LoadedConfig { file, bundle_path, run })
}

/// Objective spec from the config section; `q_lb` supplies the "auto" reference.
pub fn objective_spec(sec: &ObjectiveSection, q_lb: impl FnOnce() -> Result<f64>) -> Result<ObjectiveSpec> {
    let kind: ObjectiveKind = sec.kind.parse()?;
    let mut spec = match kind {
        ObjectiveKind::Q => ObjectiveSpec::q(),
        ObjectiveKind::QMatched => {
            let q = match sec.q_lb_ref {
                Some(AutoValue::Value(v)) => v,
                Some(AutoValue::Keyword(Keyword::Auto)) | None => q_lb()?,
                Some(AutoValue::Keyword(Keyword::None)) => {
                    return Err(Error::Config("q_matched needs q_lb_ref".into()));
                }
            };
            ObjectiveSpec::q_matched(sec.zeta, C64::new(50.0, 0.0), q)
        }
        ObjectiveKind::RealizedGain => ObjectiveSpec::realized_gain(sec.field_index, C64::new(50.0, 0.0)),
        ObjectiveKind::AbsorbedPower => ObjectiveSpec::absorbed_power(),
    };
    if let Some(z) = sec.z0 {
        spec.z0 = z.value();
    }
    spec.zeta = sec.zeta;
    spec.field_index = sec.field_index;
    spec.feed_index = sec.feed_index;
    spec.excitation_index = sec.excitation_index;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
            bundle = "b.opb1"
            [objective]
            kind = "q_matched"
            zeta = 0.5
            z0 = [50.0, 10.0]
            q_lb_ref = "auto"
            bound = "none"
            [ga]
            n_agents = 8
            [local]
            eps_loc = 1e-9
        "#;
        let f: FileConfig = toml::from_str(text).unwrap();
        assert_eq!(f.objective.q_lb_ref, Some(AutoValue::Keyword(Keyword::Auto)));
        assert_eq!(f.objective.bound, Some(AutoValue::Keyword(Keyword::None)));
        let spec = objective_spec(&f.objective, || Ok(3.0)).unwrap();
        assert_eq!(spec.q_lb_ref, Some(3.0));
        assert_eq!(spec.z0, C64::new(50.0, 10.0));
        assert_eq!(spec.zeta, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("bundle = \"b\"\nfoo = 1\n[objective]\nkind = \"q\"\n").is_err());
    }
}
