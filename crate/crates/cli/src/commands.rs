use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use memdes::bounds::{absorbed_power_bound, q_lower_bound, realized_gain_bound, BoundKind, BoundResult};
use memdes::global::{
    best_word_text, frontier_csv, memetic_optimize, pareto_sweep, parse_zeta_spec, read_word_for, RunSummary,
};
use memdes::io::{bundle_hash, decode_bundle_unchecked, format_hash, read_bundle, write_bundle};
use memdes::linalg::C64;
use memdes::local::{sensitivity_csv, sensitivity_map};
use memdes::objectives::Evaluator;
use memdes::opgen::{
    gen_random_passive, gen_random_receiver, gen_rlc_ladder, gen_wire_array, RandomPassive, RandomReceiver,
    RlcLadder, WireArray,
};
use memdes::reanalysis::init_state;
use memdes::{Error, ObjectiveKind, ObjectiveSpec, OperatorBundle, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, AutoValue, Keyword};
use crate::{BoundArgs, Cli, Command, GenKind, Metric, SensitivityArgs};

pub const THREADS_ENV: &str = "MEMDES_THREADS";

/// Thread count: MEMDES_THREADS wins over --threads; `None` means the default pool.
fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let requested = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        ),
        Err(std::env::VarError::NotPresent) => flag,
        Err(e) => return Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
    };
    if requested == Some(0) {
        return Err(Error::Config("thread count must be >= 1".into()));
    }
    Ok(requested)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Bound(args) => cmd_bound(&args),
        Command::Optimize { config, out_dir } => cmd_optimize(&config, out_dir),
        Command::Sweep { config, zeta, out_dir } => cmd_sweep(&config, &zeta, out_dir),
        Command::Inspect { bundle, verify } => cmd_inspect(&bundle, verify),
        Command::Sensitivity(args) => cmd_sensitivity(&args),
    }
}

fn parse_impedance(s: &str) -> Result<C64> {
    let bad = || Error::Config(format!("invalid impedance {s:?}; use re or re,im"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(bad()),
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Logic(format!("json: {e}")))?;
    println!("{text}");
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Logic(format!("json: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_gen(kind: GenKind) -> Result<()> {
    let (bundle, out) = match kind {
        GenKind::Rlc { n, r, l, c, coupling, f, out } => {
            let f = f.unwrap_or_else(|| RlcLadder::resonance(l, c));
            (gen_rlc_ladder(&RlcLadder::uniform(n, r, l, c, coupling, f))?, out)
        }
        GenKind::Random { n, seed, loss, far_field, tm_rows, out } => {
            if n == 0 || !(loss >= 0.0 && loss.is_finite()) {
                return Err(Error::Config("random bundles need n >= 1 and loss >= 0".into()));
            }
            let mut p = RandomPassive::new(n, seed).with_loss(loss).with_far_field(far_field);
            if let Some(rows) = tm_rows {
                p = p.with_tm_projector(rows);
            }
            (gen_random_passive(&p), out)
        }
        GenKind::Receiver { n, chip, seed, out } => {
            if n == 0 || chip > n {
                return Err(Error::Config("receiver needs n >= 1 and chip <= n".into()));
            }
            (gen_random_receiver(&RandomReceiver::new(n, chip, seed)), out)
        }
        GenKind::Wire { ndip, length, spacing, segments, radius, sigma, f, out } => {
            let conductivity = if sigma.eq_ignore_ascii_case("pec") {
                f64::INFINITY
            } else {
                sigma.parse().map_err(|_| Error::Config(format!("invalid conductivity {sigma:?}")))?
            };
            let p = WireArray {
                length_over_lambda: length,
                segments_per_dipole: segments,
                wire_radius: radius,
                conductivity,
                frequency: f,
                ..WireArray::new(ndip, spacing)
            };
            (gen_wire_array(&p)?, out)
        }
    };
    bundle.validate()?;
    write_bundle(&bundle, &out)?;
    println!(
        "wrote {}: {} DOF ({} controllable), hash {}, validation ok",
        out.display(),
        bundle.n_dof(),
        bundle.n_opt(),
        format_hash(bundle_hash(&bundle))
    );
    Ok(())
}

#[derive(Serialize)]
struct BoundOutput<'a> {
    bundle_hash: String,
    kind: BoundKind,
    value: f64,
    multipliers: &'a [f64],
    iterations: usize,
    residuals: &'a [f64],
    no_resonance: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    current: Option<Vec<[f64; 2]>>,
}

fn compute_bound(bundle: &OperatorBundle, args: &BoundArgs) -> Result<BoundResult> {
    match args.metric {
        Metric::Q => q_lower_bound(bundle, args.tm),
        Metric::Gain => realized_gain_bound(bundle, args.field, parse_impedance(&args.z0)?, args.excitation),
        Metric::Pabs => absorbed_power_bound(bundle, args.excitation),
    }
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    let bundle = read_bundle(&args.bundle)?;
    let r = compute_bound(&bundle, args)?;
    print_json(&BoundOutput {
        bundle_hash: format_hash(bundle_hash(&bundle)),
        kind: r.kind,
        value: r.value,
        multipliers: &r.multipliers,
        iterations: r.iterations,
        residuals: &r.residuals,
        no_resonance: r.no_resonance,
        current: args.current.then(|| r.current.iter().map(|z| [z.re, z.im]).collect()),
    })
}

/// Bound matching the objective's metric, for the summary's ratio column.
fn objective_bound(bundle: &OperatorBundle, spec: &ObjectiveSpec, setting: Option<AutoValue>) -> Option<f64> {
    match setting {
        Some(AutoValue::Value(v)) => return Some(v),
        Some(AutoValue::Keyword(Keyword::None)) => return None,
        _ => {}
    }
    let result = match spec.kind {
        ObjectiveKind::Q => q_lower_bound(bundle, false),
        ObjectiveKind::RealizedGain => realized_gain_bound(bundle, spec.field_index, spec.z0, spec.excitation_index),
        ObjectiveKind::AbsorbedPower => absorbed_power_bound(bundle, spec.excitation_index),
        ObjectiveKind::QMatched => return None,
    };
    match result {
        Ok(r) => Some(r.value),
        Err(e) => {
            warn!("bound not available: {e}");
            None
        }
    }
}

fn output_dir(flag: Option<PathBuf>, config: Option<&PathBuf>) -> Result<PathBuf> {
    let dir = flag.or_else(|| config.cloned()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_run(config_path: &Path) -> Result<(config::LoadedConfig, OperatorBundle, ObjectiveSpec)> {
    let cfg = config::load(config_path)?;
    let bundle = read_bundle(&cfg.bundle_path)?;
    let spec = config::objective_spec(&cfg.file.objective, || q_lower_bound(&bundle, false).map(|r| r.value))?;
    let spec = spec.resolve(&bundle)?;
    Ok((cfg, bundle, spec))
}

fn cmd_optimize(config_path: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let (cfg, bundle, spec) = load_run(config_path)?;
    let dir = output_dir(out_dir, cfg.run.output_dir.as_ref())?;
    info!("optimizing {} with {} agents", cfg.bundle_path.display(), cfg.run.n_agents);
    let start = Instant::now();
    let result = memetic_optimize(&bundle, &spec, &cfg.run)?;
    let wall = start.elapsed().as_secs_f64();
    let bound = objective_bound(&bundle, &spec, cfg.file.objective.bound);
    let summary = RunSummary::new(&bundle, &spec, &cfg.run, &result, bound, wall);
    std::fs::write(dir.join("convergence.csv"), result.log_csv())?;
    std::fs::write(dir.join("best_word.txt"), best_word_text(&bundle, &result.best.word))?;
    write_json(&dir.join("summary.json"), &summary)?;
    print_json(&summary)
}

fn cmd_sweep(config_path: &Path, zeta: &str, out_dir: Option<PathBuf>) -> Result<()> {
    let zetas = parse_zeta_spec(zeta)?;
    let (cfg, bundle, spec) = load_run(config_path)?;
    if spec.kind != ObjectiveKind::QMatched {
        return Err(Error::Config("sweep needs objective kind = \"q_matched\"".into()));
    }
    let dir = output_dir(out_dir, cfg.run.output_dir.as_ref())?;
    let start = Instant::now();
    let points = pareto_sweep(&bundle, &spec, &zetas, &cfg.run)?;
    let wall = start.elapsed().as_secs_f64();
    let runs: Vec<_> = points
        .iter()
        .map(|p| {
            let spec = ObjectiveSpec { zeta: p.zeta, ..spec.clone() };
            json!({
                "zeta": p.zeta,
                "q_over_qlb": p.q_over_qlb,
                "gamma_sq": p.gamma_sq,
                "dominated": p.dominated,
                "summary": RunSummary::new(&bundle, &spec, &cfg.run, &p.result, None, 0.0),
            })
        })
        .collect();
    std::fs::write(dir.join("frontier.csv"), frontier_csv(&points))?;
    let report = json!({
        "bundle_hash": format_hash(bundle_hash(&bundle)),
        "q_lb_ref": spec.q_lb_ref,
        "samples": points.len(),
        "nondominated": points.iter().filter(|p| !p.dominated).count(),
        "wall_time_s": wall,
        "runs": runs,
    });
    write_json(&dir.join("sweep.json"), &report)?;
    print!("{}", frontier_csv(&points));
    Ok(())
}

fn cmd_inspect(path: &Path, verify: bool) -> Result<()> {
    let bytes = std::fs::read(path)?;
    let b = decode_bundle_unchecked(&bytes)?;
    if verify {
        b.validate()?;
    }
    print_json(&json!({
        "bundle_hash": format_hash(bundle_hash(&b)),
        "n_dof": b.n_dof(),
        "n_opt": b.n_opt(),
        "fixed": b.fixed_indices(),
        "chip": b.chip.as_ref().map(|_| b.chip_indices()),
        "has_w": b.w.is_some(),
        "has_r_rho": b.r_rho.is_some(),
        "far_field_rows": b.far_field.len(),
        "excitations": b.excitations.len(),
        "tm_projector_rows": b.tm_projector.as_ref().map(|u| u.nrows()),
        "frequency": b.meta.frequency,
        "wavenumber": b.meta.wavenumber,
        "radius": b.meta.radius,
        "ka": b.meta.ka(),
        "validation": if verify { "ok" } else { "skipped" },
    }))
}

fn cmd_sensitivity(args: &SensitivityArgs) -> Result<()> {
    let bundle = read_bundle(&args.bundle)?;
    let word = read_word_for(&bundle, &args.word)?;
    let kind: ObjectiveKind = args.objective.parse()?;
    let z0 = parse_impedance(&args.z0)?;
    let mut spec = match kind {
        ObjectiveKind::Q => ObjectiveSpec::q(),
        ObjectiveKind::QMatched => {
            let q = match args.q_lb_ref {
                Some(q) => q,
                None => q_lower_bound(&bundle, false)?.value,
            };
            ObjectiveSpec::q_matched(args.zeta, z0, q)
        }
        ObjectiveKind::RealizedGain => ObjectiveSpec::realized_gain(args.field, z0),
        ObjectiveKind::AbsorbedPower => ObjectiveSpec::absorbed_power(),
    };
    spec.feed_index = args.feed;
    let eval = Evaluator::new(&bundle, &spec)?;
    let mut state = init_state(&eval, &word, 64)?;
    let csv = sensitivity_csv(&sensitivity_map(&mut state));
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
