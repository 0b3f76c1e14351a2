//! Memetic global step: a binary GA whose offspring are all driven to local
//! minima by the exact-reanalysis descent, plus the ζ-sweep on top of it.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{bundle_hash, format_hash};
use crate::linalg::C64;
use crate::local::{local_search, Stopwatch};
use crate::model::{ObjectiveKind, ObjectiveSpec, OperatorBundle, RunConfig, Word};
use crate::objectives::{eval_gamma, eval_q, Evaluator};
use crate::reanalysis::{init_state, Counters};

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub word: Word,
    pub f: f64,
    /// Whether the word has been through the local step.
    pub local_minimum: bool,
    /// Commits made by the local step that produced this agent.
    pub local_commits: usize,
    /// Candidate evaluations spent producing this agent.
    pub counters: Counters,
    /// (iteration, agent index) of the RNG stream that created the word.
    pub stream: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub agent: usize,
    pub f: f64,
    pub word: Word,
    pub hamming_mean: f64,
    pub removals_cum: u64,
    pub additions_cum: u64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub iter: usize,
    pub best_f: f64,
    pub mean_f: f64,
    pub best_word: Word,
    pub hamming_mean: f64,
    pub counters: Counters,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalStop {
    MaxIterations,
    Converged,
}

#[derive(Debug, Clone)]
pub struct MemeticResult {
    pub best: Agent,
    pub population: Vec<Agent>,
    pub rows: Vec<LogRow>,
    pub iterations: Vec<IterationSummary>,
    pub counters: Counters,
    pub stop: GlobalStop,
    pub wall_time_s: f64,
}

impl MemeticResult {
    pub fn iterations_run(&self) -> usize {
        self.iterations.len()
    }

    /// Convergence log, one row per agent per iteration.
    pub fn log_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter, r.agent, r.f, r.hamming_mean, r.removals_cum, r.additions_cum, r.elapsed_s
            );
        }
        out
    }
}

pub const LOG_HEADER: &str = "iter,agent,f,hamming_mean,removals_cum,additions_cum,elapsed_s";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG stream of one agent in one iteration, independent of scheduling.
pub fn agent_rng(seed: u64, iter: usize, agent: usize) -> ChaCha8Rng {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ iter as u64) ^ agent as u64);
    ChaCha8Rng::seed_from_u64(h)
}

/// Mean pairwise Hamming distance of a population.
pub fn hamming_mean(words: &[&Word]) -> f64 {
    let n = words.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            sum += words[i].hamming(words[j]);
        }
    }
    sum as f64 / (n * (n - 1) / 2) as f64
}

fn relative_improvement(prev: f64, cur: f64) -> f64 {
    if !prev.is_finite() || !cur.is_finite() {
        return if prev == cur { 0.0 } else { f64::INFINITY };
    }
    if prev == 0.0 {
        return (prev - cur).abs();
    }
    (prev - cur) / prev.abs()
}

/// Evaluates a word from scratch, optionally followed by the local step.
/// Infeasible words score +∞ and are left untouched.
fn develop(eval: &Evaluator, word: Word, config: &RunConfig, optimize: bool, stream: (usize, usize)) -> Result<Agent> {
    let mut state = match init_state(eval, &word, config.refactor_period) {
        Ok(s) => s,
        Err(Error::Infeasible(_)) => {
            return Ok(Agent {
                word,
                f: f64::INFINITY,
                local_minimum: optimize,
                local_commits: 0,
                counters: Counters::default(),
                stream,
            })
        }
        Err(e) => return Err(e),
    };
    let mut commits = 0;
    if optimize {
        let trace = local_search(&mut state, config.eps_loc, config.max_local_iters, false)?;
        commits = trace.commits();
    }
    Ok(Agent {
        word: state.word(),
        f: state.f_val(),
        local_minimum: optimize,
        local_commits: commits,
        counters: state.counters(),
        stream,
    })
}

fn order_by_fitness(pop: &[Agent]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| pop[a].f.total_cmp(&pop[b].f).then(a.cmp(&b)));
    idx
}

fn tournament(pop: &[Agent], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..size {
        let c = rng.gen_range(0..pop.len());
        if pop[c].f.total_cmp(&pop[best].f).then(c.cmp(&best)).is_lt() {
            best = c;
        }
    }
    best
}

fn offspring(pop: &[Agent], config: &RunConfig, mutation: f64, rng: &mut ChaCha8Rng) -> Word {
    let p1 = tournament(pop, config.tournament_size, rng);
    let p2 = tournament(pop, config.tournament_size, rng);
    let (a, b) = (pop[p1].word.bits(), pop[p2].word.bits());
    let crossover = rng.gen_bool(config.crossover_rate);
    let mut bits: Vec<bool> = if crossover {
        a.iter().zip(b).map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y }).collect()
    } else {
        a.to_vec()
    };
    for bit in &mut bits {
        if rng.gen_bool(mutation) {
            *bit = !*bit;
        }
    }
    Word::new(bits)
}

/// Runs the memetic optimizer. Agents of one iteration are developed in
/// parallel with per-agent RNG streams, so results do not depend on the
/// number of worker threads.
pub fn memetic_optimize(bundle: &OperatorBundle, spec: &ObjectiveSpec, config: &RunConfig) -> Result<MemeticResult> {
    config.validate()?;
    let eval = Evaluator::new(bundle, spec)?;
    let n_opt = bundle.n_opt();
    let mutation = config.mutation_rate_for(n_opt);
    let clock = Stopwatch::new(config.timing);
    let n = config.n_agents;

    let mut population: Vec<Agent> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut rng = agent_rng(config.rng_seed, 1, a);
            let word = Word::new((0..n_opt).map(|_| rng.gen_bool(config.init_fill_probability)).collect());
            develop(&eval, word, config, false, (1, a))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut iterations = Vec::new();
    let mut total = Counters::default();
    let mut stop = GlobalStop::MaxIterations;
    let mut prev_best = f64::NAN;
    for iter in 1..=config.max_global_iters {
        if iter > 1 {
            let order = order_by_fitness(&population);
            let elites: Vec<usize> = order[..config.elitism_count].to_vec();
            let previous = population.clone();
            population = (0..n)
                .into_par_iter()
                .map(|a| {
                    if a < elites.len() {
                        let elite = &previous[elites[a]];
                        if elite.local_minimum {
                            return Ok(Agent { counters: Counters::default(), local_commits: 0, ..elite.clone() });
                        }
                        return develop(&eval, elite.word.clone(), config, true, elite.stream);
                    }
                    let mut rng = agent_rng(config.rng_seed, iter, a);
                    let word = offspring(&previous, config, mutation, &mut rng);
                    develop(&eval, word, config, true, (iter, a))
                })
                .collect::<Result<_>>()?;
        }

        let words: Vec<&Word> = population.iter().map(|a| &a.word).collect();
        let diversity = hamming_mean(&words);
        let elapsed = clock.elapsed_s();
        for (a, agent) in population.iter().enumerate() {
            total.removals_evaluated += agent.counters.removals_evaluated;
            total.additions_evaluated += agent.counters.additions_evaluated;
            rows.push(LogRow {
                iter,
                agent: a,
                f: agent.f,
                word: agent.word.clone(),
                hamming_mean: diversity,
                removals_cum: total.removals_evaluated,
                additions_cum: total.additions_evaluated,
                elapsed_s: elapsed,
            });
        }
        let best = order_by_fitness(&population)[0];
        let finite: Vec<f64> = population.iter().map(|a| a.f).filter(|f| f.is_finite()).collect();
        let mean_f = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let best_f = population[best].f;
        iterations.push(IterationSummary {
            iter,
            best_f,
            mean_f,
            best_word: population[best].word.clone(),
            hamming_mean: diversity,
            counters: total,
            elapsed_s: elapsed,
        });
        if iter > 1 && config.eps_glob > 0.0 && relative_improvement(prev_best, best_f) < config.eps_glob {
            stop = GlobalStop::Converged;
            break;
        }
        prev_best = best_f;
    }

    let best = population[order_by_fitness(&population)[0]].clone();
    Ok(MemeticResult {
        best,
        population,
        rows,
        iterations,
        counters: total,
        stop,
        wall_time_s: clock.elapsed_s(),
    })
}

/// One row of the run table: final value, bound ratio, counters and time.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub bundle_hash: String,
    pub objective: &'static str,
    pub zeta: f64,
    pub n_dof: usize,
    pub n_opt: usize,
    pub n_agents: usize,
    pub rng_seed: u64,
    /// Signed objective value that was minimized.
    pub final_f: f64,
    /// Physical metric of the best word (Q, G_r or P_abs).
    pub final_metric: f64,
    /// Best metric among the random words of iteration 1.
    pub initial_metric: f64,
    pub bound: Option<f64>,
    /// final_metric / bound.
    pub f_over_bound: Option<f64>,
    pub removals_evaluated: u64,
    pub additions_evaluated: u64,
    pub candidate_evaluations: u64,
    pub global_iterations: usize,
    pub stop: GlobalStop,
    pub wall_time_s: f64,
    pub best_word: String,
}

impl RunSummary {
    pub fn new(
        bundle: &OperatorBundle,
        spec: &ObjectiveSpec,
        config: &RunConfig,
        result: &MemeticResult,
        bound: Option<f64>,
        wall_time_s: f64,
    ) -> Self {
        let metric = |f: f64| f * spec.sign;
        let final_metric = metric(result.best.f);
        RunSummary {
            bundle_hash: format_hash(bundle_hash(bundle)),
            objective: spec.kind.name(),
            zeta: spec.zeta,
            n_dof: bundle.n_dof(),
            n_opt: bundle.n_opt(),
            n_agents: config.n_agents,
            rng_seed: config.rng_seed,
            final_f: result.best.f,
            final_metric,
            initial_metric: result.iterations.first().map_or(f64::NAN, |s| metric(s.best_f)),
            bound,
            f_over_bound: bound.map(|b| final_metric / b),
            removals_evaluated: result.counters.removals_evaluated,
            additions_evaluated: result.counters.additions_evaluated,
            candidate_evaluations: result.counters.total(),
            global_iterations: result.iterations_run(),
            stop: result.stop,
            wall_time_s,
            best_word: result.best.word.to_string(),
        }
    }
}

/// Best-word file: a header naming the bundle hash, then the 0/1 word.
pub fn best_word_text(bundle: &OperatorBundle, word: &Word) -> String {
    format!("# bundle {}\n{}\n", format_hash(bundle_hash(bundle)), word)
}

/// Parses a best-word file; returns the header hash (if any) and the word.
pub fn parse_best_word(text: &str) -> Result<(Option<String>, Word)> {
    let mut hash = None;
    let mut word = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(h) = rest.trim().strip_prefix("bundle") {
                hash = Some(h.trim().to_string());
            }
        } else if word.is_none() {
            word = Some(line.parse::<Word>()?);
        } else {
            return Err(Error::Format("best-word file has more than one word line".into()));
        }
    }
    let word = word.ok_or_else(|| Error::Format("best-word file has no word line".into()))?;
    Ok((hash, word))
}

pub fn read_best_word(path: impl AsRef<Path>) -> Result<(Option<String>, Word)> {
    parse_best_word(&std::fs::read_to_string(path)?)
}

/// Reads a word file for `bundle`, rejecting a mismatched hash or length.
pub fn read_word_for(bundle: &OperatorBundle, path: impl AsRef<Path>) -> Result<Word> {
    let (hash, word) = read_best_word(path)?;
    if let Some(h) = hash {
        let expect = format_hash(bundle_hash(bundle));
        if h != expect {
            return Err(Error::validation("bundle hash", format!("word file names bundle {h}, expected {expect}")));
        }
    }
    if word.len() != bundle.n_opt() {
        return Err(Error::validation(
            "word length",
            format!("word has {} bits, bundle has {} controllable DOF", word.len(), bundle.n_opt()),
        ));
    }
    Ok(word)
}

/// ζ values from "a:b:n" (n equidistant samples) or a comma list.
pub fn parse_zeta_spec(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("invalid zeta spec {spec:?}; use a:b:n or a comma list"));
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        match n {
            0 => return Err(bad()),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if values.is_empty() || values.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::Config(format!("zeta values must be finite and >= 0: {spec:?}")));
    }
    Ok(values)
}

#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub zeta: f64,
    pub f: f64,
    pub q_over_qlb: f64,
    pub gamma_sq: f64,
    pub word: Word,
    pub dominated: bool,
    pub result: MemeticResult,
}

/// Flags points dominated in the minimize-both sense. Equal points do not
/// dominate each other.
pub fn dominated_flags(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(x, y)| {
            points
                .iter()
                .any(|&(u, v)| u <= x && v <= y && (u < x || v < y))
        })
        .collect()
}

/// Runs the optimizer once per ζ with the Q + matching objective and marks
/// the nondominated points in the (Q/Q_lb, |Γ|²) plane.
pub fn pareto_sweep(
    bundle: &OperatorBundle,
    template: &ObjectiveSpec,
    zetas: &[f64],
    config: &RunConfig,
) -> Result<Vec<ParetoPoint>> {
    if zetas.is_empty() {
        return Err(Error::Config("zeta list is empty".into()));
    }
    if template.kind != ObjectiveKind::QMatched {
        return Err(Error::Config("pareto sweep requires the q_matched objective".into()));
    }
    let base = template.resolve(bundle)?;
    let q_lb = base.q_lb_ref.expect("resolved");
    let feed = base.feed_index.expect("resolved");
    let z0: C64 = base.z0;
    let v = &bundle.excitations[base.excitation_index];
    let mut points = Vec::with_capacity(zetas.len());
    for &zeta in zetas {
        let spec = ObjectiveSpec { zeta, ..base.clone() };
        let result = memetic_optimize(bundle, &spec, config)?;
        let eval = Evaluator::new(bundle, &spec)?;
        let (q_over_qlb, gamma_sq) = match init_state(&eval, &result.best.word, config.refactor_period) {
            Ok(state) => {
                let current = state.full_current();
                let q = eval_q(&current, bundle).map(|b| b.q).unwrap_or(f64::INFINITY);
                (q / q_lb, eval_gamma(&current, v, feed, z0).mismatch())
            }
            Err(_) => (f64::INFINITY, 1.0),
        };
        points.push(ParetoPoint {
            zeta,
            f: result.best.f,
            q_over_qlb,
            gamma_sq,
            word: result.best.word.clone(),
            dominated: false,
            result,
        });
    }
    let flags = dominated_flags(&points.iter().map(|p| (p.q_over_qlb, p.gamma_sq)).collect::<Vec<_>>());
    for (p, d) in points.iter_mut().zip(flags) {
        p.dominated = d;
    }
    Ok(points)
}

pub const FRONTIER_HEADER: &str = "zeta,q_over_qlb,gamma_sq,dominated";

pub fn frontier_csv(points: &[ParetoPoint]) -> String {
    let mut out = String::from(FRONTIER_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.zeta, p.q_over_qlb, p.gamma_sq, u8::from(p.dominated));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opgen::{gen_random_passive, RandomPassive};
    use crate::oracle::enumerate_optimum;

    fn small_config(seed: u64) -> RunConfig {
        RunConfig { n_agents: 8, max_global_iters: 20, rng_seed: seed, ..RunConfig::default() }
    }

    #[test]
    fn dominance_drops_interior_point() {
        let flags = dominated_flags(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0), (3.0, 3.0)]);
        assert_eq!(flags, vec![false, false, false, true]);
        assert_eq!(dominated_flags(&[(2.0, 2.0), (2.0, 2.0)]), vec![false, false]);
    }

    #[test]
    fn zeta_spec_parsing() {
        let z = parse_zeta_spec("0:5:41").unwrap();
        assert_eq!(z.len(), 41);
        assert_eq!(z[0], 0.0);
        assert_eq!(z[40], 5.0);
        assert_eq!(parse_zeta_spec("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_zeta_spec("1, 2").unwrap(), vec![1.0, 2.0]);
        assert!(parse_zeta_spec("0:1").is_err());
        assert!(parse_zeta_spec("-1").is_err());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = agent_rng(1, 2, 3).gen();
        assert_eq!(a, agent_rng(1, 2, 3).gen::<u64>());
        assert_ne!(a, agent_rng(1, 3, 2).gen::<u64>());
        assert_ne!(a, agent_rng(2, 2, 3).gen::<u64>());
    }

    #[test]
    fn best_is_monotone_and_never_below_optimum() {
        let b = gen_random_passive(&RandomPassive::new(9, 4));
        let spec = ObjectiveSpec::q();
        let (_, opt) = enumerate_optimum(&b, &spec).unwrap();
        let r = memetic_optimize(&b, &spec, &small_config(7)).unwrap();
        assert!(r.best.f >= opt * (1.0 - 1e-9));
        assert!(r.iterations.windows(2).all(|w| w[1].best_f <= w[0].best_f));
        let n_opt = b.n_opt() as f64;
        assert!(r.iterations.iter().all(|s| s.hamming_mean >= 0.0 && s.hamming_mean <= n_opt));
        let last = r.rows.last().unwrap();
        assert_eq!(last.removals_cum, r.counters.removals_evaluated);
        assert_eq!(last.additions_cum, r.counters.additions_evaluated);
    }

    #[test]
    fn stationary_population_keeps_best() {
        let b = gen_random_passive(&RandomPassive::new(8, 1));
        let n = 6;
        let cfg = RunConfig {
            n_agents: n,
            max_global_iters: 6,
            crossover_rate: 0.0,
            mutation_rate: Some(0.0),
            elitism_count: n,
            eps_glob: 1e-300,
            ..RunConfig::default()
        };
        let r = memetic_optimize(&b, &ObjectiveSpec::q(), &cfg).unwrap();
        let after: Vec<f64> = r.iterations.iter().skip(1).map(|s| s.best_f).collect();
        assert!(after.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn best_word_file_round_trip() {
        let b = gen_random_passive(&RandomPassive::new(5, 2));
        let w: Word = "1010".parse().unwrap();
        let text = best_word_text(&b, &w);
        let (hash, back) = parse_best_word(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(hash.unwrap(), format_hash(bundle_hash(&b)));
    }
}
