//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::time::Instant;

use memdes::bounds::{
    absorbed_power_bound, absorbed_power_problem, q_lower_bound, q_problem, realized_gain_bound,
    realized_gain_problem, BoundKind,
};
use memdes::global::{dominated_flags, memetic_optimize, pareto_sweep};
use memdes::io::{decode_bundle, encode_bundle};
use memdes::linalg::{rel_err, C64};
use memdes::local::local_search;
use memdes::objectives::{eval_gamma, eval_q, Evaluator};
use memdes::opgen::{
    gen_random_passive, gen_random_receiver, gen_rlc_ladder, gen_wire_array, RandomPassive, RandomReceiver,
    RlcLadder, WireArray,
};
use memdes::oracle::{dense_objective, dense_solve, enumerate_all, enumerate_optimum, sample_feasible_bound_oracle};
use memdes::reanalysis::{init_state, Move};
use memdes::{materialize, ObjectiveSpec, OperatorBundle, RunConfig, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {id:2} {}: {name} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {name}: {detail}");
}

fn random_word(rng: &mut ChaCha8Rng, n: usize) -> Word {
    Word::new((0..n).map(|_| rng.gen_bool(0.5)).collect())
}

fn toggled(word: &Word, ctrl_pos: usize) -> Word {
    let mut w = word.clone();
    w.flip(ctrl_pos);
    w
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[test]
fn criterion_01_incremental_currents_match_dense_solve() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut steps = 0;
    for seed in 0..200u64 {
        let b = gen_random_passive(&RandomPassive::new(40, seed));
        let eval = Evaluator::new(&b, &ObjectiveSpec::q()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut state = init_state(&eval, &random_word(&mut rng, b.n_opt()), 64).unwrap();
        for _ in 0..200 {
            let dof = rng.gen_range(1..b.n_dof());
            let mv = if state.enabled().binary_search(&dof).is_ok() { Move::Remove(dof) } else { Move::Add(dof) };
            if state.commit(mv).is_err() {
                continue;
            }
            steps += 1;
            let dense = dense_solve(&b, &state.word(), 0).unwrap();
            worst = worst.max(rel_err(&state.full_current(), &dense));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "incremental currents equal dense solves on 200 random walks",
        worst <= 1e-9 && secs < 60.0,
        format!("{steps} commits, worst rel err {worst:.2e}, {secs:.1} s"),
    );
}

#[test]
fn criterion_02_sensitivities_match_from_scratch() {
    let mut worst = 0.0f64;
    let mut count = 0;
    for seed in 0..20u64 {
        let b = gen_random_passive(&RandomPassive::new(25, 50 + seed));
        let spec = ObjectiveSpec::q();
        let eval = Evaluator::new(&b, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let word = random_word(&mut rng, b.n_opt());
        let mut state = init_state(&eval, &word, 64).unwrap();
        let f = dense_objective(&b, &spec, &word).unwrap();
        let ctrl = b.controllable_indices();
        for s in state.evaluate_candidates() {
            let pos = ctrl.binary_search(&s.mv.dof()).unwrap();
            let reference = dense_objective(&b, &spec, &toggled(&word, pos)).unwrap() - f;
            worst = worst.max((s.tau - reference).abs() / f.abs().max(1.0));
            count += 1;
        }
    }
    report(2, "tau from batched candidates equals from-scratch perturbation", worst <= 1e-9, format!("{count} candidates, worst {worst:.2e}"));
}

#[test]
fn criterion_03_local_search_is_monotone_and_one_swap_optimal() {
    let cfg = RunConfig::default();
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let b = gen_random_passive(&RandomPassive::new(13, 300 + seed));
        let spec = ObjectiveSpec::q();
        let eval = Evaluator::new(&b, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = init_state(&eval, &random_word(&mut rng, b.n_opt()), cfg.refactor_period).unwrap();
        let trace = local_search(&mut state, cfg.eps_loc, cfg.max_local_iters, false).unwrap();
        let monotone = trace.entries.windows(2).all(|w| w[1].f <= w[0].f);
        let word = state.word();
        let f = dense_objective(&b, &spec, &word).unwrap();
        let optimal = (0..word.len()).all(|k| dense_objective(&b, &spec, &toggled(&word, k)).unwrap() >= f * (1.0 - 1e-9));
        if !(monotone && optimal) {
            failures.push(seed);
        }
    }
    report(3, "local search traces non-increasing and 1-swap optimal", failures.is_empty(), format!("50 bundles, failing seeds {failures:?}"));
}

#[test]
fn criterion_04_memetic_reaches_enumerated_optimum() {
    let mut hits = 0;
    let mut below = 0;
    let mut runs = 0;
    let mut evals = 0u64;
    for bundle_seed in 0..5u64 {
        let b = gen_random_passive(&RandomPassive::new(15, 700 + bundle_seed));
        let spec = ObjectiveSpec::q();
        let (_, opt) = enumerate_optimum(&b, &spec).unwrap();
        for run in 0..10u64 {
            let cfg = RunConfig { n_agents: 16, max_global_iters: 50, rng_seed: run, ..RunConfig::default() };
            let r = memetic_optimize(&b, &spec, &cfg).unwrap();
            runs += 1;
            evals += r.counters.total();
            println!(
                "  bundle {bundle_seed} run {run}: f={:.9e} opt={opt:.9e} iters={} removals={} additions={}",
                r.best.f,
                r.iterations_run(),
                r.counters.removals_evaluated,
                r.counters.additions_evaluated
            );
            if close(r.best.f, opt, 1e-9) {
                hits += 1;
            } else if r.best.f < opt {
                below += 1;
            }
        }
    }
    let rate = hits as f64 / runs as f64;
    report(
        4,
        "memetic optimum equals enumeration in >= 80% of runs, never below",
        rate >= 0.8 && below == 0,
        format!("{hits}/{runs} hits, {below} below, {evals} candidate evaluations"),
    );
}

#[test]
fn criterion_05_single_rlc_cell_at_resonance() {
    let (r, l, c) = (2.0, 1e-7, 1e-11);
    let f0 = RlcLadder::resonance(l, c);
    let b = gen_rlc_ladder(&RlcLadder::uniform(1, r, l, c, 0.0, f0)).unwrap();
    let expect = 2.0 * std::f64::consts::PI * f0 * l / r;
    let i = dense_solve(&b, &Word::zeros(0), 0).unwrap();
    let q = eval_q(&i, &b).unwrap().q;
    let lb = q_lower_bound(&b, false).unwrap().value;
    report(
        5,
        "RLC cell Q and Q bound equal omega0 L / R",
        close(q, expect, 1e-10) && close(lb, expect, 1e-10),
        format!("Q={q:.12e}, Q_lb={lb:.12e}, expected {expect:.12e}"),
    );
}

fn gain_z0() -> C64 {
    C64::new(50.0, 0.0)
}

#[test]
fn criterion_06_bounds_dominate_designs() {
    let mut msgs = Vec::new();
    let mut ok = true;

    // Q bound below every word
    let mut worst_q = f64::INFINITY;
    for seed in 0..5u64 {
        let b = gen_random_passive(&RandomPassive::new(13, 900 + seed).with_tm_projector(6));
        let lb = q_lower_bound(&b, false).unwrap().value;
        let lb_tm = q_lower_bound(&b, true).unwrap().value;
        let all = enumerate_all(&b, &ObjectiveSpec::q()).unwrap();
        let min = all.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_q = worst_q.min(min / lb - 1.0);
        if min < lb * (1.0 - 1e-9) || lb > lb_tm * (1.0 + 1e-9) {
            ok = false;
            msgs.push(format!("seed {seed}: Q_lb {lb:.6e} Q_lb_tm {lb_tm:.6e} min Q {min:.6e}"));
        }
    }
    msgs.push(format!("min Q/Q_lb - 1 = {worst_q:.3e}"));

    // realized gain bound above designs
    let cfg = RunConfig { n_agents: 8, max_global_iters: 10, ..RunConfig::default() };
    let mut worst_g = 0.0f64;
    for seed in 0..3u64 {
        let b = gen_random_passive(&RandomPassive::new(10, 950 + seed));
        let bound = realized_gain_bound(&b, 0, gain_z0(), 0).unwrap().value;
        let spec = ObjectiveSpec::realized_gain(0, gain_z0());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..100)
            .filter_map(|_| dense_objective(&b, &spec, &random_word(&mut rng, b.n_opt())).ok())
            .map(|f| -f)
            .collect();
        values.push(-memetic_optimize(&b, &spec, &cfg).unwrap().best.f);
        let top = values.iter().cloned().fold(0.0, f64::max);
        worst_g = worst_g.max(top / bound);
        if top > bound * (1.0 + 1e-6) {
            ok = false;
            msgs.push(format!("gain seed {seed}: design {top:.6e} > bound {bound:.6e}"));
        }
    }
    msgs.push(format!("max G_r/bound = {worst_g:.4}"));

    // the wire array design stays below its own bound
    let (wire, wire_best, _) = optimize_array(0.25);
    let wire_bound = realized_gain_bound(&wire, 0, WIRE_Z0, 0).unwrap().value;
    if wire_best > wire_bound * (1.0 + 1e-6) {
        ok = false;
    }
    msgs.push(format!("wire array G_r {:.2} dB vs bound {:.2} dB", db(wire_best), db(wire_bound)));

    // absorbed power bound above designs
    let mut worst_p = 0.0f64;
    for seed in 0..3u64 {
        let b = gen_random_receiver(&RandomReceiver::new(12, 2, 970 + seed));
        let bound = absorbed_power_bound(&b, 0).unwrap().value;
        let spec = ObjectiveSpec::absorbed_power();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..100)
            .filter_map(|_| dense_objective(&b, &spec, &random_word(&mut rng, b.n_opt())).ok())
            .map(|f| -f)
            .collect();
        values.push(-memetic_optimize(&b, &spec, &cfg).unwrap().best.f);
        let top = values.iter().cloned().fold(0.0, f64::max);
        worst_p = worst_p.max(top / bound);
        if top > bound * (1.0 + 1e-6) {
            ok = false;
            msgs.push(format!("absorbed seed {seed}: design {top:.6e} > bound {bound:.6e}"));
        }
    }
    msgs.push(format!("max P_abs/bound = {worst_p:.4}"));
    report(6, "Q, realized gain and absorbed power bounds dominate designs", ok, msgs.join("; "));
}

#[test]
fn criterion_07_bounds_agree_with_sampling_oracle() {
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let n = 3 + seed as usize;
        let b = gen_random_passive(&RandomPassive::new(n, 1100 + seed));
        let q = q_lower_bound(&b, false).unwrap().value;
        let qs = sample_feasible_bound_oracle(&b, &q_problem(&b, false).unwrap(), 0, 400, seed).unwrap();
        let g = realized_gain_bound(&b, 0, gain_z0(), 0).unwrap().value;
        let gs = sample_feasible_bound_oracle(&b, &realized_gain_problem(&b, 0, gain_z0(), 0).unwrap(), 0, 400, seed).unwrap();
        let r = gen_random_receiver(&RandomReceiver::new(n, 1, 1200 + seed));
        let p = absorbed_power_bound(&r, 0).unwrap().value;
        let ps = sample_feasible_bound_oracle(&r, &absorbed_power_problem(&r, 0).unwrap(), 0, 400, seed).unwrap();
        for (kind, exact, sampled) in [(BoundKind::Q, q, qs), (BoundKind::RealizedGain, g, gs), (BoundKind::AbsorbedPower, p, ps)] {
            let gap = (exact - sampled).abs() / exact.abs();
            worst = worst.max(gap);
            lines.push(format!("n={n} {}: {gap:.2e}", kind.name()));
        }
    }
    report(7, "bound solvers agree with feasible-set sampling within 0.5%", worst <= 5e-3, lines.join(", "));
}

fn realized_gain_of(b: &OperatorBundle, word: &Word, z0: C64) -> f64 {
    -dense_objective(b, &ObjectiveSpec::realized_gain(0, z0), word).unwrap()
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

const WIRE_Z0: C64 = C64::new(50.0, 0.0);

fn optimize_array(spacing: f64) -> (OperatorBundle, f64, f64) {
    let b = gen_wire_array(&WireArray::new(3, spacing)).unwrap();
    let cfg = RunConfig { n_agents: 16, max_global_iters: 50, rng_seed: 1, init_fill_probability: 0.9, ..RunConfig::default() };
    let r = memetic_optimize(&b, &ObjectiveSpec::realized_gain(0, WIRE_Z0), &cfg).unwrap();
    let full = realized_gain_of(&b, &Word::ones(b.n_opt()), WIRE_Z0);
    (b, -r.best.f, full)
}

#[test]
fn criterion_08_wire_array_gain_improves() {
    let start = Instant::now();
    let (_, best, full) = optimize_array(0.25);
    let single = gen_wire_array(&WireArray::new(1, 0.25)).unwrap();
    let dipole = realized_gain_of(&single, &Word::ones(single.n_opt()), WIRE_Z0);
    let spacings = [0.1, 0.2, 0.3, 0.4, 0.5];
    let sweep: Vec<f64> = spacings.iter().map(|&d| optimize_array(d).1).collect();
    let imax = (0..sweep.len()).max_by(|&a, &b| sweep[a].total_cmp(&sweep[b])).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = db(best) - db(full) >= 1.0 && db(best) - db(dipole) >= 1.0 && imax > 0 && imax + 1 < sweep.len() && secs < 600.0;
    let sweep_db: Vec<String> = sweep.iter().map(|g| format!("{:.2}", db(*g))).collect();
    report(
        8,
        "optimized 3-element array beats full array and single dipole by 1 dB, interior spacing optimum",
        ok,
        format!(
            "G_r opt {:.2} dB, full array {:.2} dB, dipole {:.2} dB, sweep {:?} dB, {secs:.0} s",
            db(best),
            db(full),
            db(dipole),
            sweep_db
        ),
    );
}

/// Reference impedance equal to the resistance of the word whose input
/// impedance is closest to real, so that matching is attainable.
fn matchable_z0(b: &OperatorBundle) -> C64 {
    let mut best = (f64::INFINITY, C64::new(1.0, 0.0));
    for code in 0..(1u64 << b.n_opt()) {
        let w = Word::from_index(code, b.n_opt());
        let Ok(i) = dense_solve(b, &w, 0) else { continue };
        let zin = b.excitations[0][0] / i[0];
        let ratio = (zin.im / zin.re).abs();
        if zin.re > 0.0 && ratio < best.0 {
            best = (ratio, C64::new(zin.re, 0.0));
        }
    }
    best.1
}

#[test]
fn criterion_09_zeta_sweep_frontier() {
    let b = gen_random_passive(&RandomPassive::new(15, 1500));
    let z0 = matchable_z0(&b);
    let q_lb = q_lower_bound(&b, false).unwrap().value;
    let zetas: Vec<f64> = (0..41).map(|k| 5.0 * k as f64 / 40.0).collect();
    let cfg = RunConfig { n_agents: 16, max_global_iters: 50, rng_seed: 3, ..RunConfig::default() };
    let points = pareto_sweep(&b, &ObjectiveSpec::q_matched(0.0, z0, q_lb), &zetas, &cfg).unwrap();
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.q_over_qlb, p.gamma_sq)).collect();
    let recheck = dominated_flags(&pairs);
    let consistent = points.iter().zip(&recheck).all(|(p, &d)| p.dominated == d);
    let frontier: Vec<&(f64, f64)> = pairs.iter().zip(&recheck).filter(|(_, &d)| !d).map(|(p, _)| p).collect();
    let mutually = frontier
        .iter()
        .all(|a| frontier.iter().all(|b| !(b.0 <= a.0 && b.1 <= a.1 && (b.0 < a.0 || b.1 < a.1))));
    let min_q = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let zeta0_min = close(pairs[0].0, min_q, 1e-6);
    let matched = points.iter().filter(|p| p.zeta > 0.0).map(|p| p.gamma_sq).fold(f64::INFINITY, f64::min);

    // independent recomputation of the reported coordinates
    let eval = Evaluator::new(&b, &ObjectiveSpec::q_matched(0.0, z0, q_lb)).unwrap();
    let coords_ok = points.iter().all(|p| {
        let i = dense_solve(&b, &p.word, 0).unwrap();
        let q = eval_q(&i, &b).unwrap().q / q_lb;
        let g = eval_gamma(&i, eval.excitation(), 0, z0).mismatch();
        close(q, p.q_over_qlb, 1e-9) && (g - p.gamma_sq).abs() <= 1e-9
    });
    report(
        9,
        "zeta sweep frontier: zeta=0 has minimal Q/Q_lb, some zeta>0 matched below 1e-3",
        consistent && mutually && zeta0_min && matched < 1e-3 && coords_ok,
        format!(
            "{} points, {} nondominated, Q/Q_lb at zeta=0 {:.4} (min {:.4}), best |Gamma|^2 {matched:.2e}",
            points.len(),
            frontier.len(),
            pairs[0].0,
            min_q
        ),
    );
}

#[test]
fn criterion_10_logs_independent_of_thread_count() {
    let b = gen_random_passive(&RandomPassive::new(15, 1700));
    let cfg = RunConfig { n_agents: 16, max_global_iters: 20, rng_seed: 11, eps_glob: 0.0, ..RunConfig::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| memetic_optimize(&b, &ObjectiveSpec::q(), &cfg).unwrap().log_csv())
    };
    let (one, eight) = (run(1), run(8));
    report(10, "convergence logs byte-identical with 1 and 8 threads", one == eight, format!("{} bytes", one.len()));
}

#[test]
fn criterion_11_opb1_round_trip_and_symmetry_check() {
    let mut mismatches = 0;
    for seed in 0..100u64 {
        let p = RandomPassive::new(2 + (seed % 12) as usize, 2000 + seed).with_tm_projector(2);
        let b = gen_random_passive(&p);
        let bytes = encode_bundle(&b);
        let back = decode_bundle(&bytes).unwrap();
        if encode_bundle(&back) != bytes || back != b {
            mismatches += 1;
        }
    }
    let mut b = gen_random_passive(&RandomPassive::new(6, 1));
    b.z[(0, 1)] += C64::new(1e-3, 0.0);
    let rejected = decode_bundle(&encode_bundle(&b)).map_err(|e| e.to_string());
    let names_check = matches!(&rejected, Err(msg) if msg.contains("Z symmetry"));
    report(
        11,
        "OPB1 round trip is bitwise; asymmetric Z rejected naming the check",
        mismatches == 0 && names_check,
        format!("{mismatches} mismatches, corrupted file -> {rejected:?}"),
    );
}

#[test]
fn enabled_set_matches_word() {
    let b = gen_random_passive(&RandomPassive::new(6, 9));
    let w: Word = "10101".parse().unwrap();
    assert_eq!(materialize(&w, &b).unwrap(), vec![0, 1, 3, 5]);
}
