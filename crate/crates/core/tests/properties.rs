//! Property-based invariants over randomly generated bundles and words.

use proptest::prelude::*;

use memdes::bounds::q_lower_bound;
use memdes::global::{dominated_flags, hamming_mean};
use memdes::io::{decode_bundle, encode_bundle};
use memdes::linalg::rel_err;
use memdes::local::{local_search, parse_sensitivity_csv, sensitivity_csv, sensitivity_map};
use memdes::objectives::Evaluator;
use memdes::opgen::{gen_random_passive, RandomPassive};
use memdes::oracle::{dense_objective, dense_solve};
use memdes::reanalysis::{init_state, Move};
use memdes::{materialize, ObjectiveSpec, Word};

fn word_strategy(n: usize) -> impl Strategy<Value = Word> {
    proptest::collection::vec(any::<bool>(), n).prop_map(Word::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn materialize_is_injective_and_invertible(seed in 0u64..1000, a in word_strategy(7), b in word_strategy(7)) {
        let bundle = gen_random_passive(&RandomPassive::new(8, seed));
        let (sa, sb) = (materialize(&a, &bundle).unwrap(), materialize(&b, &bundle).unwrap());
        prop_assert_eq!(a == b, sa == sb);
        prop_assert_eq!(Word::from_enabled(&sa, &bundle), a.clone());
        prop_assert!(sa.contains(&0));
        prop_assert_eq!(sa.len(), 1 + a.count_ones());
    }

    #[test]
    fn word_text_round_trip(w in word_strategy(20)) {
        prop_assert_eq!(w.to_string().parse::<Word>().unwrap(), w);
    }

    #[test]
    fn opb1_round_trip(n in 1usize..10, seed in 0u64..10_000, tm in 0usize..4) {
        let mut p = RandomPassive::new(n, seed).with_far_field(2);
        if tm > 0 {
            p = p.with_tm_projector(tm);
        }
        let b = gen_random_passive(&p);
        let bytes = encode_bundle(&b);
        let back = decode_bundle(&bytes).unwrap();
        prop_assert_eq!(encode_bundle(&back), bytes);
    }

    #[test]
    fn random_walk_tracks_dense_solve(seed in 0u64..10_000, moves in proptest::collection::vec(1usize..12, 1..40)) {
        let b = gen_random_passive(&RandomPassive::new(12, seed));
        let eval = Evaluator::new(&b, &ObjectiveSpec::q()).unwrap();
        let mut s = init_state(&eval, &Word::ones(11), 4).unwrap();
        for dof in moves {
            let mv = if s.enabled().binary_search(&dof).is_ok() { Move::Remove(dof) } else { Move::Add(dof) };
            if s.commit(mv).is_err() {
                continue;
            }
            let dense = dense_solve(&b, &s.word(), 0).unwrap();
            prop_assert!(rel_err(&s.full_current(), &dense) <= 1e-9);
            prop_assert!(s.symmetry_defect() <= 1e-9);
        }
    }

    #[test]
    fn sensitivities_equal_perturbed_objective(seed in 0u64..10_000, w in word_strategy(9)) {
        let b = gen_random_passive(&RandomPassive::new(10, seed));
        let spec = ObjectiveSpec::q();
        let eval = Evaluator::new(&b, &spec).unwrap();
        let mut s = init_state(&eval, &w, 64).unwrap();
        let f = s.f_val();
        for row in sensitivity_map(&mut s) {
            let mut t = w.clone();
            t.flip(row.dof_index - 1);
            let reference = dense_objective(&b, &spec, &t).unwrap();
            prop_assert!((row.f_candidate - reference).abs() <= 1e-9 * reference.abs().max(1.0));
            prop_assert!((row.tau - (reference - f)).abs() <= 1e-9 * f.abs().max(1.0));
        }
    }

    #[test]
    fn q_is_scale_invariant(seed in 0u64..10_000, w in word_strategy(7), scale in 1e-3f64..1e3) {
        let spec = ObjectiveSpec::q();
        let a = gen_random_passive(&RandomPassive::new(8, seed));
        let b = gen_random_passive(&RandomPassive::new(8, seed).with_scale(scale));
        let (qa, qb) = (dense_objective(&a, &spec, &w).unwrap(), dense_objective(&b, &spec, &w).unwrap());
        prop_assert!((qa - qb).abs() <= 1e-9 * qa);
    }

    #[test]
    fn q_bound_below_every_word(seed in 0u64..10_000, w in word_strategy(7)) {
        let b = gen_random_passive(&RandomPassive::new(8, seed));
        let lb = q_lower_bound(&b, false).unwrap().value;
        let q = dense_objective(&b, &ObjectiveSpec::q(), &w).unwrap();
        prop_assert!(lb <= q * (1.0 + 1e-9));
    }

    #[test]
    fn local_search_never_increases(seed in 0u64..10_000, w in word_strategy(11)) {
        let b = gen_random_passive(&RandomPassive::new(12, seed));
        let eval = Evaluator::new(&b, &ObjectiveSpec::q()).unwrap();
        let mut s = init_state(&eval, &w, 64).unwrap();
        let t = local_search(&mut s, 0.0, 1000, false).unwrap();
        prop_assert!(t.entries.windows(2).all(|e| e[1].f < e[0].f));
        let csv = sensitivity_csv(&sensitivity_map(&mut s));
        let rows = parse_sensitivity_csv(&csv).unwrap();
        prop_assert!(rows.iter().all(|r| r.tau >= 0.0));
    }

    #[test]
    fn hamming_mean_is_bounded(words in proptest::collection::vec(word_strategy(10), 2..12)) {
        let refs: Vec<&Word> = words.iter().collect();
        let h = hamming_mean(&refs);
        prop_assert!((0.0..=10.0).contains(&h));
    }

    #[test]
    fn frontier_is_mutually_nondominated(points in proptest::collection::vec((0.0f64..10.0, 0.0f64..1.0), 1..30)) {
        let flags = dominated_flags(&points);
        let dominates = |a: (f64, f64), b: (f64, f64)| a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1);
        for (i, &p) in points.iter().enumerate() {
            let beaten = points.iter().any(|&q| dominates(q, p));
            prop_assert_eq!(flags[i], beaten);
        }
        prop_assert!(flags.iter().any(|d| !d));
    }
}
