//! Native runs of the computations behind the browser demo.

use memdes_web::{impedance_sweep, optimize, sensitivity};

#[test]
fn dipole_reactance_crosses_zero_near_half_wave() {
    let pts = impedance_sweep(0.40, 0.60, 21, 21).unwrap();
    let k = pts.windows(2).position(|w| w[0].x < 0.0 && w[1].x >= 0.0).expect("sign change");
    assert!(pts[k].length >= 0.45 - 1e-9 && pts[k + 1].length <= 0.50 + 1e-9, "{:?}", &pts[k..k + 2]);
    assert!(pts.iter().all(|p| p.r > 0.0));
}

#[test]
fn optimized_array_beats_full_array_and_stays_below_bound() {
    let r = optimize(0.25, 21, 1, 16, 50).unwrap();
    assert!(r.gain_db > r.full_array_db + 1.0, "{} vs {}", r.gain_db, r.full_array_db);
    assert!(r.gain_db <= r.bound_db.unwrap() + 1e-9);
    assert!(r.history_db.windows(2).all(|w| w[1] >= w[0]));
    assert!((r.history_db.last().unwrap() - r.gain_db).abs() < 1e-9);
    assert!(r.enabled[r.feed]);
    assert_eq!(r.enabled.iter().filter(|e| **e).count(), 1 + r.best_word.matches('1').count());
}

#[test]
fn optimized_word_has_no_improving_toggle() {
    let r = optimize(0.3, 15, 2, 12, 30).unwrap();
    let s = sensitivity(0.3, 15, &r.best_word).unwrap();
    assert!((s.gain_db - r.gain_db).abs() < 1e-9);
    assert!(s.toggled_db[r.feed].is_none());
    for g in s.toggled_db.iter().flatten() {
        assert!(*g <= s.gain_db + 1e-9);
    }
    assert!(sensitivity(0.3, 15, "0101").is_err());
}
