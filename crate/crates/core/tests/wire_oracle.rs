//! Gain from the far-field row against a direct far-field integration.

use std::f64::consts::PI;

use memdes::linalg::{quad_form, C64};
use memdes::opgen::{eta0, gen_wire_array, WireArray};
use memdes::oracle::dense_solve;
use memdes::Word;

/// 4πU(x̂)/P_tot with U integrated over the sphere from pulse current
/// elements, and P_tot = radiated + ohmic.
fn integrated_gain(p: &WireArray) -> (f64, f64) {
    let b = gen_wire_array(p).unwrap();
    let i = dense_solve(&b, &Word::ones(b.n_opt()), 0).unwrap();
    let k = 2.0 * PI * p.frequency / 299_792_458.0;
    let (len, n_seg) = (p.length(), p.segments_per_dipole);
    let delta = len / (n_seg + 1) as f64;
    let spacing = p.spacing_over_lambda * p.wavelength();
    let elements: Vec<(f64, f64)> = (0..p.n_dipoles)
        .flat_map(|d| (1..=n_seg).map(move |s| (d as f64 * spacing, -0.5 * len + s as f64 * delta)))
        .collect();
    let intensity = |theta: f64, phi: f64| {
        let (st, ct) = theta.sin_cos();
        let u = 0.5 * k * delta * ct;
        let sinc = if u.abs() < 1e-12 { 1.0 } else { u.sin() / u };
        let sum: C64 = elements
            .iter()
            .zip(i.iter())
            .map(|(&(x, z), &c)| c * delta * sinc * C64::new(0.0, k * (z * ct + x * st * phi.cos())).exp())
            .sum();
        eta0() * k * k / (32.0 * PI * PI) * st * st * sum.norm_sqr()
    };
    let (nt, np) = (180, 180);
    let mut p_rad = 0.0;
    for a in 0..nt {
        let theta = (a as f64 + 0.5) * PI / nt as f64;
        for c in 0..np {
            let phi = (c as f64 + 0.5) * 2.0 * PI / np as f64;
            p_rad += intensity(theta, phi) * theta.sin() * (PI / nt as f64) * (2.0 * PI / np as f64);
        }
    }
    let p_loss = 0.5 * quad_form(b.r_rho.as_ref().unwrap(), &i).re;
    let oracle = 4.0 * PI * intensity(0.5 * PI, 0.0) / (p_rad + p_loss);
    let f = &b.far_field[0];
    let row = f.dot(&i).norm_sqr() / quad_form(&b.total_resistance(), &i).re;
    (row, oracle)
}

#[test]
fn five_segment_dipole_gain_matches_integration() {
    let p = WireArray { segments_per_dipole: 5, ..WireArray::new(1, 0.25) };
    let (row, oracle) = integrated_gain(&p);
    assert!((row - oracle).abs() <= 0.02 * oracle, "row {row}, oracle {oracle}");
}

#[test]
fn two_dipole_array_gain_matches_integration() {
    let p = WireArray { segments_per_dipole: 5, ..WireArray::new(2, 0.2) };
    let (row, oracle) = integrated_gain(&p);
    assert!((row - oracle).abs() <= 0.02 * oracle, "row {row}, oracle {oracle}");
}
