//! Thin-wire method of moments for arrays of parallel, center-fed dipoles.
//!
//! Each dipole of length ℓ is split by `segments + 2` equally spaced points;
//! the `segments` interior points carry pulse current elements of length Δ
//! and the charge lives on the intervals between neighbouring points
//! (Harrington's wire formulation). The impedance entry is
//!
//! ```text
//! Z_mn = jωμ Δ² ψ(n, m) + 1/(jωε) [ψ(n+, m+) − ψ(n−, m+) − ψ(n+, m−) + ψ(n−, m−)]
//! ```
//!
//! with ψ the reduced-kernel potential integral: observation on the wire
//! axis, source on the surface at distance equal to the wire radius.
//! Removing a DOF forces the current at that point to zero, i.e. cuts the
//! wire there.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMat, CVec, C64};
use crate::model::{Meta, OperatorBundle};

use super::{eta0, C0, EPS0, MU0};

pub const COPPER_CONDUCTIVITY: f64 = 5.96e7;

/// Thin-sheet surface resistance √(kη₀ / 2σ).
pub fn surface_resistance(wavenumber: f64, conductivity: f64) -> f64 {
    if conductivity.is_infinite() {
        return 0.0;
    }
    (wavenumber * eta0() / (2.0 * conductivity)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireArray {
    pub n_dipoles: usize,
    pub length_over_lambda: f64,
    pub spacing_over_lambda: f64,
    /// Current elements per dipole; odd so that one sits at the center.
    pub segments_per_dipole: usize,
    /// Wire radius in m; `None` uses the strip equivalent ℓ/240 of a strip of width ℓ/60.
    pub wire_radius: Option<f64>,
    /// Conductivity in S/m (`f64::INFINITY` for PEC).
    pub conductivity: f64,
    pub frequency: f64,
}

impl WireArray {
    pub fn new(n_dipoles: usize, spacing_over_lambda: f64) -> Self {
        WireArray {
            n_dipoles,
            length_over_lambda: 0.55,
            spacing_over_lambda,
            segments_per_dipole: 21,
            wire_radius: None,
            conductivity: COPPER_CONDUCTIVITY,
            frequency: 1e9,
        }
    }

    pub fn wavelength(&self) -> f64 {
        C0 / self.frequency
    }

    pub fn length(&self) -> f64 {
        self.length_over_lambda * self.wavelength()
    }

    pub fn radius(&self) -> f64 {
        self.wire_radius.unwrap_or(self.length() / 240.0)
    }

    /// Index of the delta-gap DOF: center of the second dipole (or of the only one).
    pub fn feed_index(&self) -> usize {
        let driven = if self.n_dipoles >= 2 { 1 } else { 0 };
        driven * self.segments_per_dipole + self.segments_per_dipole / 2
    }

    fn check(&self) -> Result<()> {
        if self.n_dipoles == 0 {
            return Err(Error::Domain("need at least one dipole".into()));
        }
        if self.segments_per_dipole == 0 || self.segments_per_dipole % 2 == 0 {
            return Err(Error::Domain("segments per dipole must be odd".into()));
        }
        if !(self.frequency > 0.0 && self.length_over_lambda > 0.0) {
            return Err(Error::Domain("frequency and length must be positive".into()));
        }
        if !(self.conductivity > 0.0) {
            return Err(Error::Domain("conductivity must be positive".into()));
        }
        let a = self.radius();
        let delta = self.length() / (self.segments_per_dipole + 1) as f64;
        if !(a > 0.0) || a >= 0.5 * delta {
            return Err(Error::Domain(format!(
                "wire radius {a:.3e} m must be positive and well below the segment length {delta:.3e} m"
            )));
        }
        if self.n_dipoles > 1 && self.spacing_over_lambda * self.wavelength() <= 2.0 * a {
            return Err(Error::Domain("dipoles overlap: spacing must exceed the wire diameter".into()));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], 8 points.
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// ∫_{lo}^{hi} (e^{-jkR} - 1)/(4πR) ds with R = √(s² + ρ²); smooth integrand.
fn smooth_part(k: f64, rho: f64, lo: f64, hi: f64) -> C64 {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in GL_X.iter().zip(GL_W) {
        let s = mid + half * x;
        let r = (s * s + rho * rho).sqrt();
        acc += (C64::new(0.0, -k * r).exp() - 1.0) / (4.0 * PI * r) * w;
    }
    acc * half
}

/// Mean of the Green's function e^{-jkR}/(4πR) over a source interval
/// [lo, hi] (relative to the observation point along the axis) at
/// transverse distance ρ. The static 1/R part is integrated in closed form.
fn potential(k: f64, rho: f64, lo: f64, hi: f64) -> C64 {
    let statics = ((hi / rho).asinh() - (lo / rho).asinh()) / (4.0 * PI);
    let dynamic = if lo < 0.0 && hi > 0.0 {
        smooth_part(k, rho, lo, 0.0) + smooth_part(k, rho, 0.0, hi)
    } else {
        smooth_part(k, rho, lo, hi)
    };
    (dynamic + statics) / (hi - lo)
}

struct Geometry {
    /// (x position, z position) of every current element.
    nodes: Vec<(usize, f64)>,
    dipole_x: Vec<f64>,
    delta: f64,
    radius: f64,
}

fn geometry(p: &WireArray) -> Geometry {
    let lambda = p.wavelength();
    let len = p.length();
    let delta = len / (p.segments_per_dipole + 1) as f64;
    let mut nodes = Vec::new();
    for d in 0..p.n_dipoles {
        for s in 1..=p.segments_per_dipole {
            nodes.push((d, -0.5 * len + s as f64 * delta));
        }
    }
    Geometry {
        nodes,
        dipole_x: (0..p.n_dipoles).map(|d| d as f64 * p.spacing_over_lambda * lambda).collect(),
        delta,
        radius: p.radius(),
    }
}

/// Lossless impedance matrix at `frequency` for the fixed geometry.
fn impedance(g: &Geometry, frequency: f64) -> CMat {
    let omega = 2.0 * PI * frequency;
    let k = omega / C0;
    let n = g.nodes.len();
    let d = g.delta;
    let ind = C64::new(0.0, omega * MU0 * d * d);
    let cap = C64::new(0.0, -1.0 / (omega * EPS0));
    let mut z = CMat::zeros(n, n);
    for m in 0..n {
        let (dm, zm) = g.nodes[m];
        for nn in m..n {
            let (dn, zn) = g.nodes[nn];
            let rho = if dm == dn {
                g.radius
            } else {
                (g.dipole_x[dm] - g.dipole_x[dn]).abs()
            };
            // source interval [c - Δ/2, c + Δ/2] seen from observation point o
            let psi = |c: f64, o: f64| potential(k, rho, c - 0.5 * d - o, c + 0.5 * d - o);
            let vector = psi(zn, zm);
            let (np, nm) = (zn + 0.5 * d, zn - 0.5 * d);
            let (mp, mm) = (zm + 0.5 * d, zm - 0.5 * d);
            let scalar = psi(np, mp) - psi(nm, mp) - psi(np, mm) + psi(nm, mm);
            let val = ind * vector + cap * scalar;
            z[(m, nn)] = val;
            z[(nn, m)] = val;
        }
    }
    z
}

fn clip_to_psd(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let clipped = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(v.max(0.0), 0.0)),
    ));
    let r = &vecs * clipped * vecs.adjoint();
    // real symmetric, as Re Z is
    let re = r.map(|z| C64::new(z.re, 0.0));
    (&re + re.transpose()) * C64::new(0.5, 0.0)
}

/// Far-field row for direction +x̂ and polarization ẑ, scaled so that
/// G = |F·I|² / Iᴴ(R0 + Rρ)I.
fn end_fire_row(g: &Geometry, k: f64) -> CVec {
    let scale = k * g.delta * (eta0() / (4.0 * PI)).sqrt();
    CVec::from_iterator(
        g.nodes.len(),
        g.nodes
            .iter()
            .map(|&(d, _)| C64::new(0.0, k * g.dipole_x[d]).exp() * scale),
    )
}

pub fn gen_wire_array(p: &WireArray) -> Result<OperatorBundle> {
    p.check()?;
    let g = geometry(p);
    let n = g.nodes.len();
    let k = 2.0 * PI * p.frequency / C0;

    let z_lossless = impedance(&g, p.frequency);
    let r0 = clip_to_psd(&z_lossless.map(|z| C64::new(z.re, 0.0)));
    let x = z_lossless.map(|z| C64::new(z.im, 0.0));

    let h = 1e-4;
    let x_hi = impedance(&g, p.frequency * (1.0 + h)).map(|z| C64::new(z.im, 0.0));
    let x_lo = impedance(&g, p.frequency * (1.0 - h)).map(|z| C64::new(z.im, 0.0));
    let w = (x_hi - x_lo) / C64::new(2.0 * h, 0.0);
    let w = (&w + w.transpose()) * C64::new(0.5, 0.0);

    let rs = surface_resistance(k, p.conductivity);
    let seg_loss = rs / (2.0 * PI * g.radius) * g.delta;
    let r_rho = CMat::from_diagonal_element(n, n, C64::new(seg_loss, 0.0));

    let z = &r0 + &r_rho + &x * C64::new(0.0, 1.0);
    let feed = p.feed_index();
    let mut v = CVec::zeros(n);
    v[feed] = C64::new(1.0, 0.0);
    let mut fixed = vec![false; n];
    fixed[feed] = true;

    let span = g.dipole_x.last().copied().unwrap_or(0.0);
    let radius = ((0.5 * p.length()).powi(2) + (0.5 * span).powi(2)).sqrt();

    Ok(OperatorBundle {
        z,
        r0,
        x,
        w: Some(w),
        r_rho: Some(r_rho),
        far_field: vec![end_fire_row(&g, k)],
        excitations: vec![v],
        tm_projector: None,
        controllable: fixed.iter().map(|&f| !f).collect(),
        fixed,
        chip: None,
        meta: Meta {
            frequency: p.frequency,
            wavenumber: k,
            radius,
        },
    })
}
