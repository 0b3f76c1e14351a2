use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{real_mat, CMat, CVec, C64};
use crate::model::{Meta, OperatorBundle};

/// Parameters of a random passive operator with a delta-gap feed at DOF 0.
///
/// R0, Rρ and X are real symmetric so that Z stays complex symmetric. X is
/// split as Xm − Xe with Xm, Xe PSD and W = Xm + Xe, so W ± X ⪰ 0 as for a
/// physical structure.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPassive {
    pub n: usize,
    pub seed: u64,
    pub loss_fraction: f64,
    /// Overall impedance scale applied to every operator.
    pub scale: f64,
    pub n_far_field: usize,
    /// Rows of a synthesized TM projector, if any.
    pub tm_rows: Option<usize>,
}

impl RandomPassive {
    pub fn new(n: usize, seed: u64) -> Self {
        RandomPassive {
            n,
            seed,
            loss_fraction: 0.1,
            scale: 1.0,
            n_far_field: 1,
            tm_rows: None,
        }
    }

    pub fn with_loss(mut self, loss_fraction: f64) -> Self {
        self.loss_fraction = loss_fraction;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_far_field(mut self, rows: usize) -> Self {
        self.n_far_field = rows;
        self
    }

    pub fn with_tm_projector(mut self, rows: usize) -> Self {
        self.tm_rows = Some(rows);
        self
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let g = a.transpose() * a;
    (&g + g.transpose()) * 0.5
}

fn complex_gaussian(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) / 2f64.sqrt()
    })
}

/// Random wide partial isometry P (rows × n) with P Pᴴ = I.
fn partial_isometry(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let q = g.qr().q();
    q.rows(0, rows.min(n)).into_owned()
}

struct Parts {
    r0: DMatrix<f64>,
    r_rho: DMatrix<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    a: DMatrix<f64>,
}

fn random_parts(rng: &mut ChaCha8Rng, n: usize, loss: f64, scale: f64) -> Parts {
    let norm = 1.0 / (n as f64).sqrt();
    let a = gaussian(rng, n, n) * norm;
    let b = gaussian(rng, n, n) * norm;
    let cm = gaussian(rng, n, n) * norm;
    let ce = gaussian(rng, n, n) * norm;
    let (xm, xe) = (gram(&cm), gram(&ce));
    Parts {
        r0: gram(&a) * scale,
        r_rho: gram(&b) * (loss * scale),
        x: (&xm - &xe) * scale,
        w: (xm + xe) * scale,
        a: a * scale.sqrt(),
    }
}

fn assemble(parts: &Parts) -> (CMat, CMat, CMat, CMat, CMat) {
    let r0 = real_mat(&parts.r0);
    let r_rho = real_mat(&parts.r_rho);
    let x = real_mat(&parts.x);
    let w = real_mat(&parts.w);
    let z = &r0 + &r_rho + &x * C64::new(0.0, 1.0);
    (z, r0, r_rho, x, w)
}

pub fn gen_random_passive(p: &RandomPassive) -> OperatorBundle {
    let n = p.n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let parts = random_parts(&mut rng, n, p.loss_fraction, p.scale);
    let (z, r0, r_rho, x, w) = assemble(&parts);
    let far_field = (0..p.n_far_field)
        .map(|_| complex_gaussian(&mut rng, n) * C64::new(p.scale.sqrt(), 0.0))
        .collect();
    let tm_projector = p.tm_rows.map(|rows| partial_isometry(&mut rng, rows, n) * real_mat(&parts.a));
    let mut v = CVec::zeros(n);
    v[0] = C64::new(1.0, 0.0);
    let mut fixed = vec![false; n];
    fixed[0] = true;
    OperatorBundle {
        z,
        r0,
        x,
        w: Some(w),
        r_rho: Some(r_rho),
        far_field,
        excitations: vec![v],
        tm_projector,
        controllable: fixed.iter().map(|&f| !f).collect(),
        fixed,
        chip: None,
        meta: Meta {
            frequency: 1.0,
            wavenumber: 1.0,
            radius: 0.0,
        },
    }
}

/// Random scattering problem: a plane-wave-like excitation on every DOF, the
/// last `n_chip` DOF form a fixed lossy chip, the rest is controllable.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomReceiver {
    pub n: usize,
    pub n_chip: usize,
    pub seed: u64,
    pub conductor_loss: f64,
    pub chip_loss: f64,
}

impl RandomReceiver {
    pub fn new(n: usize, n_chip: usize, seed: u64) -> Self {
        RandomReceiver {
            n,
            n_chip,
            seed,
            conductor_loss: 0.01,
            chip_loss: 1.0,
        }
    }
}

pub fn gen_random_receiver(p: &RandomReceiver) -> OperatorBundle {
    let n = p.n.max(1);
    let n_chip = p.n_chip.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut parts = random_parts(&mut rng, n, 0.0, 1.0);
    let mut r_rho = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        r_rho[(i, i)] = if i >= n - n_chip { p.chip_loss } else { p.conductor_loss };
    }
    parts.r_rho = r_rho;
    let (z, r0, r_rho, x, w) = assemble(&parts);
    let v = complex_gaussian(&mut rng, n);
    let chip: Vec<bool> = (0..n).map(|i| i >= n - n_chip).collect();
    OperatorBundle {
        z,
        r0,
        x,
        w: Some(w),
        r_rho: Some(r_rho),
        far_field: Vec::new(),
        excitations: vec![v],
        tm_projector: None,
        fixed: chip.clone(),
        controllable: chip.iter().map(|&c| !c).collect(),
        chip: Some(chip),
        meta: Meta {
            frequency: 1.0,
            wavenumber: 1.0,
            radius: 0.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::encode_bundle;
    use crate::linalg::hermitian_eigen;

    #[test]
    fn deterministic_in_seed() {
        let p = RandomPassive::new(7, 42).with_tm_projector(3);
        assert_eq!(encode_bundle(&gen_random_passive(&p)), encode_bundle(&gen_random_passive(&p)));
        let q = RandomPassive::new(7, 43);
        assert_ne!(gen_random_passive(&p).z, gen_random_passive(&q).z);
    }

    #[test]
    fn lossless_has_zero_r_rho() {
        let b = gen_random_passive(&RandomPassive::new(5, 3).with_loss(0.0));
        assert!(b.r_rho.unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn radiation_part_is_positive_definite() {
        let b = gen_random_passive(&RandomPassive::new(6, 1));
        let (vals, _) = hermitian_eigen(&b.r0);
        assert!(vals[0] > 0.0, "min eig {}", vals[0]);
    }

    #[test]
    fn generated_bundles_validate() {
        for seed in 0..10 {
            gen_random_passive(&RandomPassive::new(1 + seed as usize, seed).with_tm_projector(2))
                .validate()
                .unwrap();
            gen_random_receiver(&RandomReceiver::new(3 + seed as usize, 2, seed))
                .validate()
                .unwrap();
        }
    }

    #[test]
    fn tm_radiation_is_dominated_by_total() {
        let b = gen_random_passive(&RandomPassive::new(8, 9).with_tm_projector(3));
        let u = b.tm_projector.as_ref().unwrap();
        let diff = &b.r0 - u.adjoint() * u;
        let (vals, _) = hermitian_eigen(&diff);
        assert!(vals[0] > -1e-12);
    }
}
