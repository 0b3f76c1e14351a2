use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMat, CVec, C64};

/// Eigenvalues of B below this fraction of ‖B‖ are deflated.
pub const DEFLATION_TOL: f64 = 1e-10;

/// Eigenpairs of the Hermitian pencil (A, B) on the range of B.
///
/// Values are ascending; the columns of the returned matrix satisfy
/// vᵢᴴ B vⱼ = δᵢⱼ.
pub fn hermitian_pencil_eig(a: &CMat, b: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::Domain("pencil matrices must be square and of equal size".into()));
    }
    let (bvals, bvecs) = hermitian_eigen(b);
    let norm = bvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain("pencil B matrix is zero".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| bvals[i] > DEFLATION_TOL * norm).collect();
    if keep.is_empty() {
        return Err(Error::Domain("pencil B matrix has no positive range".into()));
    }
    let t = CMat::from_fn(n, keep.len(), |r, c| bvecs[(r, keep[c])] / bvals[keep[c]].sqrt());
    let reduced = t.adjoint() * a * &t;
    let (vals, w) = hermitian_eigen(&reduced);
    Ok((vals, t * w))
}

/// Smallest eigenpair of A v = λ B v, with vᴴ B v = 1.
pub fn hermitian_pencil_min_eig(a: &CMat, b: &CMat) -> Result<(f64, CVec)> {
    let (vals, vecs) = hermitian_pencil_eig(a, b)?;
    Ok((vals[0], vecs.column(0).into_owned()))
}

/// Largest eigenvalue of the pencil (A, B).
pub fn hermitian_pencil_max_eig(a: &CMat, b: &CMat) -> Result<f64> {
    let (vals, _) = hermitian_pencil_eig(a, b)?;
    Ok(vals[vals.len() - 1])
}

/// Unit vector w ∈ ℂ² with wᴴ H w = 0 for an indefinite Hermitian 2×2 H.
pub(crate) fn isotropic_mix(h11: f64, h12: C64, h22: f64) -> Option<(C64, C64)> {
    let h = CMat::from_row_slice(2, 2, &[C64::new(h11, 0.0), h12, h12.conj(), C64::new(h22, 0.0)]);
    let (mu, e) = hermitian_eigen(&h);
    if !(mu[0] <= 0.0 && mu[1] >= 0.0) || mu[1] - mu[0] <= 0.0 {
        return None;
    }
    let (c1, c2) = ((mu[1] / (mu[1] - mu[0])).sqrt(), (-mu[0] / (mu[1] - mu[0])).sqrt());
    Some((e[(0, 0)] * c1 + e[(0, 1)] * c2, e[(1, 0)] * c1 + e[(1, 1)] * c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::quad_form;

    fn diag(v: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
    }

    #[test]
    fn identity_metric() {
        let (l, v) = hermitian_pencil_min_eig(&diag(&[3.0, 1.0]), &diag(&[1.0, 1.0])).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
        assert!((v[1].norm() - 1.0).abs() < 1e-14 && v[0].norm() < 1e-14);
    }

    #[test]
    fn null_direction_is_deflated() {
        let (l, v) = hermitian_pencil_min_eig(&diag(&[2.0, 5.0]), &diag(&[1.0, 0.0])).unwrap();
        assert!((l - 2.0).abs() < 1e-14);
        assert!((quad_form(&diag(&[1.0, 0.0]), &v).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_metric_is_a_domain_error() {
        assert!(matches!(hermitian_pencil_min_eig(&diag(&[1.0]), &diag(&[0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn isotropic_mix_zeroes_form() {
        let (a, b) = isotropic_mix(2.0, C64::new(0.3, -0.4), -0.5).unwrap();
        let v = CVec::from_vec(vec![a, b]);
        let h = CMat::from_row_slice(2, 2, &[C64::new(2.0, 0.0), C64::new(0.3, -0.4), C64::new(0.3, 0.4), C64::new(-0.5, 0.0)]);
        assert!(quad_form(&h, &v).norm() < 1e-14);
        assert!((v.norm() - 1.0).abs() < 1e-14);
        assert!(isotropic_mix(1.0, C64::new(0.0, 0.0), 2.0).is_none());
    }
}
