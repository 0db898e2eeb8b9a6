use nalgebra::{DMatrix, DVector};

use crate::linalg;

/// Eigenvalues within this distance of zero are clamped to zero.
pub const PSD_CLAMP: f64 = 1e-12;

/// Euclidean projection onto `{(x, t) : ||x|| <= t}`; the last entry of `beta` is `t`.
pub fn project_soc(beta: &DVector<f64>) -> DVector<f64> {
    let n = beta.len();
    assert!(n >= 1, "second-order cone needs at least one coordinate");
    let t = beta[n - 1];
    let x = beta.rows(0, n - 1);
    let nx = x.norm();
    if nx <= -t {
        DVector::zeros(n)
    } else if nx <= t {
        beta.clone()
    } else {
        let scale = 0.5 * (1.0 + t / nx);
        let mut out = DVector::zeros(n);
        out.rows_mut(0, n - 1).copy_from(&(x * scale));
        out[n - 1] = scale * nx;
        out
    }
}

/// Frobenius projection onto the PSD cone: symmetrize, then clamp negative eigenvalues.
pub fn project_psd(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = linalg::symmetrize(phi);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&s| s > PSD_CLAMP) {
        return sym;
    }
    let kept = eig.eigenvalues.map(|s| if s > PSD_CLAMP { s } else { 0.0 });
    let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&kept);
    let mut out = scaled * eig.eigenvectors.transpose();
    linalg::symmetrize_in_place(&mut out);
    out
}
