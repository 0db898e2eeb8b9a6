//! Small dense linear-algebra helpers shared by the model, estimator and solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Reciprocal condition estimates below this are rejected rather than regularized.
pub const RCOND_FLOOR: f64 = 1e-14;

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Largest absolute asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    ev.as_mut_slice().sort_by(f64::total_cmp);
    ev
}

/// True when every eigenvalue is at least `-tol * max(1, ||m||_2)`.
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let ev = sym_eigenvalues(m);
    let scale = ev.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    ev[0] >= -tol * scale
}

/// Symmetric square root `X^{1/2}` of a PSD matrix; negative round-off eigenvalues are clamped.
///
/// The result is symmetric, so `(X^{1/2})^T X^{1/2} = X`.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(root);
    }
    let mut out = &scaled * eig.eigenvectors.transpose();
    symmetrize_in_place(&mut out);
    out
}

/// Reciprocal spectral condition number of a symmetric matrix (0 when singular or indefinite).
pub fn sym_rcond(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    let n = ev.len();
    if n == 0 {
        return 1.0;
    }
    let lo = ev[0];
    let hi = ev[n - 1].abs().max(lo.abs());
    if lo <= 0.0 || hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Inverse of a symmetric positive-definite matrix, rejecting ill-conditioned input.
pub fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let rcond = sym_rcond(m);
    if rcond < RCOND_FLOOR {
        return Err(Error::IllConditioned { what, rcond });
    }
    let chol = symmetrize(m)
        .cholesky()
        .ok_or(Error::IllConditioned { what, rcond })?;
    let mut inv = chol.inverse();
    symmetrize_in_place(&mut inv);
    Ok(inv)
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, m);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Frobenius inner product `tr(a^T b)`.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_singular_psd_squares_back() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let m = &v * v.transpose();
        let r = psd_sqrt(&m);
        let back = r.transpose() * &r;
        assert!((back - m).amax() < 1e-12);
    }

    #[test]
    fn rcond_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_inverse(&m, "test").is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let inv = spd_inverse(&ok, "test").unwrap();
        assert!((&ok * inv - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn block_diag_places_blocks() {
        let a = DMatrix::from_element(1, 1, 3.0);
        let b = DMatrix::identity(2, 2);
        let d = block_diag(&[a, b]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(2, 2)], 1.0);
        assert_eq!(d[(0, 2)], 0.0);
    }
}
