//! Thin wrappers over nalgebra factorizations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending order.
pub fn sym_eigen(mut a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    symmetrize(&mut a);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    (values, vectors)
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>, op: &'static str) -> Result<DVector<f64>> {
    let chol = a.cholesky().ok_or_else(|| Error::numerical(op, "matrix is not numerically positive definite"))?;
    Ok(chol.solve(b))
}

/// `diag(v) * a`.
pub fn scale_rows(a: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (mut row, &s) in out.row_iter_mut().zip(v.iter()) {
        row *= s;
    }
    out
}

/// `a * diag(v)`.
pub fn scale_cols(a: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (mut col, &s) in out.column_iter_mut().zip(v.iter()) {
        col *= s;
    }
    out
}
