use nalgebra::DVector;

use super::design::Design;
use super::precond::Preconditioner;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, sym_eigen};

/// Limit of the preconditioned flow, `P X^T (X P X^T)^-1 y`.
pub fn stationary_solution(design: &Design, p: &Preconditioner, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_labels(design, y)?;
    let alpha = spd_solve(p.gram(&design.x), y, "stationary_solution")?;
    let xt_alpha = design.x.tr_mul(&alpha);
    Ok(match p {
        Preconditioner::Diagonal(d) => xt_alpha.component_mul(d),
        Preconditioner::Dense(m) => m * xt_alpha,
    })
}

fn check_labels(design: &Design, y: &DVector<f64>) -> Result<()> {
    if y.len() != design.n {
        return Err(Error::domain(format!("expected {} labels, got {}", design.n, y.len())));
    }
    Ok(())
}

/// Certificate that `theta` is the minimum `||.||_{P^-1}` interpolant of `y`.
///
/// Returns the larger of the relative interpolation residual and
/// `max_v |v^T P^-1 theta| / ||theta||_{P^-1}` over an orthonormal basis of
/// `ker(X)`. Values near machine precision certify minimality.
pub fn min_norm_check(design: &Design, p: &Preconditioner, y: &DVector<f64>, theta: &DVector<f64>) -> Result<f64> {
    check_labels(design, y)?;
    let pinv_theta = p.solve(theta)?;
    let norm = theta.dot(&pinv_theta).sqrt();
    let residual = (&design.x * theta - y).norm() / y.norm().max(f64::MIN_POSITIVE);
    if norm == 0.0 {
        return Ok(residual);
    }
    let (_, vecs) = sym_eigen(design.x.tr_mul(&design.x));
    let kernel_dim = design.d - design.n;
    let orth = vecs.columns(0, kernel_dim).tr_mul(&pinv_theta).amax() / norm;
    Ok(orth.max(residual))
}

/// `sqrt(y^T (X X^T)^-1 y / n)`.
pub fn yky_diagnostic(design: &Design, y: &DVector<f64>) -> Result<f64> {
    check_labels(design, y)?;
    let k = &design.x * design.x.transpose();
    let alpha = spd_solve(k, y, "yky_diagnostic")?;
    Ok((y.dot(&alpha) / design.n as f64).max(0.0).sqrt())
}
