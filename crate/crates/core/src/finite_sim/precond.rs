use nalgebra::{DMatrix, DVector};

use super::design::Design;
use crate::error::{Error, Result};
use crate::linalg::{scale_cols, scale_rows, spd_solve, symmetrize};
use crate::spectra::PreconditionerSpec;

/// Realized preconditioner. Population kinds stay diagonal in the covariance
/// eigenbasis; sample kinds are dense.
#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Preconditioner {
    pub fn dim(&self) -> usize {
        match self {
            Preconditioner::Diagonal(p) => p.len(),
            Preconditioner::Dense(p) => p.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Preconditioner::Diagonal(p) => DMatrix::from_diagonal(p),
            Preconditioner::Dense(p) => p.clone(),
        }
    }

    /// `P a` for a `d x k` matrix `a`.
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Preconditioner::Diagonal(p) => scale_rows(a, p),
            Preconditioner::Dense(p) => p * a,
        }
    }

    /// `X P X^T`, symmetrized.
    pub fn gram(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut s = match self {
            Preconditioner::Diagonal(p) => scale_cols(x, p) * x.transpose(),
            Preconditioner::Dense(p) => x * (p * x.transpose()),
        };
        symmetrize(&mut s);
        s
    }

    /// `P^-1 v`; fails when `P` is singular.
    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Preconditioner::Diagonal(p) => {
                if p.iter().any(|&pi| !(pi > 0.0)) {
                    return Err(Error::numerical("min_norm_check", "preconditioner is singular"));
                }
                Ok(v.component_div(p))
            }
            Preconditioner::Dense(p) => spd_solve(p.clone(), v, "min_norm_check"),
        }
    }
}

pub fn build_preconditioner(spec: &PreconditionerSpec, design: &Design) -> Result<Preconditioner> {
    spec.validate()?;
    let x = &design.x;
    match *spec {
        PreconditionerSpec::SamplePseudoInverse => {
            // (X^T X)^+ = X^T (X X^T)^-2 X.
            let k = x * x.transpose();
            let w = gram_inverse(k, "build_preconditioner")?;
            let a = x.transpose() * (&w * &w);
            let mut p = a * x;
            symmetrize(&mut p);
            Ok(Preconditioner::Dense(p))
        }
        PreconditionerSpec::SampleDamped { lambda } => {
            // (X^T X + lambda I)^-1 = (I - X^T (X X^T + lambda I)^-1 X) / lambda.
            let mut k = x * x.transpose();
            for i in 0..design.n {
                k[(i, i)] += lambda;
            }
            let w = gram_inverse(k, "build_preconditioner")?;
            let mut p = -(x.transpose() * w * x);
            for i in 0..design.d {
                p[(i, i)] += 1.0;
            }
            p /= lambda;
            symmetrize(&mut p);
            Ok(Preconditioner::Dense(p))
        }
        _ => {
            let diag = design.sigma_x_eigs.map(|s| spec.eigen_map(s).expect("population kind"));
            if diag.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
                return Err(Error::domain(format!("{} is not positive definite on this design", spec.label())));
            }
            Ok(Preconditioner::Diagonal(diag))
        }
    }
}

fn gram_inverse(k: DMatrix<f64>, op: &'static str) -> Result<DMatrix<f64>> {
    let chol = k.cholesky().ok_or_else(|| Error::numerical(op, "Gram matrix is singular"))?;
    let mut w = chol.inverse();
    symmetrize(&mut w);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_sim::design::{sample_design, EntryDist};
    use crate::linalg::sym_eigen;
    use crate::spectra::make_two_atom;

    fn design() -> Design {
        sample_design(8, 20, &make_two_atom(20.0, true).unwrap(), EntryDist::Gaussian, 5).unwrap()
    }

    #[test]
    fn population_kinds_are_diagonal() {
        let d = design();
        let id = build_preconditioner(&PreconditionerSpec::Identity, &d).unwrap();
        assert_eq!(id.to_dense(), DMatrix::identity(20, 20));
        let inv = build_preconditioner(&PreconditionerSpec::InversePopFisher, &d).unwrap();
        match inv {
            Preconditioner::Diagonal(p) => {
                for (pi, si) in p.iter().zip(d.sigma_x_eigs.iter()) {
                    assert_eq!(*pi, 1.0 / si);
                }
            }
            _ => panic!("expected diagonal"),
        }
    }

    #[test]
    fn pseudo_inverse_has_rank_n() {
        let d = design();
        let p = build_preconditioner(&PreconditionerSpec::SamplePseudoInverse, &d).unwrap().to_dense();
        let (l, _) = sym_eigen(p.clone());
        let top = l[l.len() - 1];
        assert_eq!(l.iter().filter(|&&v| v > 1e-10 * top).count(), 8);
        // Moore-Penrose conditions against A = X^T X.
        let a = d.x.transpose() * &d.x;
        assert!((&a * &p * &a - &a).norm() < 1e-8 * a.norm());
        assert!((&p * &a * &p - &p).norm() < 1e-8 * p.norm());
    }

    #[test]
    fn sample_damped_matches_direct_inverse() {
        let d = design();
        let p = build_preconditioner(&PreconditionerSpec::SampleDamped { lambda: 0.1 }, &d).unwrap().to_dense();
        let a = d.x.transpose() * &d.x + DMatrix::identity(20, 20) * 0.1;
        assert!((a * p - DMatrix::identity(20, 20)).norm() < 1e-9);
    }

    #[test]
    fn gram_agrees_with_dense() {
        let d = design();
        let p = build_preconditioner(&PreconditionerSpec::Power { alpha: 0.5 }, &d).unwrap();
        let dense = Preconditioner::Dense(p.to_dense());
        assert!((p.gram(&d.x) - dense.gram(&d.x)).norm() < 1e-12);
    }
}
