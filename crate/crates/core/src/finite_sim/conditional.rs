use nalgebra::{DMatrix, DVector};

use super::design::Design;
use super::precond::Preconditioner;
use crate::error::{Error, Result};
use crate::geomspace;
use crate::linalg::{scale_rows, sym_eigen};
use crate::spectra::PriorSpec;

/// Relative floor on the smallest Gram eigenvalue.
const GRAM_RCOND: f64 = 1e-12;

/// Spectral data of one (design, preconditioner) pair from which every
/// conditional bias and variance along the gradient flow follows.
///
/// With `S = X P X^T = U diag(l) U^T` the flow gives `theta(t) = P X^T U diag(f) U^T y`
/// where `f_i = (1 - exp(-t l_i / n)) / l_i`.
#[derive(Debug, Clone)]
pub struct FlowSpectrum {
    n: usize,
    d: usize,
    eigs: DVector<f64>,
    u: DMatrix<f64>,
    /// `X^T U`.
    xu: DMatrix<f64>,
    /// `P X^T U`.
    qu: DMatrix<f64>,
    /// `U^T X P Sigma_X P X^T U`.
    k_hat: DMatrix<f64>,
    sigma_x: DVector<f64>,
}

/// Prior-dependent part of the bias.
#[derive(Debug, Clone)]
pub struct PriorTerms {
    /// `Tr(Sigma_theta Sigma_X) / d`.
    base: f64,
    /// diag of `U^T X Sigma_theta Sigma_X P X^T U`, divided by `d`.
    h: DVector<f64>,
    /// `U^T X Sigma_theta X^T U / d`.
    g_hat: DMatrix<f64>,
}

impl FlowSpectrum {
    pub fn new(design: &Design, p: &Preconditioner) -> Result<Self> {
        if p.dim() != design.d {
            return Err(Error::domain("preconditioner dimension does not match the design"));
        }
        let (eigs, u) = sym_eigen(p.gram(&design.x));
        let top = eigs[eigs.len() - 1];
        if !(eigs[0] > GRAM_RCOND * top) {
            return Err(Error::numerical(
                "flow_spectrum",
                format!("Gram matrix X P X^T is singular (eigenvalues {:e} .. {:e})", eigs[0], top),
            ));
        }
        let xu = design.x.tr_mul(&u);
        let qu = p.apply(&xu);
        let k_hat = qu.tr_mul(&scale_rows(&qu, &design.sigma_x_eigs));
        Ok(FlowSpectrum { n: design.n, d: design.d, eigs, u, xu, qu, k_hat, sigma_x: design.sigma_x_eigs.clone() })
    }

    /// Gram eigenvalues in ascending order.
    pub fn gram_eigenvalues(&self) -> &DVector<f64> {
        &self.eigs
    }

    pub fn gram_eigenvectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn prior_terms(&self, prior: &PriorSpec) -> PriorTerms {
        let theta = self.sigma_x.map(|s| prior.value(s));
        let d = self.d as f64;
        let base = theta.iter().zip(self.sigma_x.iter()).map(|(t, s)| t * s).sum::<f64>() / d;
        let ts = theta.component_mul(&self.sigma_x);
        let h = DVector::from_iterator(
            self.n,
            (0..self.n).map(|i| {
                let (a, b) = (self.xu.column(i), self.qu.column(i));
                (0..self.d).map(|k| a[k] * ts[k] * b[k]).sum::<f64>() / d
            }),
        );
        let g_hat = self.xu.tr_mul(&scale_rows(&self.xu, &theta)) / d;
        PriorTerms { base, h, g_hat }
    }

    /// `U^T X_c Sigma_theta^c X_c^T U / d_c` for unobserved features `x_c`.
    pub fn unobserved_terms(&self, x_c: &DMatrix<f64>, theta_c: &DVector<f64>) -> DMatrix<f64> {
        let cu = x_c.tr_mul(&self.u);
        cu.tr_mul(&scale_rows(&cu, theta_c)) / theta_c.len() as f64
    }

    /// Filter at the stationary point, `f_i = 1/l_i`.
    pub fn stationary_filter(&self) -> DVector<f64> {
        self.eigs.map(|l| 1.0 / l)
    }

    /// Filter at flow time `t`.
    pub fn filter_at(&self, t: f64) -> DVector<f64> {
        if t.is_infinite() {
            return self.stationary_filter();
        }
        let n = self.n as f64;
        self.eigs.map(|l| -(-t * l / n).exp_m1() / l)
    }

    pub fn bias(&self, terms: &PriorTerms, f: &DVector<f64>) -> f64 {
        terms.base - 2.0 * f.dot(&terms.h) + quadratic(&self.k_hat, &terms.g_hat, f)
    }

    /// Extra bias from unobserved features, excluding the irreducible `trace_term`.
    pub fn unobserved_bias(&self, g_c: &DMatrix<f64>, f: &DVector<f64>) -> f64 {
        quadratic(&self.k_hat, g_c, f)
    }

    pub fn variance(&self, sigma2: f64, f: &DVector<f64>) -> f64 {
        sigma2 * f.iter().zip(self.k_hat.diagonal().iter()).map(|(fi, k)| fi * fi * k).sum::<f64>()
    }

    /// Geometric grid over `[1e-2, 1e2] n / l_max` with `points` entries.
    pub fn default_time_grid(&self, points: usize) -> Vec<f64> {
        let scale = self.n as f64 / self.eigs[self.eigs.len() - 1];
        geomspace(1e-2 * scale, 1e2 * scale, points)
    }
}

/// `sum_ij f_i f_j K_ij G_ij`.
fn quadratic(k: &DMatrix<f64>, g: &DMatrix<f64>, f: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for j in 0..f.len() {
        let mut col = 0.0;
        for i in 0..f.len() {
            col += f[i] * k[(i, j)] * g[(i, j)];
        }
        total += f[j] * col;
    }
    total
}

/// One point of a gradient-flow path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub bias: f64,
    pub variance: f64,
    pub risk: f64,
}

/// Exact bias given `X`, averaged over the prior `theta* ~ N(0, Sigma_theta / d)`.
pub fn conditional_bias(design: &Design, p: &Preconditioner, prior: &PriorSpec) -> Result<f64> {
    let flow = FlowSpectrum::new(design, p)?;
    Ok(flow.bias(&flow.prior_terms(prior), &flow.stationary_filter()))
}

/// Exact variance given `X`, averaged over the label noise.
pub fn conditional_variance(design: &Design, p: &Preconditioner, sigma2: f64) -> Result<f64> {
    let flow = FlowSpectrum::new(design, p)?;
    Ok(flow.variance(sigma2, &flow.stationary_filter()))
}

pub fn trajectory(
    design: &Design,
    p: &Preconditioner,
    prior: &PriorSpec,
    sigma2: f64,
    t_grid: &[f64],
) -> Result<Vec<TrajectoryPoint>> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain("time grid must be sorted and nonnegative"));
    }
    let flow = FlowSpectrum::new(design, p)?;
    let terms = flow.prior_terms(prior);
    Ok(t_grid.iter().map(|&t| flow_point(&flow, &terms, sigma2, t)).collect())
}

pub(crate) fn flow_point(flow: &FlowSpectrum, terms: &PriorTerms, sigma2: f64, t: f64) -> TrajectoryPoint {
    let f = flow.filter_at(t);
    let bias = flow.bias(terms, &f);
    let variance = flow.variance(sigma2, &f);
    TrajectoryPoint { t, bias, variance, risk: bias + variance }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopping {
    /// Grid time minimizing the risk.
    pub t_star: f64,
    pub risk: f64,
    pub bias: f64,
    pub variance: f64,
    /// Grid time minimizing the bias alone.
    pub t_bias: f64,
    pub bias_min: f64,
}

/// Grid minima of risk and of bias; ties go to the earliest time.
pub fn optimal_early_stopping(traj: &[TrajectoryPoint]) -> Result<EarlyStopping> {
    let first = traj.first().ok_or_else(|| Error::domain("empty trajectory"))?;
    let mut best = *first;
    let mut best_bias = *first;
    for p in &traj[1..] {
        if p.risk < best.risk {
            best = *p;
        }
        if p.bias < best_bias.bias {
            best_bias = *p;
        }
    }
    Ok(EarlyStopping {
        t_star: best.t,
        risk: best.risk,
        bias: best.bias,
        variance: best.variance,
        t_bias: best_bias.t,
        bias_min: best_bias.bias,
    })
}
