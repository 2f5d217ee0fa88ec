//! Preconditioned least squares in a truncated RKHS eigenbasis.
//!
//! The kernel operator has eigenvalues `mu_i = i^-s` and the teacher has
//! `L2` coefficients `f*_i = h_i mu_i^r`. A function is stored through its
//! coefficients `c` on the RKHS-orthonormal features `sqrt(mu_i) phi_i`, so
//! its `L2` coefficients are `c_i sqrt(mu_i)`. The update is
//! `c <- c - eta (mu + alpha)^-1 (Sigma_hat c - b)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{scale_cols, symmetrize};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRKHS {
    pub n_trunc: usize,
    pub mu: DVector<f64>,
    pub s: f64,
    pub r: f64,
    pub h: DVector<f64>,
    pub f_star: DVector<f64>,
    pub seed: u64,
}

impl SpectralRKHS {
    /// `||f*||^2` in `L2`.
    pub fn teacher_energy(&self) -> f64 {
        self.f_star.norm_squared()
    }

    /// Squared `L2` distance of the function with RKHS coefficients `c` to the teacher.
    pub fn risk(&self, c: &DVector<f64>) -> f64 {
        c.iter().zip(self.mu.iter()).zip(self.f_star.iter()).map(|((ci, mi), fi)| (ci * mi.sqrt() - fi).powi(2)).sum()
    }
}

pub fn build_model(n_trunc: usize, s: f64, r: f64, seed: u64) -> Result<SpectralRKHS> {
    if n_trunc < 2 {
        return Err(Error::domain(format!("truncation N must be >= 2, got {n_trunc}")));
    }
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::domain(format!("capacity exponent must satisfy s > 1, got {s}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("source exponent must satisfy r > 0, got {r}")));
    }
    if !(2.0 * r + 1.0 / s > 1.0) {
        return Err(Error::domain(format!("need 2r + 1/s > 1, got 2r + 1/s = {}", 2.0 * r + 1.0 / s)));
    }
    let mu = DVector::from_iterator(n_trunc, (1..=n_trunc).map(|i| (i as f64).powf(-s)));
    let mut rng = seeded(seed);
    let h = DVector::from_iterator(n_trunc, (0..n_trunc).map(|_| StandardNormal.sample(&mut rng)));
    let f_star = h.zip_map(&mu, |hi, mi| hi * mi.powf(r));
    Ok(SpectralRKHS { n_trunc, mu, s, r, h, f_star, seed })
}

/// Bounded label noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Uniform on `[-sigma, sigma]`.
    #[default]
    Uniform,
    /// `N(0, (sigma/2)^2)` conditioned on `|eps| <= sigma`.
    TruncatedGaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RKHSDataset {
    pub n: usize,
    /// `phi_i(x_j)` as an `n x N` matrix.
    pub features: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma: f64,
    pub noise: NoiseKind,
}

pub fn sample_dataset(model: &SpectralRKHS, n: usize, sigma: f64, noise: NoiseKind, seed: u64) -> Result<RKHSDataset> {
    if n == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("noise bound must be nonnegative, got {sigma}")));
    }
    let big_n = model.n_trunc;
    let mut rng = seeded(seed);
    let data: Vec<f64> = (0..n * big_n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let features = DMatrix::from_row_slice(n, big_n, &data);
    let clean = &features * &model.f_star;
    let eps = DVector::from_iterator(
        n,
        (0..n).map(|_| match noise {
            NoiseKind::Uniform if sigma > 0.0 => rng.random_range(-sigma..=sigma),
            NoiseKind::TruncatedGaussian if sigma > 0.0 => loop {
                let z: f64 = StandardNormal.sample(&mut rng);
                if z.abs() <= 2.0 {
                    break 0.5 * sigma * z;
                }
            },
            _ => 0.0,
        }),
    );
    Ok(RKHSDataset { n, features, y: clean + eps, sigma, noise })
}

/// Empirical covariance and cross moment on the RKHS features.
struct Moments {
    sigma_hat: DMatrix<f64>,
    b: DVector<f64>,
}

impl Moments {
    fn new(model: &SpectralRKHS, data: &RKHSDataset) -> Result<Self> {
        if data.features.ncols() != model.n_trunc {
            return Err(Error::domain("dataset truncation does not match the model"));
        }
        let k = scale_cols(&data.features, &model.mu.map(f64::sqrt));
        let n = data.n as f64;
        let mut sigma_hat = k.tr_mul(&k) / n;
        symmetrize(&mut sigma_hat);
        let b = k.tr_mul(&data.y) / n;
        Ok(Moments { sigma_hat, b })
    }
}

fn check_step(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::StepSize(eta));
    }
    Ok(())
}

fn iterate(model: &SpectralRKHS, mom: &Moments, scale: &DVector<f64>, t_max: usize) -> Vec<f64> {
    let mut c = DVector::zeros(model.n_trunc);
    let mut grad = DVector::zeros(model.n_trunc);
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(model.risk(&c));
    for _ in 0..t_max {
        grad.gemv(1.0, &mom.sigma_hat, &c, 0.0);
        grad -= &mom.b;
        c -= grad.component_mul(scale);
        out.push(model.risk(&c));
    }
    out
}

/// Risks `[R(f_0), ..., R(f_T)]` of the damped preconditioned update from `f_0 = 0`.
pub fn run_preconditioned(
    model: &SpectralRKHS,
    data: &RKHSDataset,
    eta: f64,
    alpha: f64,
    t_max: usize,
) -> Result<Vec<f64>> {
    check_step(eta)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Damping(alpha));
    }
    let mom = Moments::new(model, data)?;
    let scale = model.mu.map(|m| eta / (m + alpha));
    Ok(iterate(model, &mom, &scale, t_max))
}

/// Plain gradient descent, `c <- c - eta (Sigma_hat c - b)`.
pub fn run_gd(model: &SpectralRKHS, data: &RKHSDataset, eta: f64, t_max: usize) -> Result<Vec<f64>> {
    check_step(eta)?;
    let mom = Moments::new(model, data)?;
    let scale = DVector::from_element(model.n_trunc, eta);
    Ok(iterate(model, &mom, &scale, t_max))
}

/// First step whose risk is at most `epsilon`.
pub fn iterations_to_threshold(trajectory: &[f64], epsilon: f64) -> Option<usize> {
    trajectory.iter().position(|&r| r <= epsilon)
}

/// Damping `n^(-2s/(2rs+1))` suggested by the convergence theory.
pub fn rate_damping(n: usize, r: f64, s: f64) -> f64 {
    (n as f64).powf(-2.0 * s / (2.0 * r * s + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdRule {
    Absolute {
        epsilon: f64,
    },
    /// `factor` times the best risk reached by any damping on the same dataset.
    RelativeToBest {
        factor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub dataset: usize,
    pub alpha: f64,
    pub best_risk: f64,
    pub best_t: usize,
    pub final_risk: f64,
    pub threshold: f64,
    pub iters_to_threshold: Option<usize>,
}

/// Runs every damping on every dataset; rows are grouped by dataset in input order.
pub fn damping_sweep(
    model: &SpectralRKHS,
    datasets: &[RKHSDataset],
    alphas: &[f64],
    eta: f64,
    t_max: usize,
    rule: ThresholdRule,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(datasets.len() * alphas.len());
    for (k, data) in datasets.iter().enumerate() {
        let trajs =
            alphas.iter().map(|&a| run_preconditioned(model, data, eta, a, t_max)).collect::<Result<Vec<_>>>()?;
        rows.extend(summarize_sweep(data.n, k, alphas, &trajs, rule));
    }
    Ok(rows)
}

/// Sweep rows for one dataset from its trajectories, one per damping in `alphas`.
pub fn summarize_sweep(
    n: usize,
    dataset: usize,
    alphas: &[f64],
    trajs: &[Vec<f64>],
    rule: ThresholdRule,
) -> Vec<SweepRow> {
    assert_eq!(alphas.len(), trajs.len(), "one trajectory per damping");
    let bests: Vec<(usize, f64)> =
        trajs.iter().map(|tr| tr.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()).collect();
    let threshold = match rule {
        ThresholdRule::Absolute { epsilon } => epsilon,
        ThresholdRule::RelativeToBest { factor } => factor * bests.iter().map(|b| b.1).fold(f64::INFINITY, f64::min),
    };
    alphas
        .iter()
        .zip(trajs)
        .zip(&bests)
        .map(|((&alpha, tr), &(best_t, best_risk))| SweepRow {
            n,
            dataset,
            alpha,
            best_risk,
            best_t,
            final_risk: *tr.last().unwrap(),
            threshold,
            iters_to_threshold: iterations_to_threshold(tr, threshold),
        })
        .collect()
}
