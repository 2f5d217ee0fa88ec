use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::conditional::FlowSpectrum;
use super::design::{realized_eigenvalues, sample_rows, Design};
use super::precond::build_preconditioner;
use super::solve::stationary_solution;
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};
use crate::spectra::{PreconditionerSpec, PriorSpec, SpectralMeasure};

const THETA_STREAM: u64 = 1;
const VARIANCE_STREAM: u64 = 2;
const TEST_STREAM: u64 = 3;
const UNOBSERVED_STREAM: u64 = 4;
const TEST_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelKind {
    WellSpecified,
    /// Adds `alpha_q (|x|^2 - Tr Sigma_X)` to the linear teacher.
    QuadraticMisspec {
        alpha_q: f64,
    },
    /// Adds `x_c^T theta_c` for `d_c` features that the model does not see.
    UnobservedFeatures {
        d_c: usize,
        spectrum: SpectralMeasure,
        prior: PriorSpec,
    },
}

impl LabelKind {
    pub fn label(&self) -> String {
        match self {
            LabelKind::WellSpecified => "well_specified".into(),
            LabelKind::QuadraticMisspec { alpha_q } => format!("quadratic({alpha_q})"),
            LabelKind::UnobservedFeatures { d_c, .. } => format!("unobserved({d_c})"),
        }
    }
}

/// Teacher and noise: `y = x^T theta* + misspecification + eps`,
/// `theta* ~ N(0, Sigma_theta / d)`, `Var(eps) = sigma^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModel {
    pub kind: LabelKind,
    pub sigma: f64,
    pub prior: PriorSpec,
}

impl LabelModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!("noise level must be nonnegative, got {}", self.sigma)));
        }
        match &self.kind {
            LabelKind::QuadraticMisspec { alpha_q } if !alpha_q.is_finite() => {
                Err(Error::domain("alpha_q must be finite"))
            }
            LabelKind::UnobservedFeatures { d_c: 0, .. } => Err(Error::domain("d_c must be positive")),
            _ => Ok(()),
        }
    }

    /// `Tr(Sigma_X^c Sigma_theta^c) / d_c` in the limit, zero without unobserved features.
    pub fn trace_term(&self) -> f64 {
        match &self.kind {
            LabelKind::UnobservedFeatures { spectrum, prior, .. } => spectrum.expect(|x| x * prior.value(x)),
            _ => 0.0,
        }
    }
}

pub fn sample_theta_star(sigma_x_eigs: &DVector<f64>, prior: &PriorSpec, rng: &mut Rng) -> DVector<f64> {
    let d = sigma_x_eigs.len() as f64;
    sigma_x_eigs.map(|s| {
        let z: f64 = StandardNormal.sample(rng);
        (prior.value(s) / d).sqrt() * z
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Fresh test points per replicate for the quadratic model.
    pub test_points: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { test_points: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateRisk {
    pub seed: u64,
    pub bias: f64,
    pub variance: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std =
            if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSummary {
    pub bias: MeanStd,
    pub variance: MeanStd,
    pub risk: MeanStd,
}

impl RiskSummary {
    pub fn of(reps: &[ReplicateRisk]) -> Self {
        RiskSummary {
            bias: MeanStd::of(reps.iter().map(|r| r.bias)),
            variance: MeanStd::of(reps.iter().map(|r| r.variance)),
            risk: MeanStd::of(reps.iter().map(|r| r.risk)),
        }
    }
}

/// Risk of the stationary solution on one design.
///
/// Well-specified and unobserved-feature models use exact conditional
/// formulas. The quadratic model draws `theta*`, fits the noise-averaged
/// estimator and measures its bias on fresh test points; its variance is
/// exact, with the noise level raised by the empirical variance of the
/// quadratic term.
pub fn simulate_replicate(
    design: &Design,
    spec: &PreconditionerSpec,
    labels: &LabelModel,
    opts: &SimOptions,
) -> Result<ReplicateRisk> {
    labels.validate()?;
    let p = build_preconditioner(spec, design)?;
    let flow = FlowSpectrum::new(design, &p)?;
    let f = flow.stationary_filter();
    let sigma2 = labels.sigma * labels.sigma;
    let (bias, variance) = match &labels.kind {
        LabelKind::WellSpecified => (flow.bias(&flow.prior_terms(&labels.prior), &f), flow.variance(sigma2, &f)),
        LabelKind::UnobservedFeatures { d_c, spectrum, prior } => {
            let eigs_c = realized_eigenvalues(spectrum, *d_c);
            let x_c = sample_rows(design.n, &eigs_c, design.entry_dist, &mut substream(design.seed, UNOBSERVED_STREAM));
            let theta_c = eigs_c.map(|s| prior.value(s));
            let g_c = flow.unobserved_terms(&x_c, &theta_c);
            let bias =
                flow.bias(&flow.prior_terms(&labels.prior), &f) + flow.unobserved_bias(&g_c, &f) + labels.trace_term();
            (bias, flow.variance(sigma2, &f))
        }
        LabelKind::QuadraticMisspec { alpha_q } => {
            if opts.test_points < 2 {
                return Err(Error::domain("quadratic misspecification needs at least 2 test points"));
            }
            let q = Quadratic { alpha_q: *alpha_q, trace: design.sigma_x_eigs.sum() };
            let theta =
                sample_theta_star(&design.sigma_x_eigs, &labels.prior, &mut substream(design.seed, THETA_STREAM));
            let y = &design.x * &theta + q.eval_rows(&design.x);
            let theta_hat = stationary_solution(design, &p, &y)?;
            let extra = q.held_out_variance(design, opts.test_points);
            let bias = q.test_error(design, &theta, &theta_hat, opts.test_points);
            (bias, flow.variance(sigma2 + extra, &f))
        }
    };
    Ok(ReplicateRisk { seed: design.seed, bias, variance, risk: bias + variance })
}

pub fn simulate_risk(
    designs: &[Design],
    spec: &PreconditionerSpec,
    labels: &LabelModel,
    opts: &SimOptions,
) -> Result<(Vec<ReplicateRisk>, RiskSummary)> {
    if designs.is_empty() {
        return Err(Error::domain("no replicates"));
    }
    let reps = designs.iter().map(|d| simulate_replicate(d, spec, labels, opts)).collect::<Result<Vec<_>>>()?;
    let summary = RiskSummary::of(&reps);
    Ok((reps, summary))
}

struct Quadratic {
    alpha_q: f64,
    trace: f64,
}

impl Quadratic {
    fn eval_rows(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(x.nrows(), x.row_iter().map(|r| self.alpha_q * (r.norm_squared() - self.trace)))
    }

    fn chunks(design: &Design, points: usize, stream: u64) -> impl Iterator<Item = DMatrix<f64>> + '_ {
        let mut rng = substream(design.seed, stream);
        let mut left = points;
        std::iter::from_fn(move || {
            if left == 0 {
                return None;
            }
            let rows = left.min(TEST_CHUNK);
            left -= rows;
            Some(sample_rows(rows, &design.sigma_x_eigs, design.entry_dist, &mut rng))
        })
    }

    fn held_out_variance(&self, design: &Design, points: usize) -> f64 {
        if self.alpha_q == 0.0 {
            return 0.0;
        }
        let values: Vec<f64> = Self::chunks(design, points, VARIANCE_STREAM)
            .flat_map(|x| self.eval_rows(&x).iter().copied().collect::<Vec<_>>())
            .collect();
        MeanStd::of(values).std.powi(2)
    }

    /// Mean of `(f*(x) - x^T theta_hat)^2` over fresh points.
    fn test_error(&self, design: &Design, theta: &DVector<f64>, theta_hat: &DVector<f64>, points: usize) -> f64 {
        let diff = theta - theta_hat;
        let mut total = 0.0;
        for x in Self::chunks(design, points, TEST_STREAM) {
            let err = &x * &diff + self.eval_rows(&x);
            total += err.norm_squared();
        }
        total / points as f64
    }
}
