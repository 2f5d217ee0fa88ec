//! Closed-form limiting bias and variance of the preconditioned ridgeless
//! interpolant, their lower bounds, and interpolation sweeps.

use crate::error::{Error, Result};
use crate::format_float;
use crate::spectra::{
    make_joint, precondition_spectrum, InterpFamily, JointSpectrum, PreconditionerSpec, SpectralMeasure,
};
use crate::stieltjes::solve_m;

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub bias: f64,
    pub variance: f64,
    pub total: f64,
    pub m0: f64,
    pub m_prime: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub preconditioner: String,
    pub alpha: Option<f64>,
}

impl RiskReport {
    pub const CSV_HEADER: [&'static str; 9] =
        ["gamma", "sigma2", "preconditioner", "alpha", "bias", "variance", "total", "m0", "m_prime"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            format_float(self.gamma),
            format_float(self.sigma2),
            self.preconditioner.clone(),
            self.alpha.map(format_float).unwrap_or_default(),
            format_float(self.bias),
            format_float(self.variance),
            format_float(self.total),
            format_float(self.m0),
            format_float(self.m_prime),
        ]
    }
}

/// Energy of the part of the teacher living in unobserved features,
/// `Tr(Sigma_X^c Sigma_theta^c) / d_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisspecSpec {
    pub trace_term: f64,
}

impl MisspecSpec {
    pub fn new(trace_term: f64) -> Result<Self> {
        if !(trace_term >= 0.0) || !trace_term.is_finite() {
            return Err(Error::domain(format!("trace term must be nonnegative, got {trace_term}")));
        }
        Ok(MisspecSpec { trace_term })
    }

    /// `E[x_c theta_c]` for unobserved covariance `fx_c` and prior map `prior_c`.
    pub fn from_spectra(fx_c: &SpectralMeasure, prior_c: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(fx_c.expect(|x| x * prior_c(x)))
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::domain(format!("sigma2 must be nonnegative, got {sigma2}")));
    }
    Ok(())
}

/// `sigma2 (m'/m^2 - 1)` at `lambda -> 0+`.
pub fn theoretical_variance(fxp: &SpectralMeasure, gamma: f64, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let sol = solve_m(fxp, gamma, 0.0)?;
    Ok(sigma2 * (sol.ratio() - 1.0))
}

/// `m'/m^2 E[x theta / (1 + xp m)^2]` at `lambda -> 0+`.
pub fn theoretical_bias(joint: &JointSpectrum, gamma: f64) -> Result<f64> {
    let sol = solve_m(&joint.xp_measure()?, gamma, 0.0)?;
    Ok(bias_at(joint, sol.m0, sol.ratio()))
}

fn bias_at(joint: &JointSpectrum, m: f64, ratio: f64) -> f64 {
    ratio
        * joint.expect(|t| {
            let den = 1.0 + t.xp * m;
            t.x * t.theta / (den * den)
        })
}

/// `1/(gamma m*)`, where `m*` solves the fixed point for `P = Sigma_theta`.
pub fn bias_lower_bound(fx: &SpectralMeasure, prior_map: impl Fn(f64) -> f64, gamma: f64) -> Result<f64> {
    let fxp = fx.map(|x| x * prior_map(x))?;
    let sol = solve_m(&fxp, gamma, 0.0)?;
    Ok(1.0 / (gamma * sol.m0))
}

/// Bias with unobserved features: `B_theta + trace_term (1 + V0)` with the
/// unit-noise variance `V0 = m'/m^2 - 1`.
pub fn misspecified_bias(joint: &JointSpectrum, gamma: f64, mis: &MisspecSpec) -> Result<f64> {
    let sol = solve_m(&joint.xp_measure()?, gamma, 0.0)?;
    Ok(bias_at(joint, sol.m0, sol.ratio()) + mis.trace_term * sol.ratio())
}

/// Signal-to-noise ratio `E[x theta] / sigma2` used to label sweeps.
pub fn snr(fx: &SpectralMeasure, prior_map: impl Fn(f64) -> f64, sigma2: f64) -> f64 {
    fx.expect(|x| x * prior_map(x)) / sigma2
}

/// Bias, variance and Stieltjes quantities for one preconditioner.
pub fn risk_report(
    fx: &SpectralMeasure,
    prior_map: impl Fn(f64) -> f64,
    spec: &PreconditionerSpec,
    gamma: f64,
    sigma2: f64,
) -> Result<RiskReport> {
    check_sigma2(sigma2)?;
    if spec.is_sample() {
        return Err(Error::NoPopulationSpectrum(spec.label()));
    }
    let joint = make_joint(fx, prior_map, spec)?;
    let sol = solve_m(&joint.xp_measure()?, gamma, 0.0)?;
    let bias = bias_at(&joint, sol.m0, sol.ratio());
    let variance = sigma2 * (sol.ratio() - 1.0);
    Ok(RiskReport {
        bias,
        variance,
        total: bias + variance,
        m0: sol.m0,
        m_prime: sol.m_prime,
        gamma,
        sigma2,
        preconditioner: spec.name().to_string(),
        alpha: spec.alpha(),
    })
}

pub fn sweep_alpha(
    fx: &SpectralMeasure,
    prior_map: impl Fn(f64) -> f64,
    gamma: f64,
    sigma2: f64,
    family: InterpFamily,
    alphas: &[f64],
) -> Result<Vec<(f64, RiskReport)>> {
    if alphas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain("alpha grid must be sorted"));
    }
    alphas
        .iter()
        .map(|&a| {
            let spec = family.at(a);
            precondition_spectrum(fx, &spec)?;
            Ok((a, risk_report(fx, &prior_map, &spec, gamma, sigma2)?))
        })
        .collect()
}
