//! Discrete spectral models for the feature covariance, the teacher prior and
//! the preconditioner, all sharing one eigenbasis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;
const FROBENIUS_TOL: f64 = 1e-10;

/// Probability measure with finitely many atoms `(value, weight)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumRecord", into = "SpectrumRecord")]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    normalized: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumRecord {
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    normalized: bool,
}

impl TryFrom<SpectrumRecord> for SpectralMeasure {
    type Error = Error;
    fn try_from(r: SpectrumRecord) -> Result<Self> {
        SpectralMeasure::new(r.atoms, r.normalized)
    }
}

impl From<SpectralMeasure> for SpectrumRecord {
    fn from(s: SpectralMeasure) -> Self {
        SpectrumRecord { atoms: s.atoms, normalized: s.normalized }
    }
}

impl SpectralMeasure {
    /// Validates and stores the atoms. Atoms with identical values are merged.
    /// `normalized` asserts that the second moment is one.
    pub fn new(atoms: Vec<(f64, f64)>, normalized: bool) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("spectrum has no atoms"));
        }
        for &(v, w) in &atoms {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("atom value {v} is not a finite nonnegative number")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::domain(format!("atom weight {w} is not positive")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::domain(format!("weights sum to {total}, expected 1")));
        }
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, w) in atoms {
            match merged.iter_mut().find(|a| a.0 == v) {
                Some(a) => a.1 += w,
                None => merged.push((v, w)),
            }
        }
        let s = SpectralMeasure { atoms: merged, normalized };
        if normalized && (s.second_moment() - 1.0).abs() > FROBENIUS_TOL {
            return Err(Error::domain(format!("flagged as normalized but second moment is {}", s.second_moment())));
        }
        Ok(s)
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(vec![(value, 1.0)], value == 1.0)
    }

    /// Equal-weight measure on `values`, optionally rescaled to unit second moment.
    pub fn equal_weights(values: &[f64], frobenius_normalize: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("spectrum has no atoms"));
        }
        let w = 1.0 / values.len() as f64;
        let scale = if frobenius_normalize {
            let m2 = values.iter().map(|v| v * v).sum::<f64>() * w;
            if m2 <= 0.0 {
                return Err(Error::DegenerateSpectrum("cannot normalize an all-zero spectrum".into()));
            }
            1.0 / m2.sqrt()
        } else {
            1.0
        };
        // Exact 1/n weights can miss 1 by a few ulps; fix up the last one.
        let n = values.len();
        let atoms = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v * scale, if i + 1 == n { 1.0 - w * (n - 1) as f64 } else { w }))
            .collect();
        Self::new(atoms, frobenius_normalize)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_point_mass(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(v, w)| w * f(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn second_moment(&self) -> f64 {
        self.expect(|v| v * v)
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(0.0, f64::max)
    }

    /// Mass on strictly positive atoms.
    pub fn positive_mass(&self) -> f64 {
        self.atoms.iter().filter(|a| a.0 > 0.0).map(|a| a.1).sum()
    }

    /// max value over min positive value; infinite when no atom is positive.
    pub fn condition_number(&self) -> f64 {
        let min = self.atoms.iter().map(|a| a.0).filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            self.max_value() / min
        } else {
            f64::INFINITY
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|&(v, w)| (c * v, w)).collect(), self.normalized && c == 1.0)
    }

    /// Pushes the measure forward through `f`, keeping weights.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|&(v, w)| (f(v), w)).collect(), false)
    }
}

/// Two equally weighted atoms `{a, kappa a}`.
pub fn make_two_atom(kappa: f64, frobenius_normalize: bool) -> Result<SpectralMeasure> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be >= 1, got {kappa}")));
    }
    SpectralMeasure::equal_weights(&[1.0, kappa], frobenius_normalize)
}

/// Equally spaced, equally weighted atoms on `[a, kappa a]`.
pub fn make_uniform(kappa: f64, n_atoms: usize, frobenius_normalize: bool) -> Result<SpectralMeasure> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be >= 1, got {kappa}")));
    }
    if n_atoms < 2 {
        return Err(Error::domain(format!("n_atoms must be >= 2, got {n_atoms}")));
    }
    let step = (kappa - 1.0) / (n_atoms - 1) as f64;
    let mut values: Vec<f64> = (0..n_atoms).map(|i| 1.0 + step * i as f64).collect();
    values[n_atoms - 1] = kappa;
    SpectralMeasure::equal_weights(&values, frobenius_normalize)
}

/// Atoms proportional to `i^-exponent`, mapped affinely onto `[1, kappa]` and
/// normalized to unit second moment. Values are returned in decreasing order.
pub fn make_poly_decay(exponent: f64, kappa: f64, n_atoms: usize) -> Result<SpectralMeasure> {
    if !(exponent > 0.0) || !exponent.is_finite() {
        return Err(Error::domain(format!("exponent must be positive, got {exponent}")));
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be >= 1, got {kappa}")));
    }
    if n_atoms < 2 {
        return Err(Error::domain(format!("n_atoms must be >= 2, got {n_atoms}")));
    }
    let r_min = (n_atoms as f64).powf(-exponent);
    let values: Vec<f64> = (1..=n_atoms)
        .map(|i| {
            let r = (i as f64).powf(-exponent);
            1.0 + (kappa - 1.0) * (r - r_min) / (1.0 - r_min)
        })
        .collect();
    SpectralMeasure::equal_weights(&values, true)
}

/// Eigenvalue map of the teacher prior covariance as a function of the
/// feature covariance eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Sigma_theta = I.
    Isotropic,
    /// Sigma_theta = Sigma_X^-1.
    InverseCovariance,
    /// Sigma_theta = Sigma_X^exponent.
    CovariancePower { exponent: f64 },
    /// Sigma_theta = 0.
    Zero,
}

impl PriorSpec {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Isotropic => 1.0,
            PriorSpec::InverseCovariance => 1.0 / x,
            PriorSpec::CovariancePower { exponent } => x.powf(exponent),
            PriorSpec::Zero => 0.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            PriorSpec::Isotropic => "isotropic".into(),
            PriorSpec::InverseCovariance => "inverse_covariance".into(),
            PriorSpec::CovariancePower { exponent } => format!("covariance_power({exponent})"),
            PriorSpec::Zero => "zero".into(),
        }
    }
}

/// Symbolic preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreconditionerSpec {
    Identity,
    InversePopFisher,
    /// f(x) = x^-alpha.
    Power {
        alpha: f64,
    },
    /// f(x) = alpha/x + 1 - alpha.
    AdditiveInterp {
        alpha: f64,
    },
    /// f(x) = 1/(alpha x + 1 - alpha).
    DampedInverse {
        alpha: f64,
    },
    /// (X^T X)^+.
    SamplePseudoInverse,
    /// (X^T X + lambda I)^-1.
    SampleDamped {
        lambda: f64,
    },
    /// P = Sigma_theta.
    PriorMatch {
        prior: PriorSpec,
    },
}

impl PreconditionerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PreconditionerSpec::Power { alpha }
            | PreconditionerSpec::AdditiveInterp { alpha }
            | PreconditionerSpec::DampedInverse { alpha } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::domain(format!("{}: alpha must lie in [0, 1]", self.label())));
                }
            }
            PreconditionerSpec::SampleDamped { lambda } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::domain(format!("{}: lambda must be positive", self.label())));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_sample(&self) -> bool {
        matches!(self, PreconditionerSpec::SamplePseudoInverse | PreconditionerSpec::SampleDamped { .. })
    }

    /// Eigenvalue of P paired with the covariance eigenvalue `x`; `None` for sample kinds.
    pub fn eigen_map(&self, x: f64) -> Option<f64> {
        Some(match *self {
            PreconditionerSpec::Identity => 1.0,
            PreconditionerSpec::InversePopFisher => 1.0 / x,
            PreconditionerSpec::Power { alpha } => x.powf(-alpha),
            PreconditionerSpec::AdditiveInterp { alpha } => alpha / x + (1.0 - alpha),
            PreconditionerSpec::DampedInverse { alpha } => 1.0 / (alpha * x + (1.0 - alpha)),
            PreconditionerSpec::PriorMatch { prior } => prior.value(x),
            PreconditionerSpec::SamplePseudoInverse | PreconditionerSpec::SampleDamped { .. } => return None,
        })
    }

    /// Interpolation parameter, when the kind has one.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            PreconditionerSpec::Power { alpha }
            | PreconditionerSpec::AdditiveInterp { alpha }
            | PreconditionerSpec::DampedInverse { alpha } => Some(alpha),
            PreconditionerSpec::SampleDamped { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// Short name without parameters.
    pub fn name(&self) -> &'static str {
        match self {
            PreconditionerSpec::Identity => "identity",
            PreconditionerSpec::InversePopFisher => "inverse_pop_fisher",
            PreconditionerSpec::Power { .. } => "power",
            PreconditionerSpec::AdditiveInterp { .. } => "additive_interp",
            PreconditionerSpec::DampedInverse { .. } => "damped_inverse",
            PreconditionerSpec::SamplePseudoInverse => "sample_pseudo_inverse",
            PreconditionerSpec::SampleDamped { .. } => "sample_damped",
            PreconditionerSpec::PriorMatch { .. } => "prior_match",
        }
    }

    pub fn label(&self) -> String {
        match self {
            PreconditionerSpec::PriorMatch { prior } => format!("prior_match({})", prior.label()),
            other => match other.alpha() {
                Some(a) => format!("{}({a})", other.name()),
                None => other.name().to_string(),
            },
        }
    }

    fn checked_map(&self, x: f64) -> Result<f64> {
        let f = self.eigen_map(x).ok_or_else(|| Error::NoPopulationSpectrum(self.label()))?;
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::domain(format!(
                "{} maps eigenvalue {x} to {f}; P must be positive definite",
                self.label()
            )));
        }
        Ok(f)
    }

    /// Eigenvalue `x f(x)` of Sigma_X P, exactly one for the inverse Fisher.
    fn preconditioned(&self, x: f64) -> Result<f64> {
        let f = self.checked_map(x)?;
        Ok(if matches!(self, PreconditionerSpec::InversePopFisher) { 1.0 } else { x * f })
    }
}

/// The three interpolating families between gradient descent (alpha = 0) and
/// natural gradient descent (alpha = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpFamily {
    Additive,
    Damped,
    Power,
}

impl InterpFamily {
    pub const ALL: [InterpFamily; 3] = [InterpFamily::Additive, InterpFamily::Damped, InterpFamily::Power];

    pub fn at(self, alpha: f64) -> PreconditionerSpec {
        match self {
            InterpFamily::Additive => PreconditionerSpec::AdditiveInterp { alpha },
            InterpFamily::Damped => PreconditionerSpec::DampedInverse { alpha },
            InterpFamily::Power => PreconditionerSpec::Power { alpha },
        }
    }

    /// Left end of the alpha range on which the stationary bias (isotropic
    /// prior) is provably nondecreasing, for condition number `kappa`.
    pub fn bias_monotone_from(self, kappa: f64) -> f64 {
        match self {
            InterpFamily::Additive => 0.0,
            InterpFamily::Power => ((kappa.ln() - 1.0) / kappa.ln()).max(0.0),
            InterpFamily::Damped => ((kappa - 2.0) / (kappa - 1.0)).max(0.0),
        }
    }
}

/// Spectrum of Sigma_X P: atoms `x -> x f(x)`.
pub fn precondition_spectrum(fx: &SpectralMeasure, spec: &PreconditionerSpec) -> Result<SpectralMeasure> {
    spec.validate()?;
    let atoms = fx.atoms().iter().map(|&(x, w)| Ok((spec.preconditioned(x)?, w))).collect::<Result<Vec<_>>>()?;
    let normalized = matches!(spec, PreconditionerSpec::Identity) && fx.is_normalized();
    SpectralMeasure::new(atoms, normalized)
}

/// One co-diagonal eigen-direction: covariance, prior and preconditioned
/// covariance eigenvalues with their mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAtom {
    pub x: f64,
    pub theta: f64,
    pub xp: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectrum {
    triples: Vec<JointAtom>,
}

impl JointSpectrum {
    pub fn new(triples: Vec<JointAtom>) -> Result<Self> {
        if triples.is_empty() {
            return Err(Error::domain("joint spectrum has no atoms"));
        }
        for t in &triples {
            if !(t.x > 0.0) || !t.x.is_finite() {
                return Err(Error::domain(format!("covariance eigenvalue {} must be positive", t.x)));
            }
            if !(t.theta >= 0.0) || !t.theta.is_finite() {
                return Err(Error::domain(format!("prior eigenvalue {} must be nonnegative", t.theta)));
            }
            if !(t.xp >= 0.0) || !t.xp.is_finite() {
                return Err(Error::domain(format!("preconditioned eigenvalue {} must be nonnegative", t.xp)));
            }
            if !(t.weight > 0.0) {
                return Err(Error::domain("joint weights must be positive"));
            }
        }
        let total: f64 = triples.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::domain(format!("joint weights sum to {total}, expected 1")));
        }
        Ok(JointSpectrum { triples })
    }

    pub fn triples(&self) -> &[JointAtom] {
        &self.triples
    }

    pub fn expect(&self, f: impl Fn(&JointAtom) -> f64) -> f64 {
        self.triples.iter().map(|t| t.weight * f(t)).sum()
    }

    /// Marginal law of the preconditioned eigenvalue.
    pub fn xp_measure(&self) -> Result<SpectralMeasure> {
        SpectralMeasure::new(self.triples.iter().map(|t| (t.xp, t.weight)).collect(), false)
    }
}

/// Joint spectrum for covariance `fx`, prior eigenvalue map `prior_map`
/// and preconditioner `spec`.
pub fn make_joint(
    fx: &SpectralMeasure,
    prior_map: impl Fn(f64) -> f64,
    spec: &PreconditionerSpec,
) -> Result<JointSpectrum> {
    spec.validate()?;
    let triples = fx
        .atoms()
        .iter()
        .map(|&(x, weight)| {
            let theta = prior_map(x);
            if !(theta >= 0.0) {
                return Err(Error::domain(format!("prior map gives {theta} at eigenvalue {x}")));
            }
            Ok(JointAtom { x, theta, xp: spec.preconditioned(x)?, weight })
        })
        .collect::<Result<Vec<_>>>()?;
    JointSpectrum::new(triples)
}
