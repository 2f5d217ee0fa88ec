//! Versioned JSON experiment configuration.

use precond_risk::rkhs_sim::{build_model, NoiseKind, ThresholdRule};
use precond_risk::spectra::{
    make_poly_decay, make_two_atom, make_uniform, InterpFamily, PreconditionerSpec, PriorSpec, SpectralMeasure,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default)]
    pub description: String,
    pub spectrum: SpectrumConfig,
    #[serde(default = "isotropic")]
    pub prior: PriorSpec,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default)]
    pub preconditioners: Vec<PreconditionerSpec>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Output subdirectory; defaults to the experiment name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    pub pipeline: Pipeline,
}

fn isotropic() -> PriorSpec {
    PriorSpec::Isotropic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumConfig {
    /// Two equally weighted atoms `{a, kappa a}`, Frobenius normalized.
    TwoAtom { kappa: f64 },
    /// `n_atoms` equally spaced atoms on `[1, kappa]`, Frobenius normalized.
    Uniform { kappa: f64, n_atoms: usize },
    /// `i^-exponent` rescaled to condition number `kappa`, Frobenius normalized.
    PolyDecay { exponent: f64, kappa: f64, n_atoms: usize },
    /// Explicit `[value, weight]` pairs.
    Atoms {
        atoms: Vec<(f64, f64)>,
        #[serde(default)]
        normalized: bool,
    },
}

impl SpectrumConfig {
    pub fn build(&self) -> precond_risk::Result<SpectralMeasure> {
        match self {
            SpectrumConfig::TwoAtom { kappa } => make_two_atom(*kappa, true),
            SpectrumConfig::Uniform { kappa, n_atoms } => make_uniform(*kappa, *n_atoms, true),
            SpectrumConfig::PolyDecay { exponent, kappa, n_atoms } => make_poly_decay(*exponent, *kappa, *n_atoms),
            SpectrumConfig::Atoms { atoms, normalized } => SpectralMeasure::new(atoms.clone(), *normalized),
        }
    }
}

/// Flow times in units of `n / l_max`, where `l_max` is the top eigenvalue
/// of the preconditioned Gram matrix of each run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationGrid {
    pub n: usize,
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingGrid {
    /// `n^(-2s/(2rs+1))` for each sample size.
    Rate,
    Values {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pipeline {
    /// Limiting risk over `gammas`, optionally with Monte Carlo points.
    GammaSweep {
        gammas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        simulation: Option<SimulationGrid>,
    },
    /// Limiting risk along interpolation families. `snr`, when set,
    /// replaces `sigma2` by `E[x theta(x)] / snr`.
    AlphaSweep {
        gamma: f64,
        families: Vec<InterpFamily>,
        alphas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        snr: Option<f64>,
    },
    /// Bias with unobserved isotropic features of total signal `trace_term`.
    Misspecification {
        gamma: f64,
        trace_terms: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        simulation_n: Option<usize>,
    },
    /// Bias and variance along the gradient flow.
    Trajectory { gamma: f64, n: usize, time_grid: TimeGrid },
    /// Stationary and early-stopping bias for priors `Sigma_X^-beta`.
    Alignment { gamma: f64, n: usize, prior_exponents: Vec<f64>, time_grid: TimeGrid },
    /// `sqrt(y^T (X X^T)^-1 y / n)` against label noise and against the
    /// condition number of a two-atom covariance.
    Yky { gamma: f64, n: usize, sigmas: Vec<f64>, two_atom_kappas: Vec<f64> },
    /// Quadratic misspecification of strength `alpha_q`.
    Quadratic { gamma: f64, n: usize, alpha_qs: Vec<f64>, test_points: usize },
    /// Damped preconditioned updates in a truncated RKHS.
    Rkhs {
        n_trunc: usize,
        s: f64,
        r_values: Vec<f64>,
        sigma: f64,
        #[serde(default)]
        noise: NoiseKind,
        eta: f64,
        t_max: usize,
        n_values: Vec<usize>,
        dampings: DampingGrid,
        threshold: ThresholdRule,
        #[serde(default)]
        include_gd: bool,
    },
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::GammaSweep { .. } => "gamma_sweep",
            Pipeline::AlphaSweep { .. } => "alpha_sweep",
            Pipeline::Misspecification { .. } => "misspecification",
            Pipeline::Trajectory { .. } => "trajectory",
            Pipeline::Alignment { .. } => "alignment",
            Pipeline::Yky { .. } => "yky",
            Pipeline::Quadratic { .. } => "quadratic",
            Pipeline::Rkhs { .. } => "rkhs",
        }
    }

    fn uses_preconditioners(&self) -> bool {
        !matches!(self, Pipeline::AlphaSweep { .. } | Pipeline::Yky { .. } | Pipeline::Rkhs { .. })
    }

    fn needs_seeds(&self) -> bool {
        match self {
            Pipeline::GammaSweep { simulation, .. } => simulation.is_some(),
            Pipeline::Misspecification { simulation_n, .. } => simulation_n.is_some(),
            Pipeline::AlphaSweep { .. } => false,
            _ => true,
        }
    }
}

/// Parses JSON text; schema violations report the offending field path.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(if path == "." { "(root)".to_string() } else { path }, e.into_inner())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical serialization: object keys sorted, no whitespace.
pub fn canonical_json(cfg: &ExperimentConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    serde_json::to_string(&value).expect("value serializes")
}

pub fn pretty_json(cfg: &ExperimentConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    serde_json::to_string_pretty(&value).expect("value serializes") + "\n"
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(canonical_json(cfg).as_bytes()))
}

fn err(path: impl Into<String>, msg: impl ToString) -> CliError {
    CliError::config(path, msg)
}

fn check_gamma(path: &str, gamma: f64) -> CliResult<()> {
    if gamma > 1.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(err(path, format!("gamma must be finite and > 1, got {gamma}")))
    }
}

fn check_nonempty<T>(path: &str, v: &[T]) -> CliResult<()> {
    if v.is_empty() {
        Err(err(path, "must not be empty"))
    } else {
        Ok(())
    }
}

fn check_design(path: &str, n: usize, gamma: f64) -> CliResult<()> {
    if n < 2 {
        return Err(err(path, format!("need n >= 2, got {n}")));
    }
    let d = precond_risk::finite_sim::dimension_for(n, gamma);
    if d <= n {
        return Err(err(path, format!("d = round(gamma n) = {d} must exceed n = {n}")));
    }
    Ok(())
}

fn check_time_grid(path: &str, g: &TimeGrid) -> CliResult<()> {
    if g.points < 2 {
        return Err(err(format!("{path}.points"), "need at least 2 points"));
    }
    if !(g.lo > 0.0 && g.hi > g.lo && g.hi.is_finite()) {
        return Err(err(path, format!("need 0 < lo < hi, got lo = {}, hi = {}", g.lo, g.hi)));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn output_dir_name(&self) -> &str {
        self.output_path.as_deref().unwrap_or(&self.experiment)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.experiment.trim().is_empty() {
            return Err(err("experiment", "must not be empty"));
        }
        if let Some(p) = &self.output_path {
            if p.is_empty() || p.contains("..") || std::path::Path::new(p).is_absolute() {
                return Err(err("output_path", "must be a nonempty relative path without `..`"));
            }
        }
        let spectrum = self.spectrum.build().map_err(|e| err("spectrum", e))?;
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(err("sigma2", format!("must be finite and >= 0, got {}", self.sigma2)));
        }
        if let PriorSpec::CovariancePower { exponent } = self.prior {
            if !exponent.is_finite() {
                return Err(err("prior.exponent", "must be finite"));
            }
        }
        if self.pipeline.uses_preconditioners() {
            check_nonempty("preconditioners", &self.preconditioners)?;
        } else if !self.preconditioners.is_empty() {
            return Err(err(
                "preconditioners",
                format!("not used by the {} pipeline; leave empty", self.pipeline.name()),
            ));
        }
        for (i, p) in self.preconditioners.iter().enumerate() {
            p.validate().map_err(|e| err(format!("preconditioners[{i}]"), e))?;
            if spectrum.atoms().iter().any(|a| a.0 == 0.0) && p.eigen_map(0.0).is_some_and(|f| !f.is_finite()) {
                return Err(err(format!("preconditioners[{i}]"), "undefined at a zero eigenvalue of the spectrum"));
            }
        }
        if self.pipeline.needs_seeds() {
            check_nonempty("seeds", &self.seeds)?;
        }
        if self.seeds.iter().enumerate().any(|(i, s)| self.seeds[..i].contains(s)) {
            return Err(err("seeds", "contains duplicates"));
        }
        self.validate_pipeline(&spectrum)
    }

    fn validate_pipeline(&self, spectrum: &SpectralMeasure) -> CliResult<()> {
        match &self.pipeline {
            Pipeline::GammaSweep { gammas, simulation } => {
                check_nonempty("pipeline.gammas", gammas)?;
                for (i, g) in gammas.iter().enumerate() {
                    check_gamma(&format!("pipeline.gammas[{i}]"), *g)?;
                }
                if let Some(sim) = simulation {
                    check_nonempty("pipeline.simulation.gammas", &sim.gammas)?;
                    for (i, g) in sim.gammas.iter().enumerate() {
                        let path = format!("pipeline.simulation.gammas[{i}]");
                        check_gamma(&path, *g)?;
                        check_design(&path, sim.n, *g)?;
                    }
                } else if self.preconditioners.iter().all(|p| p.is_sample()) {
                    return Err(err("preconditioners", "sample preconditioners need a simulation grid"));
                }
            }
            Pipeline::AlphaSweep { gamma, families, alphas, snr } => {
                check_gamma("pipeline.gamma", *gamma)?;
                check_nonempty("pipeline.families", families)?;
                check_nonempty("pipeline.alphas", alphas)?;
                for (i, a) in alphas.iter().enumerate() {
                    if !(0.0..=1.0).contains(a) {
                        return Err(err(format!("pipeline.alphas[{i}]"), format!("must lie in [0, 1], got {a}")));
                    }
                }
                if alphas.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(err("pipeline.alphas", "must be strictly increasing"));
                }
                if let Some(s) = snr {
                    if !(*s > 0.0 && s.is_finite()) {
                        return Err(err("pipeline.snr", format!("must be finite and > 0, got {s}")));
                    }
                }
            }
            Pipeline::Misspecification { gamma, trace_terms, simulation_n } => {
                check_gamma("pipeline.gamma", *gamma)?;
                check_nonempty("pipeline.trace_terms", trace_terms)?;
                for (i, t) in trace_terms.iter().enumerate() {
                    if !(*t >= 0.0 && t.is_finite()) {
                        return Err(err(format!("pipeline.trace_terms[{i}]"), format!("must be >= 0, got {t}")));
                    }
                }
                if let Some(n) = simulation_n {
                    check_design("pipeline.simulation_n", *n, *gamma)?;
                }
            }
            Pipeline::Trajectory { gamma, n, time_grid } => {
                check_gamma("pipeline.gamma", *gamma)?;
                check_design("pipeline.n", *n, *gamma)?;
                check_time_grid("pipeline.time_grid", time_grid)?;
            }
            Pipeline::Alignment { gamma, n, prior_exponents, time_grid } => {
                check_gamma("pipeline.gamma", *gamma)?;
                check_design("pipeline.n", *n, *gamma)?;
                check_time_grid("pipeline.time_grid", time_grid)?;
                check_nonempty("pipeline.prior_exponents", prior_exponents)?;
                if spectrum.atoms().iter().any(|a| a.0 == 0.0) {
                    return Err(err("spectrum", "alignment priors need a spectrum without zero atoms"));
                }
                for (i, b) in prior_exponents.iter().enumerate() {
                    if !b.is_finite() {
                        return Err(err(format!("pipeline.prior_exponents[{i}]"), "must be finite"));
                    }
                }
            }
            Pipeline::Yky { gamma, n, sigmas, two_atom_kappas } => {
                check_gamma("pipeline.gamma", *gamma)?;
                check_design("pipeline.n", *n, *gamma)?;
                if sigmas.is_empty() && two_atom_kappas.is_empty() {
                    return Err(err("pipeline.sigmas", "sigmas and two_atom_kappas are both empty"));
                }
                for (i, s) in sigmas.iter().enumerate() {
                    if !(*s >= 0.0 && s.is_finite()) {
                        return Err(err(format!("pipeline.sigmas[{i}]"), format!("must be >= 0, got {s}")));
                    }
                }
                for (i, k) in two_atom_kappas.iter().enumerate() {
                    make_two_atom(*k, true).map_err(|e| err(format!("pipeline.two_atom_kappas[{i}]"), e))?;
                }
            }
            Pipeline::Quadratic { gamma, n, alpha_qs, test_points } => {
                check_gamma("pipeline.gamma", *gamma)?;
                check_design("pipeline.n", *n, *gamma)?;
                check_nonempty("pipeline.alpha_qs", alpha_qs)?;
                for (i, a) in alpha_qs.iter().enumerate() {
                    if !(*a >= 0.0 && a.is_finite()) {
                        return Err(err(format!("pipeline.alpha_qs[{i}]"), format!("must be >= 0, got {a}")));
                    }
                }
                if *test_points < 2 {
                    return Err(err("pipeline.test_points", "need at least 2 test points"));
                }
            }
            Pipeline::Rkhs { n_trunc, s, r_values, sigma, eta, t_max, n_values, dampings, threshold, .. } => {
                check_nonempty("pipeline.r_values", r_values)?;
                for (i, r) in r_values.iter().enumerate() {
                    build_model(*n_trunc, *s, *r, 0).map_err(|e| err(format!("pipeline.r_values[{i}]"), e))?;
                }
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(err("pipeline.sigma", format!("must be >= 0, got {sigma}")));
                }
                if !(*eta > 0.0 && *eta < 1.0) {
                    return Err(err("pipeline.eta", format!("must satisfy 0 < eta < 1, got {eta}")));
                }
                if *t_max == 0 {
                    return Err(err("pipeline.t_max", "must be positive"));
                }
                check_nonempty("pipeline.n_values", n_values)?;
                if let Some(i) = n_values.iter().position(|&n| n == 0) {
                    return Err(err(format!("pipeline.n_values[{i}]"), "must be positive"));
                }
                if let DampingGrid::Values { values } = dampings {
                    check_nonempty("pipeline.dampings.values", values)?;
                    for (i, a) in values.iter().enumerate() {
                        if !(*a > 0.0 && a.is_finite()) {
                            return Err(err(format!("pipeline.dampings.values[{i}]"), format!("must be > 0, got {a}")));
                        }
                    }
                }
                let ok = match threshold {
                    ThresholdRule::Absolute { epsilon } => *epsilon > 0.0 && epsilon.is_finite(),
                    ThresholdRule::RelativeToBest { factor } => *factor >= 1.0 && factor.is_finite(),
                };
                if !ok {
                    return Err(err("pipeline.threshold", "epsilon must be > 0 and factor >= 1"));
                }
            }
        }
        Ok(())
    }
}
