//! Finite-sample counterpart of the limiting formulas: sampled designs,
//! realized preconditioners, exact conditional bias and variance given `X`,
//! gradient-flow paths and misspecified label models.

mod conditional;
mod design;
mod labels;
mod precond;
mod solve;

pub use conditional::{
    conditional_bias, conditional_variance, optimal_early_stopping, trajectory, EarlyStopping, FlowSpectrum,
    PriorTerms, TrajectoryPoint,
};
pub use design::{apportion, dimension_for, realized_eigenvalues, sample_design, sample_rows, Design, EntryDist};
pub use labels::{
    sample_theta_star, simulate_replicate, simulate_risk, LabelKind, LabelModel, MeanStd, ReplicateRisk, RiskSummary,
    SimOptions,
};
pub use precond::{build_preconditioner, Preconditioner};
pub use solve::{min_norm_check, stationary_solution, yky_diagnostic};
