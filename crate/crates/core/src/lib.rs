//! Generalization risk of preconditioned ridgeless least squares.
//!
//! * [`spectra`]: discrete spectral models of the covariance, prior and preconditioner.
//! * [`stieltjes`]: the companion Stieltjes transform fixed point and its derivative.
//! * [`risk_theory`]: limiting bias and variance, lower bounds and interpolation sweeps.
//! * [`finite_sim`]: exact conditional risk for sampled designs, gradient-flow trajectories
//!   and misspecified label models.
//! * [`rkhs_sim`]: preconditioned updates in a truncated RKHS eigenbasis.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod finite_sim;
pub mod linalg;
pub mod risk_theory;
pub mod rkhs_sim;
pub mod rng;
pub mod spectra;
pub mod stieltjes;

pub use error::{Error, Result};

/// Float formatting for CSV output: 17 significant digits, round-trip exact.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `n` points spaced geometrically from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut out: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
            out[0] = lo;
            out[n - 1] = hi;
            out
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let mut out: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            out[n - 1] = hi;
            out
        }
    }
}
