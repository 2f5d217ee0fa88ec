//! Companion Stieltjes transform of the limiting spectrum of `X P X^T / n`.
//!
//! For `tau ~ F_xp` the transform at `z = -lambda` is the positive root of
//! `lambda m + gamma E[tau m / (1 + tau m)] = 1`.

use crate::error::{Error, Result};
use crate::spectra::SpectralMeasure;

const MAX_ITER: usize = 10_000;
const BISECT_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesSolution {
    /// m(-lambda).
    pub m0: f64,
    /// m'(-lambda).
    pub m_prime: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// |lambda m + gamma E[tau m/(1+tau m)] - 1| at `m0`.
    pub residual: f64,
}

impl StieltjesSolution {
    /// m' / m^2, which equals one plus the unit-noise variance.
    pub fn ratio(&self) -> f64 {
        self.m_prime / (self.m0 * self.m0)
    }
}

fn defect(fxp: &SpectralMeasure, gamma: f64, lambda: f64, m: f64) -> f64 {
    lambda * m + gamma * fxp.expect(|t| t * m / (1.0 + t * m)) - 1.0
}

fn defect_slope(fxp: &SpectralMeasure, gamma: f64, lambda: f64, m: f64) -> f64 {
    lambda + gamma * fxp.expect(|t| t / ((1.0 + t * m) * (1.0 + t * m)))
}

pub fn solve_m(fxp: &SpectralMeasure, gamma: f64, lambda: f64) -> Result<StieltjesSolution> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::OutOfRegime(format!("gamma = {gamma}, need gamma > 1")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let mean = fxp.mean();
    if !(mean > 0.0) {
        return Err(Error::DegenerateSpectrum("all atoms are zero".into()));
    }
    if lambda == 0.0 && gamma * fxp.positive_mass() <= 1.0 {
        return Err(Error::DegenerateSpectrum(format!(
            "gamma times the positive mass is {} <= 1, no positive root at lambda = 0",
            gamma * fxp.positive_mass()
        )));
    }

    let phi = |m: f64| defect(fxp, gamma, lambda, m);
    let (mut lo, mut hi) = (1e-16 / mean, 1e16 / mean);
    if !(phi(lo) < 0.0 && phi(hi) > 0.0) {
        return Err(Error::numerical("solve_m", "initial bracket does not enclose the root"));
    }

    // Geometric bisection: the root can sit anywhere in 32 decades.
    let mut iter = 0;
    while hi / lo > 1.0 + BISECT_RTOL {
        iter += 1;
        if iter > MAX_ITER {
            return Err(Error::NonConvergence { op: "solve_m", residual: phi(lo).abs().max(phi(hi).abs()) });
        }
        let mid = (lo * hi).sqrt();
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut m = (lo * hi).sqrt();
    for _ in 0..8 {
        let step = phi(m) / defect_slope(fxp, gamma, lambda, m);
        let next = (m - step).clamp(lo * (1.0 - 1e-12), hi * (1.0 + 1e-12));
        let done = (next - m).abs() <= 4.0 * f64::EPSILON * m;
        m = next;
        if done {
            break;
        }
    }

    let residual = phi(m).abs();
    if residual > 1e-12 * m.max(1.0) {
        return Err(Error::NonConvergence { op: "solve_m", residual });
    }
    let mut sol = StieltjesSolution { m0: m, m_prime: f64::NAN, lambda, gamma, residual };
    sol.m_prime = m_derivative(fxp, gamma, &sol)?;
    Ok(sol)
}

/// `m' = (1/m^2 - gamma E[tau^2/(1+tau m)^2])^-1`, evaluated as
/// `m^2 / (1 - gamma E[(tau m/(1+tau m))^2])`.
pub fn m_derivative(fxp: &SpectralMeasure, gamma: f64, sol: &StieltjesSolution) -> Result<f64> {
    let m = sol.m0;
    let q2 = fxp.expect(|t| {
        let q = t * m / (1.0 + t * m);
        q * q
    });
    let denom = 1.0 - gamma * q2;
    if !(denom > 0.0) {
        return Err(Error::numerical(
            "m_derivative",
            format!("nonpositive denominator {denom:e}; lambda is at the spectrum edge"),
        ));
    }
    Ok(m * m / denom)
}

/// Central difference estimate of m'(-lambda), a test oracle for [`m_derivative`].
pub fn finite_diff_check(fxp: &SpectralMeasure, gamma: f64, lambda: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || lambda < h {
        return Err(Error::domain(format!("need h > 0 and lambda >= h, got h = {h}, lambda = {lambda}")));
    }
    let below = solve_m(fxp, gamma, lambda - h)?.m0;
    let above = solve_m(fxp, gamma, lambda + h)?.m0;
    Ok((below - above) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::make_two_atom;
    use proptest::prelude::*;

    fn delta(c: f64) -> SpectralMeasure {
        SpectralMeasure::point_mass(c).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn point_mass_closed_form() {
        let s = solve_m(&delta(1.0), 2.0, 0.0).unwrap();
        assert!(rel(s.m0, 1.0) < 1e-10);
        assert!(rel(s.m_prime, 2.0) < 1e-10);
        for &(c, g) in &[(0.3, 1.2), (7.0, 5.0), (1e-3, 16.0 / 15.0), (250.0, 3.0)] {
            let s = solve_m(&delta(c), g, 0.0).unwrap();
            assert!(rel(s.m0, 1.0 / (c * (g - 1.0))) < 1e-10, "c={c} g={g}");
            assert!(rel(s.ratio(), g / (g - 1.0)) < 1e-10);
        }
    }

    #[test]
    fn two_atom_closed_form() {
        let fx = make_two_atom(20.0, true).unwrap();
        let (a, b) = (fx.atoms()[0].0, fx.atoms()[1].0);
        let s = solve_m(&fx, 2.0, 0.0).unwrap();
        assert!(rel(s.m0, 1.0 / (a * b).sqrt()) < 1e-10);
        assert!(rel(s.m0, 3.1662280397975135) < 1e-12);
        assert!(rel(s.m_prime, 33.562410548157196) < 1e-10);
        assert!(s.residual <= 1e-12 * s.m0);
    }

    #[test]
    fn regime_errors() {
        assert!(matches!(solve_m(&delta(1.0), 1.0, 0.0), Err(Error::OutOfRegime(_))));
        assert!(matches!(solve_m(&delta(0.0), 2.0, 0.0), Err(Error::DegenerateSpectrum(_))));
        let mostly_zero = SpectralMeasure::new(vec![(0.0, 0.7), (1.0, 0.3)], false).unwrap();
        assert!(matches!(solve_m(&mostly_zero, 2.0, 0.0), Err(Error::DegenerateSpectrum(_))));
        assert!(solve_m(&mostly_zero, 2.0, 0.1).is_ok());
        assert!(solve_m(&delta(1.0), 2.0, -1.0).is_err());
    }

    #[test]
    fn finite_difference_point_mass() {
        let fd = finite_diff_check(&delta(1.0), 2.0, 1e-4, 1e-6).unwrap();
        let exact = solve_m(&delta(1.0), 2.0, 1e-4).unwrap().m_prime;
        assert!((fd - exact).abs() < 1e-6 * exact);
        assert!(finite_diff_check(&delta(1.0), 2.0, 1e-7, 1e-6).is_err());
    }

    #[test]
    fn finite_difference_two_atom() {
        let fx = make_two_atom(20.0, true).unwrap();
        let fd = finite_diff_check(&fx, 2.0, 2e-6, 1e-6).unwrap();
        assert!(rel(fd, 33.562410548157196) < 1e-4);
    }

    #[test]
    fn zero_lambda_matches_extrapolation() {
        for fx in [make_two_atom(20.0, true).unwrap(), make_two_atom(5.0, false).unwrap(), delta(0.4)] {
            for gamma in [1.5, 2.0, 5.0] {
                let m = |l: f64| solve_m(&fx, gamma, l).unwrap().m0;
                let (l1, l2, l3) = (1e-3, 1e-4, 1e-5);
                let (m1, m2, m3) = (m(l1), m(l2), m(l3));
                // Lagrange interpolation through the three points, evaluated at 0.
                let at0 = m1 * l2 * l3 / ((l1 - l2) * (l1 - l3))
                    + m2 * l1 * l3 / ((l2 - l1) * (l2 - l3))
                    + m3 * l1 * l2 / ((l3 - l1) * (l3 - l2));
                assert!(rel(at0, m(0.0)) < 1e-5, "gamma={gamma}");
            }
        }
    }

    #[test]
    fn decreasing_in_lambda() {
        let fx = make_two_atom(20.0, true).unwrap();
        let grid = [0.0, 1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0];
        let ms: Vec<f64> = grid.iter().map(|&l| solve_m(&fx, 1.5, l).unwrap().m0).collect();
        assert!(ms.windows(2).all(|w| w[1] < w[0]));
    }

    fn arb_spectrum() -> impl Strategy<Value = SpectralMeasure> {
        prop::collection::vec((1e-2f64..1e2, 0.05f64..1.0), 2..4).prop_map(|raw| {
            let total: f64 = raw.iter().map(|a| a.1).sum();
            let mut atoms: Vec<(f64, f64)> = raw.iter().map(|&(v, w)| (v, w / total)).collect();
            let head: f64 = atoms[..atoms.len() - 1].iter().map(|a| a.1).sum();
            atoms.last_mut().unwrap().1 = 1.0 - head;
            SpectralMeasure::new(atoms, false).unwrap()
        })
    }

    proptest! {
        #[test]
        fn solution_invariants(fx in arb_spectrum(), gamma in 1.05f64..10.0) {
            let s = solve_m(&fx, gamma, 0.0).unwrap();
            prop_assert!(s.m0 > 0.0);
            prop_assert!(s.residual <= 1e-12 * s.m0.max(1.0));
            let self_consistency = 1.0 - gamma * fx.expect(|t| t * s.m0 / (1.0 + t * s.m0));
            prop_assert!(self_consistency.abs() <= 1e-12);
            prop_assert!(s.m_prime >= s.m0 * s.m0);
            let floor = gamma / (gamma - 1.0);
            prop_assert!(s.ratio() >= floor * (1.0 - 1e-12));
            if !fx.is_point_mass() {
                prop_assert!(s.ratio() > floor);
            }
        }

        #[test]
        fn unique_root(fx in arb_spectrum(), gamma in 1.05f64..10.0) {
            let s = solve_m(&fx, gamma, 0.0).unwrap();
            for k in 1..=20 {
                let below = s.m0 * (1.0 - 0.05 * k as f64 / 21.0);
                let above = s.m0 * (1.0 + 0.5 * k as f64);
                prop_assert!(defect(&fx, gamma, 0.0, below) < 0.0);
                prop_assert!(defect(&fx, gamma, 0.0, above) > 0.0);
            }
        }

        #[test]
        fn ratio_is_scale_free(fx in arb_spectrum(), gamma in 1.05f64..10.0, c in 1e-3f64..1e3) {
            let a = solve_m(&fx, gamma, 0.0).unwrap();
            let b = solve_m(&fx.scaled(c).unwrap(), gamma, 0.0).unwrap();
            prop_assert!((a.ratio() - b.ratio()).abs() <= 1e-10 * a.ratio());
            prop_assert!((b.m0 * c - a.m0).abs() <= 1e-10 * a.m0);
        }

        #[test]
        fn derivative_matches_finite_difference(fx in arb_spectrum(), gamma in 1.1f64..6.0) {
            let lambda = 1e-3;
            let s = solve_m(&fx, gamma, lambda).unwrap();
            let fd = finite_diff_check(&fx, gamma, lambda, 1e-6).unwrap();
            prop_assert!((fd - s.m_prime).abs() <= 1e-4 * s.m_prime);
        }
    }
}
