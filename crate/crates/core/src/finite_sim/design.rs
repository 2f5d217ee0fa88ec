use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};
use crate::spectra::SpectralMeasure;

/// Law of the whitened entries `z_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDist {
    #[default]
    Gaussian,
    Rademacher,
}

impl EntryDist {
    pub fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            EntryDist::Gaussian => rng.sample(StandardNormal),
            EntryDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Sampled design `X = Z diag(sqrt(s))` with `s` the realized covariance eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub n: usize,
    pub d: usize,
    pub sigma_x_eigs: DVector<f64>,
    pub entry_dist: EntryDist,
    pub seed: u64,
}

impl Design {
    pub fn gamma(&self) -> f64 {
        self.d as f64 / self.n as f64
    }
}

/// Splits `d` slots among atoms proportionally to `weights` (largest remainder,
/// ties broken by atom order).
pub fn apportion(weights: &[f64], d: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * d as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take(d.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// The `d` eigenvalues realized from `spectrum`, atoms in their stored order.
pub fn realized_eigenvalues(spectrum: &SpectralMeasure, d: usize) -> DVector<f64> {
    let weights: Vec<f64> = spectrum.atoms().iter().map(|a| a.1).collect();
    let counts = apportion(&weights, d);
    let values = spectrum.atoms().iter().zip(counts).flat_map(|(&(v, _), c)| std::iter::repeat(v).take(c));
    DVector::from_iterator(d, values)
}

/// `rows x eigs.len()` matrix with rows `diag(sqrt(eigs)) z`, filled row by row.
pub fn sample_rows(rows: usize, eigs: &DVector<f64>, dist: EntryDist, rng: &mut Rng) -> DMatrix<f64> {
    let d = eigs.len();
    let roots: Vec<f64> = eigs.iter().map(|s| s.sqrt()).collect();
    let mut data = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        data.extend(roots.iter().map(|r| r * dist.draw(rng)));
    }
    DMatrix::from_row_slice(rows, d, &data)
}

pub fn sample_design(
    n: usize,
    d: usize,
    spectrum: &SpectralMeasure,
    entry_dist: EntryDist,
    seed: u64,
) -> Result<Design> {
    if n == 0 || d <= n {
        return Err(Error::OutOfRegime(format!("need d > n >= 1, got n = {n}, d = {d}")));
    }
    let sigma_x_eigs = realized_eigenvalues(spectrum, d);
    let x = sample_rows(n, &sigma_x_eigs, entry_dist, &mut seeded(seed));
    Ok(Design { x, n, d, sigma_x_eigs, entry_dist, seed })
}

/// `d = round(gamma n)`.
pub fn dimension_for(n: usize, gamma: f64) -> usize {
    (gamma * n as f64).round() as usize
}
