//! Synthetic cross-classified claim panels with known ground truth:
//! controllable cross-triangle correlation, skewed noise, and planted
//! outliers at recorded cells, for property testing the detection
//! techniques where no public multivariate data set exists.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triangle::{Triangle, TriangleKind, TrianglePanel};

/// Specification of a synthetic panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SynthSpec {
    /// Number of parallel triangles (1..=3; the depth geometry is 2D/3D).
    pub triangles: usize,
    /// Accident/development periods `I` (square `I x I` run-off shape).
    pub periods: usize,
    /// Lognormal sigma of the noise; 0 = symmetric Gaussian noise.
    pub skewness: f64,
    /// Equicorrelation of the noise across triangles.
    pub correlation: f64,
    /// Over-dispersion `phi` (cell variance = `phi * mu`).
    pub dispersion: f64,
    /// Fraction of observed cells that receive a planted outlier.
    pub contamination: f64,
    /// Planted shift in per-cell standard deviations.
    pub outlier_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            triangles: 2,
            periods: 10,
            skewness: 0.0,
            correlation: 0.3,
            dispersion: 25.0,
            contamination: 0.0,
            outlier_sigma: 10.0,
            seed: 0,
        }
    }
}

/// Generated panel plus the ground-truth list of contaminated cells.
#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: TrianglePanel,
    /// 1-based `(i, j)` cells that received a planted outlier.
    pub planted: Vec<(usize, usize)>,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.triangles) {
            return Err(Error::parameter("triangles must be 1, 2 or 3"));
        }
        if self.periods < 4 {
            return Err(Error::parameter("periods must be at least 4"));
        }
        if !(0.0..=0.2).contains(&self.contamination) {
            return Err(Error::parameter("contamination must lie in [0, 0.2]"));
        }
        if self.skewness < 0.0 {
            return Err(Error::parameter("skewness must be non-negative"));
        }
        if self.dispersion <= 0.0 {
            return Err(Error::parameter("dispersion must be positive"));
        }
        if !(-0.99..=0.99).contains(&self.correlation) {
            return Err(Error::parameter("correlation must lie in [-0.99, 0.99]"));
        }
        if self.outlier_sigma <= 0.0 {
            return Err(Error::parameter("outlier-sigma must be positive"));
        }
        Ok(())
    }
}

/// Cross-classified mean surface: mild accident-year growth, geometric
/// development decay, distinct per-triangle volume.
fn mean(k: usize, i: usize, j: usize) -> f64 {
    let volume = 10_000.0 * (1.0 + 0.6 * k as f64);
    let growth = 1.03_f64.powi(i as i32 - 1);
    let decay = 0.75_f64.powi(j as i32 - 1);
    volume * growth * decay
}

/// Standardized noise draw: standard normal when `skewness` is 0,
/// otherwise a standardized (mean 0, variance 1) lognormal, right-skewed.
fn standardized_noise(rng: &mut ChaCha8Rng, skewness: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    if skewness == 0.0 {
        return z;
    }
    let s2 = skewness * skewness;
    let m = (0.5 * s2).exp();
    let sd = ((s2.exp() - 1.0) * s2.exp()).sqrt();
    ((skewness * z).exp() - m) / sd
}

/// Generate a synthetic panel with planted outliers and ground truth.
pub fn generate_synthetic_panel(spec: &SynthSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nt = spec.triangles;
    let ip = spec.periods;

    // Equicorrelation Cholesky for the cross-triangle noise: eps = L z
    // with L built from one shared factor and an idiosyncratic remainder.
    let rho = spec.correlation;
    let shared = rho.abs().sqrt();
    let own = (1.0 - rho.abs()).sqrt();
    let sign = if rho < 0.0 { -1.0 } else { 1.0 };

    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); nt];
    let mut cells = Vec::new();
    for i in 1..=ip {
        let mut tri_rows: Vec<Vec<f64>> = vec![Vec::new(); nt];
        for j in 1..=(ip + 1 - i) {
            cells.push((i, j));
            let common = standardized_noise(&mut rng, spec.skewness);
            for (k, row) in tri_rows.iter_mut().enumerate() {
                let ownz = standardized_noise(&mut rng, spec.skewness);
                // Negative correlation: alternate the sign of the shared
                // factor between triangles.
                let s = if k % 2 == 1 { sign } else { 1.0 };
                let eps = shared * s * common + own * ownz;
                let mu = mean(k, i, j);
                let x = mu + (spec.dispersion * mu).sqrt() * eps;
                // Floor at 1% of the cell mean: deep development columns
                // hold a single observation, and letting it clamp to zero
                // would make the cross-classified design degenerate.
                row.push(x.max(0.01 * mu));
            }
        }
        for (k, r) in tri_rows.into_iter().enumerate() {
            rows[k].push(r);
        }
    }

    // Plant upward shocks of `outlier_sigma` cell standard deviations at
    // randomly chosen observed cells, the same cells in every triangle.
    // The last accident row and last development column hold a single
    // observation each, so the cross-classified model fits them exactly
    // and a shock there leaves no residual; such cells are undetectable
    // in principle and are excluded from planting.
    let plantable: Vec<(usize, usize)> = cells
        .iter()
        .copied()
        .filter(|&(i, j)| i < ip && j < ip)
        .collect();
    let n_planted = (spec.contamination * cells.len() as f64).round() as usize;
    let mut planted: Vec<(usize, usize)> = plantable
        .choose_multiple(&mut rng, n_planted)
        .copied()
        .collect();
    planted.sort_unstable();
    for &(i, j) in &planted {
        for (k, tri) in rows.iter_mut().enumerate() {
            let mu = mean(k, i, j);
            tri[i - 1][j - 1] += spec.outlier_sigma * (spec.dispersion * mu).sqrt();
        }
    }

    let triangles: Vec<Triangle> = rows
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            Triangle::from_rows(
                r,
                ip,
                TriangleKind::Incremental,
                format!("synthetic-{}", k + 1),
            )
        })
        .collect::<Result<_>>()?;
    Ok(SyntheticPanel {
        panel: TrianglePanel::new(triangles)?,
        planted,
    })
}
