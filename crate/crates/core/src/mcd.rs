//! Minimum covariance determinant scatter estimation (FAST-MCD), robust
//! Mahalanobis distances, and distance-based Winsorizing.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::stats::{chi2_cdf, chi2_quantile};

/// Default subset fraction: `h = ceil(0.85 n)`. High enough to keep the
/// scatter estimate efficient on mostly-clean residual panels while still
/// resisting the contamination levels targeted here.
pub const DEFAULT_H_FRACTION: f64 = 0.85;

const RESTARTS: usize = 500;
const INITIAL_CSTEPS: usize = 2;
const KEEP_BEST: usize = 10;
const MAX_CSTEPS: usize = 200;

/// MCD location/scatter estimate.
#[derive(Debug, Clone)]
pub struct McdFit {
    pub mean: Point,
    /// Consistency-corrected scatter matrix (row-major p x p).
    pub cov: Vec<Vec<f64>>,
    /// Determinant of the uncorrected h-subset scatter.
    pub raw_det: f64,
    pub h: usize,
    /// Indices of the optimal h-subset, sorted.
    pub support: Vec<usize>,
    pub consistency: f64,
}

/// Small-sample consistency factor `alpha / F_{chi2_{p+2}}(q_alpha)` with
/// `q_alpha` the `alpha` quantile of chi2_p.
pub fn consistency_factor(p: usize, alpha: f64) -> f64 {
    let q = chi2_quantile(alpha, p);
    alpha / chi2_cdf(q, p + 2)
}

fn mean_cov(rows: &[Point], subset: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let p = rows[0].len();
    let h = subset.len() as f64;
    let mut mean = DVector::zeros(p);
    for &k in subset {
        for c in 0..p {
            mean[c] += rows[k][c];
        }
    }
    mean /= h;
    let mut cov = DMatrix::zeros(p, p);
    for &k in subset {
        let d = DVector::from_iterator(p, rows[k].iter().copied()) - &mean;
        cov += &d * d.transpose();
    }
    cov /= h;
    (mean, cov)
}

fn md2_all(rows: &[Point], mean: &DVector<f64>, cov_inv: &DMatrix<f64>) -> Vec<f64> {
    let p = rows[0].len();
    rows.iter()
        .map(|r| {
            let d = DVector::from_iterator(p, r.iter().copied()) - mean;
            (d.transpose() * cov_inv * &d)[(0, 0)]
        })
        .collect()
}

/// One concentration step: h rows with the smallest distances under the
/// current estimate. Returns the sorted subset.
fn c_step(rows: &[Point], subset: &[usize], h: usize) -> Result<Vec<usize>> {
    let (mean, cov) = mean_cov(rows, subset);
    let inv = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::degenerate("singular scatter in concentration step"))?
        .inverse();
    let md2 = md2_all(rows, &mean, &inv);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|a, b| md2[*a].partial_cmp(&md2[*b]).unwrap());
    let mut next = order[..h].to_vec();
    next.sort_unstable();
    Ok(next)
}

fn subset_det(rows: &[Point], subset: &[usize]) -> f64 {
    let (_, cov) = mean_cov(rows, subset);
    cov.determinant()
}

/// FAST-MCD: 500 random (p+1)-point starts, two concentration steps each,
/// then the best ten iterated to convergence. `h` defaults to
/// `ceil(0.85 n)`. Deterministic for a fixed seed.
pub fn fast_mcd(rows: &[Point], h: Option<usize>, seed: u64) -> Result<McdFit> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::data("no rows for MCD"));
    }
    let p = rows[0].len();
    let h = h.unwrap_or_else(|| (DEFAULT_H_FRACTION * n as f64).ceil() as usize);
    if h <= p || h > n {
        return Err(Error::parameter(format!(
            "MCD subset size h={h} must satisfy p < h <= n (p={p}, n={n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut trials: Vec<(f64, Vec<usize>)> = Vec::with_capacity(RESTARTS);
    let mut attempts = 0usize;
    while trials.len() < RESTARTS {
        attempts += 1;
        if attempts > 20 * RESTARTS {
            return Err(Error::degenerate(
                "could not seed MCD restarts with non-singular subsets",
            ));
        }
        // Grow the start past p+1 points until its scatter is invertible.
        let mut start = sample(&mut rng, n, (p + 1).min(n)).into_vec();
        start.sort_unstable();
        let mut sub = start;
        let mut ok = true;
        for _ in 0..INITIAL_CSTEPS {
            match c_step(rows, &sub, h) {
                Ok(next) => sub = next,
                Err(_) => {
                    if sub.len() < n {
                        let mut extra = sample(&mut rng, n, (sub.len() + 2).min(n)).into_vec();
                        extra.sort_unstable();
                        sub = extra;
                        match c_step(rows, &sub, h) {
                            Ok(next) => sub = next,
                            Err(_) => {
                                ok = false;
                                break;
                            }
                        }
                    } else {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok {
            let det = subset_det(rows, &sub);
            trials.push((det, sub));
        }
    }

    trials.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    trials.truncate(KEEP_BEST);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for (_, mut sub) in trials {
        let mut det = subset_det(rows, &sub);
        for _ in 0..MAX_CSTEPS {
            let next = c_step(rows, &sub, h)?;
            let next_det = subset_det(rows, &next);
            let converged = next == sub || next_det >= det * (1.0 - 1e-12);
            sub = next;
            det = next_det;
            if converged {
                break;
            }
        }
        if best.as_ref().map_or(true, |(d, _)| det < *d) {
            best = Some((det, sub));
        }
    }
    let (raw_det, support) = best.expect("at least one MCD trial");

    let (mean, cov) = mean_cov(rows, &support);
    let consistency = consistency_factor(p, h as f64 / n as f64);
    let cov = cov * consistency;
    if cov.clone().cholesky().is_none() {
        return Err(Error::degenerate("MCD scatter is singular"));
    }
    Ok(McdFit {
        mean: mean.iter().copied().collect(),
        cov: (0..p)
            .map(|r| (0..p).map(|c| cov[(r, c)]).collect())
            .collect(),
        raw_det,
        h,
        support,
        consistency,
    })
}

/// Squared robust Mahalanobis distances under the MCD estimate.
pub fn robust_md2(fit: &McdFit, rows: &[Point]) -> Result<Vec<f64>> {
    let p = fit.mean.len();
    let cov = DMatrix::from_fn(p, p, |r, c| fit.cov[r][c]);
    let inv = cov
        .cholesky()
        .ok_or_else(|| Error::degenerate("MCD scatter is singular"))?
        .inverse();
    let mean = DVector::from_iterator(p, fit.mean.iter().copied());
    Ok(md2_all(rows, &mean, &inv))
}

/// Default detection quantile for [`mcd_detect`].
pub const DEFAULT_DETECTION_QUANTILE: f64 = 0.975;

/// Default adjustment (winsorization) quantile for [`winsorize`].
pub const DEFAULT_ADJUSTMENT_QUANTILE: f64 = 0.95;

/// Outlier flags: `MD^2 > chi2_{0.975, p}`.
pub fn mcd_detect(md2: &[f64], p: usize) -> Vec<bool> {
    mcd_detect_at(md2, p, DEFAULT_DETECTION_QUANTILE)
}

/// Outlier flags at a configurable quantile: `MD^2 > chi2_{q, p}`.
pub fn mcd_detect_at(md2: &[f64], p: usize, quantile: f64) -> Vec<bool> {
    let cut = chi2_quantile(quantile, p);
    md2.iter().map(|d| *d > cut).collect()
}

/// Shrink each flagged row toward the MCD mean by
/// `min(sqrt(chi2_{0.95,p} / MD^2), 1)`.
pub fn winsorize(rows: &[Point], fit: &McdFit, md2: &[f64], flags: &[bool]) -> Vec<Point> {
    winsorize_at(rows, fit, md2, flags, DEFAULT_ADJUSTMENT_QUANTILE)
}

/// Winsorize with a configurable tolerance-ellipsoid quantile.
pub fn winsorize_at(
    rows: &[Point],
    fit: &McdFit,
    md2: &[f64],
    flags: &[bool],
    quantile: f64,
) -> Vec<Point> {
    let p = fit.mean.len();
    let c = chi2_quantile(quantile, p);
    rows.iter()
        .zip(md2)
        .zip(flags)
        .map(|((r, d), flagged)| {
            if !*flagged {
                return r.clone();
            }
            let w = (c / d).sqrt().min(1.0);
            (0..p)
                .map(|k| fit.mean[k] + w * (r[k] - fit.mean[k]))
                .collect()
        })
        .collect()
}
