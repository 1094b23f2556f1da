//! Small statistical helpers shared across modules: the pinned quantile
//! convention and chi-squared quantiles.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Linear-interpolation sample quantile (the common "type 7" rule).
///
/// This single convention is used everywhere a quantile appears: GLM
/// robustness thresholds, quartiles for whiskers and cut-offs, medians.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quantile of an unsorted sample (sorts a copy).
pub fn quantile_of(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile(&v, q)
}

/// Sample median under the pinned quantile convention.
pub fn median_of(values: &[f64]) -> f64 {
    quantile_of(values, 0.5)
}

/// Inverse CDF of the chi-squared distribution with `p` degrees of freedom.
pub fn chi2_quantile(prob: f64, p: usize) -> f64 {
    ChiSquared::new(p as f64).unwrap().inverse_cdf(prob)
}

/// CDF of the chi-squared distribution with `p` degrees of freedom.
pub fn chi2_cdf(x: f64, p: usize) -> f64 {
    ChiSquared::new(p as f64).unwrap().cdf(x)
}
