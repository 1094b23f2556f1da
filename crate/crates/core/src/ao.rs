//! Stahel-Donoho-style adjusted outlyingness with medcouple skewness
//! correction, the AO-based bag/loop/fence, and the three cut-off variants.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{convex_hull, cross3, norm, scale_vec, sub, Point, Polytope};
use crate::stats::{chi2_quantile, median_of, quantile_of};

/// Medcouple: robust skewness in [-1, 1], the median of the pairwise
/// kernel `h(x_i, x_j) = ((x_j - m) - (m - x_i)) / (x_j - x_i)` over pairs
/// straddling the median, with the standard sign kernel for ties at the
/// median. Plain O(n^2) enumeration.
pub fn medcouple(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(Error::parameter("medcouple needs at least 3 values"));
    }
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if x[0] == x[x.len() - 1] {
        return Err(Error::degenerate("constant sample has no medcouple"));
    }
    let m = median_of(&x);
    let lower: Vec<f64> = x.iter().copied().filter(|v| *v <= m).collect();
    let upper: Vec<f64> = x.iter().copied().filter(|v| *v >= m).collect();
    let k = x.iter().filter(|v| **v == m).count();
    let mut kernels = Vec::with_capacity(lower.len() * upper.len());
    for (i0, &xi) in lower.iter().enumerate() {
        for (j0, &xj) in upper.iter().enumerate() {
            if xi == m && xj == m {
                // Ranks within the tied block: xi is the (i - offset)-th
                // tied value from below, xj the (j+1)-th from above.
                let i_rank = i0 + 1 - (lower.len() - k); // 1..=k
                let j_rank = k - j0; // upper's tied block leads; 1..=k
                let s = (i_rank + j_rank) as isize - 1 - k as isize;
                kernels.push(s.signum() as f64);
            } else {
                kernels.push(((xj - m) - (m - xi)) / (xj - xi));
            }
        }
    }
    Ok(median_of(&kernels))
}

/// Lower and upper whisker values of the skew-adjusted boxplot.
pub fn adjusted_boxplot_whiskers(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 4 {
        return Err(Error::parameter("whiskers need at least 4 values"));
    }
    let mc = medcouple(values)?;
    let q1 = quantile_of(values, 0.25);
    let q3 = quantile_of(values, 0.75);
    let iqr = q3 - q1;
    let (lo_exp, hi_exp) = if mc >= 0.0 {
        ((-4.0 * mc).exp(), (3.0 * mc).exp())
    } else {
        ((-3.0 * mc).exp(), (4.0 * mc).exp())
    };
    Ok((q1 - 1.5 * lo_exp * iqr, q3 + 1.5 * hi_exp * iqr))
}

/// One-dimensional adjusted outlyingness of `x_i` within the sample
/// summarized by (median, w1, w2).
pub fn univariate_ao(x_i: f64, med: f64, w1: f64, w2: f64) -> Result<f64> {
    if w2 <= med || w1 >= med {
        return Err(Error::degenerate("degenerate whiskers for univariate AO"));
    }
    Ok(if x_i > med {
        (x_i - med) / (w2 - med)
    } else if x_i < med {
        (med - x_i) / (med - w1)
    } else {
        0.0
    })
}

/// Whisker convention used for the per-direction AO denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AoWhiskers {
    /// The skew-adjusted boxplot formula values `Q1 - 1.5 e^{..} IQR` /
    /// `Q3 + 1.5 e^{..} IQR` themselves.
    Formula,
    /// The most extreme observations lying inside the formula interval
    /// (the drawn whiskers of the skew-adjusted boxplot). Denominators are
    /// never wider than the data, so scores are at least the formula ones.
    DataPoint,
}

/// Per-row adjusted outlyingness scores.
#[derive(Debug, Clone)]
pub struct AoScore {
    pub ao: Vec<f64>,
    pub directions_used: usize,
    pub seed: u64,
    /// Row index with the smallest AO.
    pub median_row: usize,
    pub whiskers: AoWhiskers,
}

/// Projection-pursuit AO with formula whiskers; see [`ao_scores_with`].
pub fn ao_scores(rows: &[Point], m: usize, seed: u64) -> Result<AoScore> {
    ao_scores_with(rows, m, seed, AoWhiskers::Formula)
}

/// Projection-pursuit AO: directions are unit normals of hyperplanes
/// through p sample rows drawn without replacement; each row's score is
/// the max univariate AO over the projections. Deterministic for a fixed
/// seed; degenerate directions are resampled.
pub fn ao_scores_with(
    rows: &[Point],
    m: usize,
    seed: u64,
    whiskers: AoWhiskers,
) -> Result<AoScore> {
    if m == 0 {
        return Err(Error::parameter("need at least one direction"));
    }
    let n = rows.len();
    let p = rows[0].len();
    if n < p + 1 {
        return Err(Error::degenerate("too few rows for AO directions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale: f64 = rows.iter().map(|r| norm(r)).fold(0.0, f64::max).max(1.0);
    let mut ao = vec![0.0f64; n];
    let mut used = 0usize;
    let mut attempts = 0usize;
    while used < m {
        attempts += 1;
        if attempts > 100 * m {
            return Err(Error::degenerate(
                "could not generate enough non-degenerate AO directions",
            ));
        }
        let picks = sample(&mut rng, n, p).into_vec();
        let dir: Point = match p {
            2 => {
                let d = sub(&rows[picks[1]], &rows[picks[0]]);
                vec![d[1], -d[0]]
            }
            3 => {
                let d1 = sub(&rows[picks[1]], &rows[picks[0]]);
                let d2 = sub(&rows[picks[2]], &rows[picks[0]]);
                cross3(&d1, &d2)
            }
            _ => return Err(Error::parameter("AO supports p in {2,3}")),
        };
        let len = norm(&dir);
        if len <= 1e-12 * scale {
            continue;
        }
        let dir = scale_vec(&dir, 1.0 / len);
        let proj: Vec<f64> = rows.iter().map(|r| crate::geom::dot(r, &dir)).collect();
        let med = median_of(&proj);
        let Ok((mut w1, mut w2)) = adjusted_boxplot_whiskers(&proj) else {
            continue;
        };
        if whiskers == AoWhiskers::DataPoint {
            w1 = proj
                .iter()
                .copied()
                .filter(|v| *v >= w1)
                .fold(f64::INFINITY, f64::min);
            w2 = proj
                .iter()
                .copied()
                .filter(|v| *v <= w2)
                .fold(f64::NEG_INFINITY, f64::max);
        }
        if w2 - med <= 1e-12 * scale || med - w1 <= 1e-12 * scale {
            continue;
        }
        for (k, &v) in proj.iter().enumerate() {
            let a = univariate_ao(v, med, w1, w2)?;
            if a > ao[k] {
                ao[k] = a;
            }
        }
        used += 1;
    }
    let median_row = ao
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    Ok(AoScore {
        ao,
        directions_used: used,
        seed,
        median_row,
        whiskers,
    })
}

/// Traditional skew-adjusted cut-off on the AO values:
/// `Q3 + 1.5 e^{3 MC} IQR` (upper side only).
pub fn ao_cutoff_traditional(scores: &AoScore) -> Result<f64> {
    if scores.ao.len() < 4 {
        return Err(Error::parameter("cut-off needs at least 4 scores"));
    }
    let mc = medcouple(&scores.ao)?;
    let q1 = quantile_of(&scores.ao, 0.25);
    let q3 = quantile_of(&scores.ao, 0.75);
    Ok(q3 + 1.5 * (3.0 * mc).exp() * (q3 - q1))
}

/// Alternative cut-off `sqrt(chi2_{0.99,p}) * median(AO)`.
pub fn ao_cutoff_chi(scores: &AoScore, p: usize, quantile: f64) -> f64 {
    chi2_quantile(quantile, p).sqrt() * median_of(&scores.ao)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AoVariant {
    /// Skew-adjusted cut-off on AO values; loop = hull of non-outliers.
    Traditional,
    /// chi-squared/median cut-off; loop = hull of non-outliers.
    ChiMedian,
    /// Fence = factor x AO bag about the AO median point.
    Fence,
}

/// AO-based bag/loop/fence model.
#[derive(Debug, Clone)]
pub struct AoModel {
    /// Hull of the 50% lowest-AO rows.
    pub bag: Polytope,
    /// Hull of the non-outlying rows.
    pub loop_hull: Option<Polytope>,
    pub fence: Option<Polytope>,
    pub cutoff: f64,
    pub variant: AoVariant,
    pub ao_median_point: Point,
    pub outliers: Vec<bool>,
}

/// Default bag-to-fence factor for the AO fence variant.
pub const AO_FENCE_FACTOR: f64 = 3.0;

pub fn build_ao_model(
    rows: &[Point],
    scores: &AoScore,
    variant: AoVariant,
    fence_factor: f64,
) -> Result<AoModel> {
    let n = rows.len();
    let p = rows[0].len();
    let center = rows[scores.median_row].clone();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| scores.ao[*a].partial_cmp(&scores.ao[*b]).unwrap());
    let half = n / 2;
    if half < p + 1 {
        return Err(Error::degenerate("bag of fewer than p+1 rows"));
    }
    let bag_rows: Vec<Point> = order[..half].iter().map(|&k| rows[k].clone()).collect();
    let mut bag = convex_hull(&bag_rows)?;
    bag.center = center.clone();

    let (cutoff, fence, outliers) = match variant {
        AoVariant::Traditional => {
            let c = ao_cutoff_traditional(scores)?;
            (c, None, scores.ao.iter().map(|a| *a > c).collect::<Vec<_>>())
        }
        AoVariant::ChiMedian => {
            let c = ao_cutoff_chi(scores, p, 0.99);
            (c, None, scores.ao.iter().map(|a| *a > c).collect::<Vec<_>>())
        }
        AoVariant::Fence => {
            let fence = bag.scale_about_center(fence_factor)?;
            let outliers: Vec<bool> = rows.iter().map(|r| !fence.contains(r)).collect();
            (fence_factor, Some(fence), outliers)
        }
    };

    let keep: Vec<Point> = rows
        .iter()
        .zip(&outliers)
        .filter(|(_, o)| !**o)
        .map(|(r, _)| r.clone())
        .collect();
    let loop_hull = convex_hull(&keep).ok().map(|mut h| {
        h.center = center.clone();
        h
    });

    Ok(AoModel {
        bag,
        loop_hull,
        fence,
        cutoff,
        variant,
        ao_median_point: center,
        outliers,
    })
}

/// Clip flagged rows to the target polytope along the ray from the AO
/// median point.
pub fn ao_adjust(
    rows: &[Point],
    model: &AoModel,
    flags: &[bool],
    target: &Polytope,
) -> Result<Vec<Point>> {
    if !target.strictly_contains(&model.ao_median_point) {
        return Err(Error::degenerate(
            "AO median point is not strictly inside the adjustment target",
        ));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (r, flagged) in rows.iter().zip(flags) {
        if *flagged {
            out.push(target.ray_clip(&model.ao_median_point, r)?);
        } else {
            out.push(r.clone());
        }
    }
    Ok(out)
}
