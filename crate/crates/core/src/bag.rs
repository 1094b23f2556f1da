//! Bagplot-style detection (fence) and bagdistance-based detection and
//! adjustment, in 2D and 3D.

use crate::depth::{compute_bag, depth_index, DepthIndex};
use crate::error::{Error, Result};
use crate::geom::{dist, norm, sub, Point, Polytope};
use crate::stats::chi2_quantile;

/// Bag, fence, loop and Tukey median for one residual cloud.
#[derive(Debug, Clone)]
pub struct BagplotModel {
    pub bag: Polytope,
    pub fence: Polytope,
    /// Hull of the non-outlying rows; `None` when they are degenerate.
    pub loop_hull: Option<Polytope>,
    pub tukey_median: Point,
    pub fence_factor: f64,
    pub depth: DepthIndex,
    /// Rows strictly outside the fence.
    pub outliers: Vec<bool>,
}

/// Per-row bagdistance together with the bag boundary point on the ray.
#[derive(Debug, Clone)]
pub struct BdScore {
    pub bd: Vec<f64>,
    pub boundary: Vec<Option<Point>>,
}

/// Default fence factor: sqrt of the chi-squared 99th percentile with p
/// degrees of freedom (close to 3 when p = 2).
pub fn default_fence_factor(p: usize, quantile: f64) -> f64 {
    chi2_quantile(quantile, p).sqrt()
}

/// Build the bagplot: bag from the interpolated depth regions, fence =
/// `fence_factor` x bag about the Tukey median, loop = hull of the
/// non-outlying rows.
pub fn build_bagplot(rows: &[Point], fence_factor: f64) -> Result<BagplotModel> {
    if rows.len() < 4 {
        return Err(Error::degenerate("too few rows for a bagplot"));
    }
    let index = depth_index(rows)?;
    let bag = compute_bag(&index, rows)?;
    let fence = bag.scale_about_center(fence_factor)?;
    let outliers: Vec<bool> = rows.iter().map(|r| !fence.contains(r)).collect();
    let keep: Vec<Point> = rows
        .iter()
        .zip(&outliers)
        .filter(|(_, o)| !**o)
        .map(|(r, _)| r.clone())
        .collect();
    let loop_hull = crate::geom::convex_hull(&keep)
        .ok()
        .and_then(|h| h.with_center(index.tukey_median.clone()).ok());
    Ok(BagplotModel {
        bag,
        fence,
        loop_hull,
        tukey_median: index.tukey_median.clone(),
        fence_factor,
        depth: index,
        outliers,
    })
}

/// Bagdistance of each row: the ratio of its distance from the Tukey
/// median to the bag boundary's distance in the same direction.
pub fn bagdistance(rows: &[Point], model: &BagplotModel) -> Result<BdScore> {
    let t = &model.tukey_median;
    let mut bd = Vec::with_capacity(rows.len());
    let mut boundary = Vec::with_capacity(rows.len());
    let tol = 1e-12
        * rows
            .iter()
            .map(|r| norm(&sub(r, t)))
            .fold(0.0, f64::max)
            .max(1.0);
    for r in rows {
        let d = dist(r, t);
        if d <= tol {
            bd.push(0.0);
            boundary.push(None);
        } else {
            let c = model.bag.ray_clip(t, r)?;
            let denom = dist(&c, t);
            if denom <= 0.0 {
                return Err(Error::degenerate("bag boundary coincides with its center"));
            }
            bd.push(d / denom);
            boundary.push(Some(c));
        }
    }
    Ok(BdScore { bd, boundary })
}

/// Flag rows with bd strictly above the cutoff.
pub fn detect_bd(scores: &BdScore, cutoff: f64) -> Result<Vec<bool>> {
    if cutoff <= 0.0 {
        return Err(Error::parameter("bd cutoff must be positive"));
    }
    Ok(scores.bd.iter().map(|b| *b > cutoff).collect())
}

/// Clip each flagged row to the target polytope along the ray from its
/// center; unflagged rows pass through unchanged.
pub fn adjust_to_polytope(
    rows: &[Point],
    target: &Polytope,
    flags: &[bool],
) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(rows.len());
    for (r, flagged) in rows.iter().zip(flags) {
        if *flagged {
            if dist(r, &target.center) < 1e-300 {
                return Err(Error::degenerate("flagged row coincides with the center"));
            }
            out.push(target.ray_clip(&target.center, r)?);
        } else {
            out.push(r.clone());
        }
    }
    Ok(out)
}

/// Knot of the unbounded bd adjustment: the bd value where the outer
/// branch factor `(f + sqrt(bd))/bd` equals one.
pub fn bd_outer_knot(f: f64) -> f64 {
    (2.0 * f + (4.0 * f + 1.0).sqrt() + 1.0) / 2.0
}

fn bd_map(rows: &[Point], scores: &BdScore, center: &Point, factor_of: impl Fn(f64) -> f64) -> Vec<Point> {
    rows.iter()
        .zip(&scores.bd)
        .map(|(r, &bd)| {
            let factor = factor_of(bd);
            if (factor - 1.0).abs() < 1e-15 {
                r.clone()
            } else {
                let v = sub(r, center);
                center
                    .iter()
                    .zip(&v)
                    .map(|(c, d)| c + factor * d)
                    .collect()
            }
        })
        .collect()
}

/// Graded bd adjustment without an upper limit: moderate outliers land on
/// the fence, extreme outliers are pulled in but stay beyond it.
pub fn adjust_bd_unbounded(rows: &[Point], scores: &BdScore, center: &Point, f: f64) -> Result<Vec<Point>> {
    if f <= 0.0 {
        return Err(Error::parameter("fence factor must be positive"));
    }
    let theta = bd_outer_knot(f);
    Ok(bd_map(rows, scores, center, |bd| {
        if bd <= f {
            1.0
        } else if bd <= theta {
            (f / bd).min(1.0)
        } else {
            (f + bd.sqrt()) / bd
        }
    }))
}

/// Graded bd adjustment with an upper limit `u`: rows beyond `u` go all
/// the way back to the fence.
pub fn adjust_bd_limited(
    rows: &[Point],
    scores: &BdScore,
    center: &Point,
    f: f64,
    u: f64,
) -> Result<Vec<Point>> {
    if f <= 0.0 {
        return Err(Error::parameter("fence factor must be positive"));
    }
    if u <= f {
        return Err(Error::parameter("limit u must exceed the fence factor f"));
    }
    let theta = bd_outer_knot(f);
    Ok(bd_map(rows, scores, center, |bd| {
        if bd <= f {
            1.0
        } else if bd <= theta || bd > u {
            (f / bd).min(1.0)
        } else {
            (f + bd.sqrt()) / bd
        }
    }))
}

/// Huber loss on the bagdistance.
pub fn huber_bd_loss(bd: f64, c: f64) -> f64 {
    assert!(c > 0.0, "Huber knot must be positive");
    if bd <= c {
        0.5 * bd * bd
    } else {
        c * (bd - 0.5 * c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_rows(n: usize, seed: u64) -> Vec<Point> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (0..2)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn default_factor_2d() {
        assert_relative_eq!(default_fence_factor(2, 0.99), 3.0349, max_relative = 1e-4);
    }

    #[test]
    fn bd_zero_at_median_one_on_boundary() {
        let rows = gaussian_rows(55, 3);
        let model = build_bagplot(&rows, default_fence_factor(2, 0.99)).unwrap();
        let scores = bagdistance(&rows, &model).unwrap();
        // The Tukey median itself scores zero.
        let s = bagdistance(&[model.tukey_median.clone()], &model).unwrap();
        assert_eq!(s.bd[0], 0.0);
        // A bag vertex scores one.
        let v = model.bag.vertices[0].clone();
        let s = bagdistance(&[v], &model).unwrap();
        assert_relative_eq!(s.bd[0], 1.0, epsilon = 1e-9);
        // All finite.
        assert!(scores.bd.iter().all(|b| b.is_finite()));
    }

    #[test]
    fn bd_cutoff_equals_fence_flagging() {
        for seed in 0..20 {
            let rows = gaussian_rows(40, 100 + seed);
            let f = default_fence_factor(2, 0.99);
            let model = build_bagplot(&rows, f).unwrap();
            let scores = bagdistance(&rows, &model).unwrap();
            let flags = detect_bd(&scores, f).unwrap();
            assert_eq!(flags, model.outliers, "seed {seed}");
        }
    }

    #[test]
    fn clean_gaussian_few_outliers() {
        // Finite-sample bags sit inside the asymptotic 50% region, so a
        // few flags per clean sample are expected; the rate must stay
        // small and the bag must hold about half the points.
        let mut total = 0;
        for seed in 0..20 {
            let rows = gaussian_rows(55, seed);
            let model = build_bagplot(&rows, default_fence_factor(2, 0.99)).unwrap();
            let n_out = model.outliers.iter().filter(|o| **o).count();
            assert!(n_out <= 5, "seed {seed}: {n_out} outliers on clean data");
            total += n_out;
            let inside = rows.iter().filter(|r| model.bag.contains(r)).count();
            assert!((22..=32).contains(&inside), "seed {seed}: bag holds {inside}");
        }
        assert!(total <= 40, "average clean-data flag rate too high: {total}/20 runs");
    }

    #[test]
    fn adjust_to_fence_bounds_bd() {
        let mut rows = gaussian_rows(50, 21);
        rows.push(vec![30.0, -25.0]);
        rows.push(vec![-18.0, 40.0]);
        let f = default_fence_factor(2, 0.99);
        let model = build_bagplot(&rows, f).unwrap();
        let scores = bagdistance(&rows, &model).unwrap();
        let flags = detect_bd(&scores, f).unwrap();
        let adjusted = adjust_to_polytope(&rows, &model.fence, &flags).unwrap();
        let after = bagdistance(&adjusted, &model).unwrap();
        for b in after.bd {
            assert!(b <= f + 1e-9);
        }
    }

    #[test]
    fn unbounded_knot_value() {
        let f = 3.0349;
        let theta = bd_outer_knot(f);
        assert_relative_eq!(theta, 5.347, max_relative = 1e-3);
        // At the knot the outer factor is exactly one.
        assert_relative_eq!((f + theta.sqrt()) / theta, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unbounded_factors() {
        let f = 3.0349;
        // bd = 4 (below the knot) lands on the fence.
        assert_relative_eq!(f / 4.0, 0.7587, max_relative = 1e-3);
        // bd = 10 (beyond the knot) stays past the fence.
        let factor = (f + 10.0f64.sqrt()) / 10.0;
        assert_relative_eq!(factor, 0.6197, max_relative = 1e-3);
        assert!(10.0 * factor > f);
    }

    #[test]
    fn limited_collapses_to_unbounded_for_large_u() {
        let rows = {
            let mut r = gaussian_rows(45, 33);
            r.push(vec![20.0, 20.0]);
            r
        };
        let f = default_fence_factor(2, 0.99);
        let model = build_bagplot(&rows, f).unwrap();
        let scores = bagdistance(&rows, &model).unwrap();
        let a = adjust_bd_unbounded(&rows, &scores, &model.tukey_median, f).unwrap();
        let b = adjust_bd_limited(&rows, &scores, &model.tukey_median, f, 1e12).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(dist(x, y) < 1e-12);
        }
        assert!(adjust_bd_limited(&rows, &scores, &model.tukey_median, f, f).is_err());
    }

    #[test]
    fn adjustment_preserves_ray_direction() {
        let mut rows = gaussian_rows(45, 51);
        rows.push(vec![25.0, 13.0]);
        let f = default_fence_factor(2, 0.99);
        let model = build_bagplot(&rows, f).unwrap();
        let scores = bagdistance(&rows, &model).unwrap();
        let adjusted = adjust_bd_unbounded(&rows, &scores, &model.tukey_median, f).unwrap();
        for (x, y) in rows.iter().zip(&adjusted) {
            let vx = sub(x, &model.tukey_median);
            let vy = sub(y, &model.tukey_median);
            let cross = vx[0] * vy[1] - vx[1] * vy[0];
            assert!(cross.abs() < 1e-9 * norm(&vx).max(1.0) * norm(&vy).max(1.0));
        }
    }

    #[test]
    fn huber_loss_branches() {
        let c = 2.0;
        assert_eq!(huber_bd_loss(0.0, c), 0.0);
        assert_relative_eq!(huber_bd_loss(c, c), 0.5 * c * c);
        assert_relative_eq!(huber_bd_loss(2.0 * c, c), 1.5 * c * c);
        // C1 continuity at the knot.
        let eps = 1e-7;
        let d1 = (huber_bd_loss(c + eps, c) - huber_bd_loss(c - eps, c)) / (2.0 * eps);
        assert_relative_eq!(d1, c, max_relative = 1e-5);
    }

    #[test]
    fn bd_invariant_under_rotation_and_scaling() {
        let rows = gaussian_rows(40, 77);
        let f = default_fence_factor(2, 0.99);
        let model = build_bagplot(&rows, f).unwrap();
        let scores = bagdistance(&rows, &model).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let k = 2.5;
        let map = |p: &Point| vec![k * (c * p[0] - s * p[1]), k * (s * p[0] + c * p[1])];
        let mapped: Vec<Point> = rows.iter().map(map).collect();
        let model2 = build_bagplot(&mapped, f).unwrap();
        let scores2 = bagdistance(&mapped, &model2).unwrap();
        for (a, b) in scores.bd.iter().zip(&scores2.bd) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-9);
        }
    }
}
