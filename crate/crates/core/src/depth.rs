//! Exact halfspace depth, the Tukey median, and depth-region bag
//! construction for p in {2, 3}.
//!
//! Depth of a point is the minimum, over all closed halfspaces whose
//! boundary passes through the point, of the number of sample points in the
//! halfspace. The minimum over directions is piecewise constant, so it is
//! attained on open cells of the direction arrangement; both sweeps below
//! evaluate every cell exactly.

use crate::error::{Error, Result};
use crate::geom::{
    centroid_of_polygon, centroid_of_polyhedron, convex_hull, cross3, dot, minkowski_combination,
    norm, scale_vec, sub, vertex_mean, Point, Polytope,
};

fn coincidence_tol(cloud: &[Point]) -> f64 {
    let dim = cloud[0].len();
    let mut s = 0.0f64;
    for d in 0..dim {
        let lo = cloud.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
        let hi = cloud.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
        s = s.max(hi - lo);
    }
    1e-12 * s.max(1.0)
}

/// Exact halfspace depth in 2D: circular sweep over candidate normal
/// directions, evaluating every arc of the direction arrangement at its
/// midpoint.
fn depth_2d(x: &[f64], cloud: &[Point]) -> usize {
    let tol = coincidence_tol(cloud);
    let mut coincident = 0usize;
    let mut angles: Vec<f64> = Vec::with_capacity(cloud.len());
    for p in cloud {
        let v = sub(p, x);
        if norm(&v) <= tol {
            coincident += 1;
        } else {
            angles.push(v[1].atan2(v[0]));
        }
    }
    if angles.is_empty() {
        return coincident;
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut critical: Vec<f64> = angles
        .iter()
        .flat_map(|a| {
            let p1 = (a + std::f64::consts::FRAC_PI_2).rem_euclid(tau);
            let p2 = (a - std::f64::consts::FRAC_PI_2).rem_euclid(tau);
            [p1, p2]
        })
        .collect();
    critical.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = critical.len();
    let mut candidates: Vec<f64> = Vec::with_capacity(2 * m);
    for k in 0..m {
        let a = critical[k];
        let b = if k + 1 < m {
            critical[k + 1]
        } else {
            critical[0] + tau
        };
        candidates.push(a);
        candidates.push(0.5 * (a + b));
    }
    let mut best = usize::MAX;
    for psi in candidates {
        let u = [psi.cos(), psi.sin()];
        let count = angles
            .iter()
            .filter(|a| (a.cos() * u[0] + a.sin() * u[1]) >= -1e-12)
            .count();
        best = best.min(count);
    }
    best + coincident
}

/// Exact halfspace depth in 3D: for each sample point y, sweep planes
/// containing the axis (x, y) and tilt off the axis to reach both adjacent
/// cells of the arrangement.
fn depth_3d(x: &[f64], cloud: &[Point]) -> usize {
    let tol = coincidence_tol(cloud);
    let mut coincident = 0usize;
    let mut offsets: Vec<Point> = Vec::with_capacity(cloud.len());
    for p in cloud {
        let v = sub(p, x);
        if norm(&v) <= tol {
            coincident += 1;
        } else {
            offsets.push(v);
        }
    }
    if offsets.is_empty() {
        return coincident;
    }
    let n_off = offsets.len();
    let mut best = n_off; // the halfspace containing everything

    for yi in 0..n_off {
        let axis = scale_vec(&offsets[yi], 1.0 / norm(&offsets[yi]));
        // Orthonormal basis perpendicular to the axis.
        let helper = if axis[0].abs() < 0.9 {
            vec![1.0, 0.0, 0.0]
        } else {
            vec![0.0, 1.0, 0.0]
        };
        let mut e1 = cross3(&axis, &helper);
        e1 = scale_vec(&e1, 1.0 / norm(&e1));
        let e2 = cross3(&axis, &e1);

        let mut pos_axis = 0usize;
        let mut neg_axis = 0usize;
        let mut angles: Vec<f64> = Vec::new();
        for v in &offsets {
            let h = dot(v, &axis);
            let w = sub(v, &scale_vec(&axis, h));
            if norm(&w) <= tol {
                if h > 0.0 {
                    pos_axis += 1;
                } else {
                    neg_axis += 1;
                }
            } else {
                angles.push(dot(&w, &e2).atan2(dot(&w, &e1)));
            }
        }
        let axis_min = pos_axis.min(neg_axis);
        if angles.is_empty() {
            best = best.min(axis_min);
            continue;
        }
        let tau = 2.0 * std::f64::consts::PI;
        let mut critical: Vec<f64> = angles
            .iter()
            .flat_map(|a| {
                [
                    (a + std::f64::consts::FRAC_PI_2).rem_euclid(tau),
                    (a - std::f64::consts::FRAC_PI_2).rem_euclid(tau),
                ]
            })
            .collect();
        critical.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = critical.len();
        for k in 0..m {
            let a = critical[k];
            let b = if k + 1 < m {
                critical[k + 1]
            } else {
                critical[0] + tau
            };
            let psi = 0.5 * (a + b);
            let count = angles
                .iter()
                .filter(|t| (*t - psi).cos() >= -1e-12)
                .count();
            best = best.min(count + axis_min);
        }
    }
    best + coincident
}

/// Exact combinatorial halfspace depth of `x` with respect to `cloud`.
pub fn halfspace_depth(x: &[f64], cloud: &[Point]) -> Result<usize> {
    if cloud.is_empty() {
        return Err(Error::parameter("empty cloud"));
    }
    match x.len() {
        2 => Ok(depth_2d(x, cloud)),
        3 => Ok(depth_3d(x, cloud)),
        d => Err(Error::parameter(format!(
            "halfspace depth supports p in {{2,3}}, got {d}"
        ))),
    }
}

/// Depths of every sample point plus the nested depth regions and the
/// Tukey median.
#[derive(Debug, Clone)]
pub struct DepthIndex {
    pub depths: Vec<usize>,
    pub tukey_median: Point,
    pub max_depth: usize,
}

impl DepthIndex {
    /// Sample points with depth >= s (`D_s` region vertices, unreduced).
    pub fn region_points<'a>(&self, cloud: &'a [Point], s: usize) -> Vec<&'a Point> {
        cloud
            .iter()
            .zip(&self.depths)
            .filter(|(_, d)| **d >= s)
            .map(|(p, _)| p)
            .collect()
    }
}

/// Compute depths of all rows and the Tukey median.
pub fn depth_index(cloud: &[Point]) -> Result<DepthIndex> {
    let depths: Vec<usize> = cloud
        .iter()
        .map(|p| halfspace_depth(p, cloud))
        .collect::<Result<_>>()?;
    let max_depth = *depths.iter().max().unwrap();
    let deepest: Vec<Point> = cloud
        .iter()
        .zip(&depths)
        .filter(|(_, d)| **d == max_depth)
        .map(|(p, _)| p.clone())
        .collect();
    let tukey_median = deepest_centroid(&deepest)?;
    Ok(DepthIndex {
        depths,
        tukey_median,
        max_depth,
    })
}

/// Centroid of the deepest region: area/volume centroid of its hull when
/// full-dimensional, vertex centroid in the degenerate limit.
fn deepest_centroid(deepest: &[Point]) -> Result<Point> {
    if deepest.is_empty() {
        return Err(Error::degenerate("no deepest points"));
    }
    match convex_hull(deepest) {
        Ok(hull) => Ok(match hull.dim {
            2 => centroid_of_polygon(&hull.vertices),
            _ => centroid_of_polyhedron(&hull.vertices, &hull.faces),
        }),
        Err(_) => Ok(vertex_mean(deepest)),
    }
}

/// Tukey median of a cloud: the deepest point, or the centre of gravity of
/// the deepest region when it is not unique.
pub fn tukey_median(cloud: &[Point]) -> Result<Point> {
    Ok(depth_index(cloud)?.tukey_median)
}

/// Interpolated ~50% depth region: finds s with
/// `#D_s <= floor(n/2) < #D_{s-1}` and returns the Minkowski convex
/// combination `lambda * D_{s-1} (+) (1 - lambda) * D_s` about the Tukey
/// median, with `lambda = (n/2 - #D_s) / (#D_{s-1} - #D_s)`.
pub fn compute_bag(index: &DepthIndex, cloud: &[Point]) -> Result<Polytope> {
    let n = cloud.len();
    let half = n / 2; // floor
    let mut counts = vec![0usize; index.max_depth + 2];
    for s in 1..=index.max_depth {
        counts[s] = index.depths.iter().filter(|d| **d >= s).count();
    }
    let s = (1..=index.max_depth + 1)
        .find(|&s| {
            let c = if s <= index.max_depth { counts[s] } else { 0 };
            c <= half
        })
        .unwrap();
    if s == 1 {
        return Err(Error::degenerate("no depth region exceeds half the data"));
    }
    let outer_count = counts[s - 1];
    let inner_count = if s <= index.max_depth { counts[s] } else { 0 };
    if outer_count == inner_count {
        return Err(Error::degenerate("all points at one depth"));
    }
    let lambda =
        (n as f64 / 2.0 - inner_count as f64) / (outer_count as f64 - inner_count as f64);
    let outer: Vec<Point> = index
        .region_points(cloud, s - 1)
        .into_iter()
        .cloned()
        .collect();
    let inner: Vec<Point> = if s <= index.max_depth {
        index.region_points(cloud, s).into_iter().cloned().collect()
    } else {
        vec![index.tukey_median.clone()]
    };
    // Reduce each region to hull vertices when possible to keep the
    // pairwise-combination set small.
    let outer_v = convex_hull(&outer)
        .map(|h| h.vertices)
        .unwrap_or(outer);
    let inner_v = convex_hull(&inner)
        .map(|h| h.vertices)
        .unwrap_or(inner);
    let bag = minkowski_combination(&outer_v, &inner_v, lambda, &index.tukey_median)?;
    if !bag.strictly_contains(&index.tukey_median) {
        return Err(Error::degenerate("Tukey median not interior to the bag"));
    }
    Ok(bag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: enumerate normals of all lines/planes through x
    /// and sample points, with small angular perturbations on both sides,
    /// count the closed halfspace, take the minimum.
    pub fn depth_brute(x: &[f64], cloud: &[Point]) -> usize {
        let dim = x.len();
        let eps = 1e-7;
        let mut dirs: Vec<Point> = Vec::new();
        if dim == 2 {
            for p in cloud {
                let v = sub(p, x);
                if norm(&v) < 1e-12 {
                    continue;
                }
                let base = v[1].atan2(v[0]);
                for da in [-eps, 0.0, eps] {
                    let a = base + std::f64::consts::FRAC_PI_2 + da;
                    dirs.push(vec![a.cos(), a.sin()]);
                    dirs.push(vec![-a.cos(), -a.sin()]);
                }
            }
        } else {
            for p in cloud {
                for q in cloud {
                    let vp = sub(p, x);
                    let vq = sub(q, x);
                    let c = cross3(&vp, &vq);
                    if norm(&c) < 1e-12 {
                        continue;
                    }
                    let c = scale_vec(&c, 1.0 / norm(&c));
                    let b1 = scale_vec(&vp, eps / norm(&vp).max(1e-12));
                    let b2 = scale_vec(&vq, eps / norm(&vq).max(1e-12));
                    for s1 in [-1.0, 0.0, 1.0] {
                        for s2 in [-1.0, 0.0, 1.0] {
                            let mut d = c.clone();
                            for k in 0..3 {
                                d[k] += s1 * b1[k] + s2 * b2[k];
                            }
                            let l = norm(&d);
                            dirs.push(scale_vec(&d, 1.0 / l));
                            dirs.push(scale_vec(&d, -1.0 / l));
                        }
                    }
                }
            }
        }
        if dirs.is_empty() {
            return cloud.len();
        }
        let mut best = cloud.len();
        for u in &dirs {
            let count = cloud
                .iter()
                .filter(|p| dot(&sub(p, x), u) >= -1e-12)
                .count();
            best = best.min(count);
        }
        best
    }

    #[test]
    fn outside_hull_depth_zero() {
        let cloud = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        assert_eq!(halfspace_depth(&[5.0, 5.0], &cloud).unwrap(), 0);
    }

    #[test]
    fn square_center_depth_two() {
        let cloud = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        let d = halfspace_depth(&[0.5, 0.5], &cloud).unwrap();
        assert_eq!(d, 2);
        assert_eq!(depth_brute(&[0.5, 0.5], &cloud), 2);
    }

    #[test]
    fn sweep_matches_brute_force_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let n = rng.gen_range(5..=40);
            let cloud: Vec<Point> = (0..n)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            for p in &cloud {
                let fast = halfspace_depth(p, &cloud).unwrap();
                let brute = depth_brute(p, &cloud);
                assert_eq!(fast, brute, "trial {trial}: mismatch at {p:?}");
            }
        }
    }

    #[test]
    fn sweep_matches_brute_force_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..8 {
            let n = rng.gen_range(6..=20);
            let cloud: Vec<Point> = (0..n)
                .map(|_| {
                    vec![
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ]
                })
                .collect();
            for p in &cloud {
                let fast = halfspace_depth(p, &cloud).unwrap();
                let brute = depth_brute(p, &cloud);
                assert_eq!(fast, brute, "trial {trial}: mismatch at {p:?}");
            }
        }
    }

    #[test]
    fn depth_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cloud: Vec<Point> = (0..25)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        // Invertible map A = [[2, 1], [0.5, 3]], b = (4, -7).
        let map = |p: &Point| vec![2.0 * p[0] + 1.0 * p[1] + 4.0, 0.5 * p[0] + 3.0 * p[1] - 7.0];
        let mapped: Vec<Point> = cloud.iter().map(map).collect();
        for p in &cloud {
            let d1 = halfspace_depth(p, &cloud).unwrap();
            let d2 = halfspace_depth(&map(p), &mapped).unwrap();
            assert_eq!(d1, d2);
        }
    }

    #[test]
    fn tukey_median_of_square_plus_center() {
        let cloud = vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 2.0],
            vec![1.0, 1.0],
        ];
        let t = tukey_median(&cloud).unwrap();
        assert_relative_eq!(t[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(t[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tukey_median_two_deepest_points_midpoint() {
        // Symmetric configuration with two tied deepest points.
        let cloud = vec![
            vec![0.0, 0.0],
            vec![4.0, 0.0],
            vec![0.0, 2.0],
            vec![4.0, 2.0],
            vec![1.0, 1.0],
            vec![3.0, 1.0],
        ];
        let idx = depth_index(&cloud).unwrap();
        let deepest: Vec<&Point> = cloud
            .iter()
            .zip(&idx.depths)
            .filter(|(_, d)| **d == idx.max_depth)
            .map(|(p, _)| p)
            .collect();
        assert_eq!(deepest.len(), 2);
        assert_relative_eq!(idx.tukey_median[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(idx.tukey_median[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tukey_median_affine_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let cloud: Vec<Point> = (0..19)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let map = |p: &Point| vec![1.5 * p[0] - 0.3 * p[1] + 2.0, 0.2 * p[0] + 2.5 * p[1] - 1.0];
        let mapped: Vec<Point> = cloud.iter().map(map).collect();
        let t1 = tukey_median(&cloud).unwrap();
        let t2 = tukey_median(&mapped).unwrap();
        let t1m = map(&t1);
        assert!(crate::geom::dist(&t1m, &t2) < 1e-9);
    }

    #[test]
    fn bag_of_square_plus_center() {
        // Any closed halfspace through the center keeps two corners, so
        // the center has depth 3. With depths {1,1,1,1,3} and n = 5:
        // lambda = (2.5 - 1)/(5 - 1) = 0.375,
        // bag = 0.375 * hull(all) (+) 0.625 * {center}.
        let cloud = vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 2.0],
            vec![1.0, 1.0],
        ];
        let idx = depth_index(&cloud).unwrap();
        assert_eq!(idx.depths, vec![1, 1, 1, 1, 3]);
        let bag = compute_bag(&idx, &cloud).unwrap();
        // Expected corners at center + 0.375 * (corner - center).
        let expect = 1.0 + 0.375 * 1.0;
        let max_coord = bag
            .vertices
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(max_coord, expect, epsilon = 1e-12);
    }

    #[test]
    fn bag_regions_are_nested() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let cloud: Vec<Point> = (0..40)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let idx = depth_index(&cloud).unwrap();
        for s in 2..=idx.max_depth {
            let outer = idx.region_points(&cloud, s - 1);
            let inner = idx.region_points(&cloud, s);
            let outer_pts: Vec<Point> = outer.into_iter().cloned().collect();
            if let Ok(hull) = convex_hull(&outer_pts) {
                for p in inner {
                    assert!(hull.contains(p), "D_{s} escaped D_{}", s - 1);
                }
            }
        }
    }

    #[test]
    fn all_depth_one_bag_shrinks_to_median() {
        // Three points, all depth 1: the inner region collapses to the
        // Tukey median and the bag is the half-scaled hull about it.
        let cloud = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let idx = depth_index(&cloud).unwrap();
        assert_eq!(idx.depths, vec![1, 1, 1]);
        let t = idx.tukey_median.clone();
        let bag = compute_bag(&idx, &cloud).unwrap();
        // lambda = (1.5 - 0) / (3 - 0) = 0.5.
        for v in &bag.vertices {
            let mirror: Point = (0..2).map(|k| t[k] + 2.0 * (v[k] - t[k])).collect();
            let hit = cloud
                .iter()
                .any(|c| crate::geom::dist(c, &mirror) < 1e-9);
            assert!(hit, "bag vertex is not halfway to a hull vertex");
        }
    }
}
