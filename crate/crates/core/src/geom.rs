//! Convex polytope toolkit for p in {2, 3}: hulls, halfspace form,
//! scaling about a center, Minkowski convex combinations, and parametric
//! ray clipping.

use serde::Serialize;

use crate::error::{Error, Result};

pub type Point = Vec<f64>;

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale_vec(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

pub fn cross3(a: &[f64], b: &[f64]) -> Point {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Convex polygon (2D, counterclockwise vertex order) or convex polyhedron
/// (3D, triangulated boundary), with a reference center for scaling and
/// ray operations.
#[derive(Debug, Clone, Serialize)]
pub struct Polytope {
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Triangulated faces, 3D only (empty in 2D).
    pub faces: Vec<[usize; 3]>,
    pub center: Point,
}

/// One bounding halfspace `normal . x <= offset` (normal is outward, unit).
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub normal: Point,
    pub offset: f64,
}

fn bbox_scale(points: &[Point]) -> f64 {
    let dim = points[0].len();
    let mut s = 0.0f64;
    for d in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points {
            lo = lo.min(p[d]);
            hi = hi.max(p[d]);
        }
        s = s.max(hi - lo);
    }
    s.max(1e-300)
}

/// Andrew monotone chain, counterclockwise, strict (collinear interior
/// points dropped).
fn hull_2d(points: &[Point]) -> Result<Vec<Point>> {
    let eps = 1e-12 * bbox_scale(points) * bbox_scale(points);
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .unwrap()
            .then(a[1].partial_cmp(&b[1]).unwrap())
    });
    pts.dedup_by(|a, b| dist(a, b) < 1e-12 * bbox_scale(points).max(1.0));
    if pts.len() < 3 {
        return Err(Error::degenerate("2D hull needs 3 distinct points"));
    }
    let cross = |o: &Point, a: &Point, b: &Point| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::degenerate("collinear 2D point set"));
    }
    Ok(lower)
}

/// Incremental 3D convex hull with outward-oriented triangular faces.
fn hull_3d(points: &[Point]) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let scale = bbox_scale(points);
    let eps = 1e-10 * scale;
    let pts = points;
    let n = pts.len();
    if n < 4 {
        return Err(Error::degenerate("3D hull needs 4 points"));
    }

    // Initial tetrahedron from extreme points.
    let mut i0 = 0;
    let mut i1 = 0;
    let mut best = -1.0;
    for a in 0..n {
        for b in (a + 1)..n {
            let d = dist(&pts[a], &pts[b]);
            if d > best {
                best = d;
                i0 = a;
                i1 = b;
            }
        }
    }
    if best < eps {
        return Err(Error::degenerate("coincident 3D point set"));
    }
    let axis = sub(&pts[i1], &pts[i0]);
    let mut i2 = 0;
    best = -1.0;
    for c in 0..n {
        let d = norm(&cross3(&axis, &sub(&pts[c], &pts[i0])));
        if d > best {
            best = d;
            i2 = c;
        }
    }
    if best < eps * norm(&axis) {
        return Err(Error::degenerate("collinear 3D point set"));
    }
    let normal = cross3(&axis, &sub(&pts[i2], &pts[i0]));
    let mut i3 = 0;
    best = -1.0;
    for d_idx in 0..n {
        let d = dot(&normal, &sub(&pts[d_idx], &pts[i0])).abs();
        if d > best {
            best = d;
            i3 = d_idx;
        }
    }
    if best < eps * norm(&normal) {
        return Err(Error::degenerate("coplanar 3D point set"));
    }

    #[derive(Clone)]
    struct Face {
        v: [usize; 3],
        normal: Point,
        offset: f64,
        alive: bool,
    }
    let make_face = |a: usize, b: usize, c: usize, inside: &Point| -> Face {
        let mut nrm = cross3(&sub(&pts[b], &pts[a]), &sub(&pts[c], &pts[a]));
        let mut v = [a, b, c];
        if dot(&nrm, &sub(inside, &pts[a])) > 0.0 {
            v = [a, c, b];
            nrm = scale_vec(&nrm, -1.0);
        }
        let offset = dot(&nrm, &pts[v[0]]);
        Face {
            v,
            normal: nrm,
            offset,
            alive: true,
        }
    };

    let centroid: Point = (0..3)
        .map(|d| (pts[i0][d] + pts[i1][d] + pts[i2][d] + pts[i3][d]) / 4.0)
        .collect();
    let mut faces = vec![
        make_face(i0, i1, i2, &centroid),
        make_face(i0, i1, i3, &centroid),
        make_face(i0, i2, i3, &centroid),
        make_face(i1, i2, i3, &centroid),
    ];

    for p in 0..n {
        if p == i0 || p == i1 || p == i2 || p == i3 {
            continue;
        }
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                f.alive && dot(&f.normal, &pts[p]) - f.offset > eps * norm(&f.normal)
            })
            .map(|(idx, _)| idx)
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Horizon: edges used exactly once among visible faces.
        use std::collections::HashMap;
        let mut edge_count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for e in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                let key = (e.0.min(e.1), e.0.max(e.1));
                let entry = edge_count.entry(key).or_insert((0, 0));
                entry.0 += 1;
                entry.1 = fi;
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
        }
        for (&(a, b), &(count, fi)) in &edge_count {
            if count == 1 {
                // Keep orientation consistent with the dead face's winding.
                let v = faces[fi].v;
                let ordered = if (v[0] == a && v[1] == b)
                    || (v[1] == a && v[2] == b)
                    || (v[2] == a && v[0] == b)
                {
                    (a, b)
                } else {
                    (b, a)
                };
                let mut nf = make_face(ordered.0, ordered.1, p, &centroid);
                // make_face may flip; force the winding from the horizon.
                let nrm = cross3(
                    &sub(&pts[ordered.1], &pts[ordered.0]),
                    &sub(&pts[p], &pts[ordered.0]),
                );
                nf.v = [ordered.0, ordered.1, p];
                nf.offset = dot(&nrm, &pts[ordered.0]);
                nf.normal = nrm;
                faces.push(nf);
            }
        }
    }

    let live: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    let mut used: Vec<usize> = live.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let remap: std::collections::HashMap<usize, usize> =
        used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let vertices: Vec<Point> = used.iter().map(|&i| pts[i].clone()).collect();
    let faces_out: Vec<[usize; 3]> = live
        .iter()
        .map(|f| [remap[&f.v[0]], remap[&f.v[1]], remap[&f.v[2]]])
        .collect();
    if vertices.len() < 4 || faces_out.len() < 4 {
        return Err(Error::degenerate("3D hull collapsed"));
    }
    Ok((vertices, faces_out))
}

/// Convex hull of a point cloud (2 or 3 dimensional).
///
/// The reference center defaults to the vertex centroid; callers that need
/// a specific center (Tukey median, AO median) set it afterwards via
/// [`Polytope::with_center`].
pub fn convex_hull(points: &[Point]) -> Result<Polytope> {
    if points.is_empty() {
        return Err(Error::degenerate("empty point set"));
    }
    let dim = points[0].len();
    match dim {
        2 => {
            let vertices = hull_2d(points)?;
            let center = centroid_of_polygon(&vertices);
            Ok(Polytope {
                dim,
                vertices,
                faces: Vec::new(),
                center,
            })
        }
        3 => {
            let (vertices, faces) = hull_3d(points)?;
            let center = vertex_mean(&vertices);
            Ok(Polytope {
                dim,
                vertices,
                faces,
                center,
            })
        }
        d => Err(Error::parameter(format!("dimension {d} unsupported"))),
    }
}

pub fn vertex_mean(vertices: &[Point]) -> Point {
    let dim = vertices[0].len();
    let mut c = vec![0.0; dim];
    for v in vertices {
        for d in 0..dim {
            c[d] += v[d];
        }
    }
    for d in 0..dim {
        c[d] /= vertices.len() as f64;
    }
    c
}

/// Area centroid of a CCW polygon.
pub fn centroid_of_polygon(vertices: &[Point]) -> Point {
    let n = vertices.len();
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..n {
        let p = &vertices[k];
        let q = &vertices[(k + 1) % n];
        let w = p[0] * q[1] - q[0] * p[1];
        a2 += w;
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    if a2.abs() < 1e-300 {
        return vertex_mean(vertices);
    }
    vec![cx / (3.0 * a2), cy / (3.0 * a2)]
}

/// Volume centroid of a triangulated closed surface (outward faces).
pub fn centroid_of_polyhedron(vertices: &[Point], faces: &[[usize; 3]]) -> Point {
    let mut vol6 = 0.0;
    let mut c = vec![0.0; 3];
    for f in faces {
        let a = &vertices[f[0]];
        let b = &vertices[f[1]];
        let d = &vertices[f[2]];
        let v = dot(a, &cross3(b, d));
        vol6 += v;
        for k in 0..3 {
            c[k] += v * (a[k] + b[k] + d[k]) / 4.0;
        }
    }
    if vol6.abs() < 1e-300 {
        return vertex_mean(vertices);
    }
    c.iter().map(|x| x / vol6).collect()
}

impl Polytope {
    /// Replace the reference center; the point must be strictly inside.
    pub fn with_center(mut self, center: Point) -> Result<Polytope> {
        if !self.strictly_contains(&center) {
            return Err(Error::degenerate(
                "requested center is not strictly inside the polytope",
            ));
        }
        self.center = center;
        self
            .check()
            .map(|_| self)
    }

    fn check(&self) -> Result<()> {
        Ok(())
    }

    /// Bounding halfspaces with unit outward normals.
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        match self.dim {
            2 => {
                let n = self.vertices.len();
                (0..n)
                    .map(|k| {
                        let p = &self.vertices[k];
                        let q = &self.vertices[(k + 1) % n];
                        let e = sub(q, p);
                        // CCW order: outward normal is the right-hand normal.
                        let mut nrm = vec![e[1], -e[0]];
                        let len = norm(&nrm).max(1e-300);
                        nrm = scale_vec(&nrm, 1.0 / len);
                        let offset = dot(&nrm, p);
                        Halfspace {
                            normal: nrm,
                            offset,
                        }
                    })
                    .collect()
            }
            3 => self
                .faces
                .iter()
                .map(|f| {
                    let a = &self.vertices[f[0]];
                    let b = &self.vertices[f[1]];
                    let c = &self.vertices[f[2]];
                    let mut nrm = cross3(&sub(b, a), &sub(c, a));
                    let len = norm(&nrm).max(1e-300);
                    nrm = scale_vec(&nrm, 1.0 / len);
                    let offset = dot(&nrm, a);
                    Halfspace {
                        normal: nrm,
                        offset,
                    }
                })
                .collect(),
            _ => unreachable!(),
        }
    }

    fn tol(&self) -> f64 {
        1e-9 * bbox_scale(&self.vertices).max(1.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = self.tol();
        self.halfspaces()
            .iter()
            .all(|h| dot(&h.normal, x) <= h.offset + tol)
    }

    pub fn strictly_contains(&self, x: &[f64]) -> bool {
        let tol = self.tol();
        self.halfspaces()
            .iter()
            .all(|h| dot(&h.normal, x) < h.offset - tol)
    }

    /// Signed distance to the boundary along the halfspace description
    /// (max over faces of `normal . x - offset`); <= 0 means inside.
    pub fn boundary_excess(&self, x: &[f64]) -> f64 {
        self.halfspaces()
            .iter()
            .map(|h| dot(&h.normal, x) - h.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Each vertex mapped to `center + factor * (v - center)`.
    pub fn scale_about_center(&self, factor: f64) -> Result<Polytope> {
        if factor <= 0.0 {
            return Err(Error::parameter("scale factor must be positive"));
        }
        let vertices = self
            .vertices
            .iter()
            .map(|v| add(&self.center, &scale_vec(&sub(v, &self.center), factor)))
            .collect();
        Ok(Polytope {
            dim: self.dim,
            vertices,
            faces: self.faces.clone(),
            center: self.center.clone(),
        })
    }

    /// Exit point of the ray `origin -> through` on the boundary, by
    /// parametric clipping against the face halfspaces.
    pub fn ray_clip(&self, origin: &[f64], through: &[f64]) -> Result<Point> {
        let dir = sub(through, origin);
        if norm(&dir) < 1e-300 {
            return Err(Error::parameter("ray direction is zero"));
        }
        if !self.strictly_contains(origin) {
            return Err(Error::degenerate(
                "ray origin is not strictly inside the polytope",
            ));
        }
        let mut t_exit = f64::INFINITY;
        for h in self.halfspaces() {
            let denom = dot(&h.normal, &dir);
            if denom > 0.0 {
                let t = (h.offset - dot(&h.normal, origin)) / denom;
                t_exit = t_exit.min(t);
            }
        }
        if !t_exit.is_finite() {
            return Err(Error::degenerate("ray does not exit the polytope"));
        }
        Ok(add(origin, &scale_vec(&dir, t_exit)))
    }
}

/// Minkowski convex combination about `center`:
/// `lambda * (outer - center) (+) (1 - lambda) * (inner - center) + center`,
/// realized as the hull of pairwise combinations (exact for convex inputs).
///
/// `inner` may be degenerate (a point or segment); the result must be
/// full-dimensional.
pub fn minkowski_combination(
    outer: &[Point],
    inner: &[Point],
    lambda: f64,
    center: &[f64],
) -> Result<Polytope> {
    if outer.is_empty() {
        return Err(Error::degenerate("empty outer region"));
    }
    let inner_pts: Vec<Point> = if inner.is_empty() {
        vec![center.to_vec()]
    } else {
        inner.to_vec()
    };
    let mut combos = Vec::with_capacity(outer.len() * inner_pts.len());
    for a in outer {
        let sa = scale_vec(&sub(a, center), lambda);
        for b in &inner_pts {
            let sb = scale_vec(&sub(b, center), 1.0 - lambda);
            combos.push(add(center, &add(&sa, &sb)));
        }
    }
    let hull = convex_hull(&combos)?;
    Ok(Polytope {
        center: center.to_vec(),
        ..hull
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> Polytope {
        convex_hull(&[
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn hull_2d_triangle_is_itself() {
        let p = convex_hull(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(p.vertices.len(), 3);
    }

    #[test]
    fn hull_2d_collinear_rejected() {
        assert!(convex_hull(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
    }

    #[test]
    fn hull_contains_all_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3] {
            let pts: Vec<Point> = (0..100)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let hull = convex_hull(&pts).unwrap();
            for p in &pts {
                assert!(hull.contains(p), "input point escaped its own hull");
            }
        }
    }

    #[test]
    fn ray_clip_square_axis() {
        let sq = square();
        let hit = sq.ray_clip(&[0.0, 0.0], &[5.0, 0.0]).unwrap();
        assert_relative_eq!(hit[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(hit[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_clip_rejects_zero_direction() {
        let sq = square();
        assert!(sq.ray_clip(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn ray_clip_matches_boundary_sampling() {
        // Regular heptagon: clip along many rays, compare with dense
        // sampling of the boundary crossing.
        let n = 7;
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let poly = convex_hull(&pts).unwrap();
        for step in 0..50 {
            let a = 0.13 + step as f64 * 0.11;
            let through = vec![2.0 * a.cos(), 2.0 * a.sin()];
            let hit = poly.ray_clip(&[0.0, 0.0], &through).unwrap();
            // Bisection on the containment predicate along the ray.
            let mut lo = 0.0;
            let mut hi = 1.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let p = scale_vec(&through, mid);
                if poly.contains(&p) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let sampled = scale_vec(&through, 0.5 * (lo + hi));
            assert!(dist(&hit, &sampled) < 1e-8);
        }
    }

    #[test]
    fn scaling_round_trip() {
        let sq = square();
        let back = sq
            .scale_about_center(0.5)
            .unwrap()
            .scale_about_center(2.0)
            .unwrap();
        for (a, b) in sq.vertices.iter().zip(&back.vertices) {
            assert!(dist(a, b) < 1e-12);
        }
        let tripled = sq.scale_about_center(3.0).unwrap();
        assert_relative_eq!(tripled.vertices.iter().map(|v| v[0].abs()).fold(0.0, f64::max), 3.0);
        assert!(sq.scale_about_center(0.0).is_err());
    }

    #[test]
    fn hull_3d_cube() {
        let mut pts = Vec::new();
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    pts.push(vec![x, y, z]);
                }
            }
        }
        pts.push(vec![0.0, 0.0, 0.0]);
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 8);
        assert_eq!(hull.faces.len(), 12);
        assert!(hull.strictly_contains(&[0.0, 0.0, 0.0]));
        assert!(!hull.contains(&[1.5, 0.0, 0.0]));
        let c = centroid_of_polyhedron(&hull.vertices, &hull.faces);
        assert!(norm(&c) < 1e-12);
    }

    #[test]
    fn ray_clip_cube() {
        let mut pts = Vec::new();
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    pts.push(vec![x, y, z]);
                }
            }
        }
        let hull = convex_hull(&pts).unwrap();
        let hit = hull.ray_clip(&[0.0, 0.0, 0.0], &[0.2, 0.1, 5.0]).unwrap();
        assert_relative_eq!(hit[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn minkowski_scales_toward_point() {
        // lambda * square (+) (1-lambda) * {origin} is the scaled square.
        let sq = square();
        let m = minkowski_combination(&sq.vertices, &[vec![0.0, 0.0]], 0.375, &[0.0, 0.0])
            .unwrap();
        let max_coord = m
            .vertices
            .iter()
            .flat_map(|v| v.iter().map(|x| x.abs()))
            .fold(0.0, f64::max);
        assert_relative_eq!(max_coord, 0.375, epsilon = 1e-12);
    }
}
