//! Static result figures: 2D SVG bagplots / AO-bagplots and 3D JSON
//! meshes (bag, loop, fence, MCD tolerance ellipsoid). Output is
//! byte-stable for fixed inputs: fixed float precision, deterministic
//! layer order, no timestamps.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{Point, Polytope};
use crate::mcd::McdFit;
use crate::pipeline::{Detection, Technique};
use crate::stats::chi2_quantile;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN: f64 = 40.0;

/// Affine data-to-canvas mapping (y flipped for SVG).
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let dx = (xmax - xmin).max(1e-12);
        let dy = (ymax - ymin).max(1e-12);
        Frame {
            x0: xmin,
            y0: ymin,
            sx: (WIDTH - 2.0 * MARGIN) / dx,
            sy: (HEIGHT - 2.0 * MARGIN) / dy,
        }
    }

    fn map(&self, p: &[f64]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.x0) * self.sx,
            HEIGHT - MARGIN - (p[1] - self.y0) * self.sy,
        )
    }
}

fn polygon_path(frame: &Frame, poly: &Polytope) -> String {
    let mut d = String::new();
    for (k, v) in poly.vertices.iter().enumerate() {
        let (x, y) = frame.map(v);
        let _ = write!(d, "{}{x:.3},{y:.3} ", if k == 0 { "M" } else { "L" });
    }
    d.push('Z');
    d
}

/// Render the 2D detection geometry as an SVG document.
///
/// For the AO techniques the AO bag/loop/fence and AO median are drawn;
/// otherwise the halfspace-depth bag, loop, fence and Tukey median.
pub fn detection_svg(rows: &[Point], det: &Detection) -> Result<String> {
    let p = rows.first().map(|r| r.len()).unwrap_or(0);
    if p != 2 {
        return Err(Error::parameter(format!("SVG figures need 2D data, got {p}D")));
    }
    let (bag, loop_hull, fence, center, title) = match &det.ao_model {
        Some(m) => (
            &m.bag,
            m.loop_hull.as_ref(),
            if det.technique == Technique::AoFence {
                Some(m.bag.scale_about_center(3.0)?)
            } else {
                m.fence.clone()
            },
            &m.ao_median_point,
            "AO bagplot",
        ),
        None => (
            &det.bagplot.bag,
            det.bagplot.loop_hull.as_ref(),
            Some(det.bagplot.fence.clone()),
            &det.bagplot.tukey_median,
            "bagplot",
        ),
    };

    let frame = Frame::fit(
        rows.iter()
            .map(|r| (r[0], r[1]))
            .chain(fence.iter().flat_map(|f| f.vertices.iter().map(|v| (v[0], v[1])))),
    );

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<title>{title}: {}</title>", det.technique.token());
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    if let Some(f) = &fence {
        let _ = writeln!(
            svg,
            "<path id=\"fence\" d=\"{}\" fill=\"none\" stroke=\"#888888\" stroke-dasharray=\"6,4\"/>",
            polygon_path(&frame, f)
        );
    }
    if let Some(l) = loop_hull {
        let _ = writeln!(
            svg,
            "<path id=\"loop\" d=\"{}\" fill=\"#c6dbef\" stroke=\"#6baed6\"/>",
            polygon_path(&frame, l)
        );
    }
    let _ = writeln!(
        svg,
        "<path id=\"bag\" d=\"{}\" fill=\"#6baed6\" stroke=\"#2171b5\"/>",
        polygon_path(&frame, bag)
    );
    let (cx, cy) = frame.map(center);
    let _ = writeln!(
        svg,
        "<g id=\"center\"><line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#d94801\" stroke-width=\"2\"/><line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#d94801\" stroke-width=\"2\"/></g>",
        cx - 6.0, cy, cx + 6.0, cy, cx, cy - 6.0, cx, cy + 6.0
    );
    let _ = writeln!(svg, "<g id=\"points\">");
    for (r, flagged) in rows.iter().zip(&det.flags) {
        if *flagged {
            continue;
        }
        let (x, y) = frame.map(r);
        let _ = writeln!(svg, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"#252525\"/>");
    }
    let _ = writeln!(svg, "</g>");
    if det.flags.iter().any(|f| *f) {
        let _ = writeln!(svg, "<g id=\"outliers\">");
        for (r, flagged) in rows.iter().zip(&det.flags) {
            if !*flagged {
                continue;
            }
            let (x, y) = frame.map(r);
            let _ = writeln!(
                svg,
                "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"5\" fill=\"#e31a1c\" stroke=\"#67000d\"/>"
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Triangle mesh in a plotting-tool-agnostic JSON schema.
#[derive(Debug, Clone, Serialize)]
pub struct Mesh {
    pub name: String,
    pub vertices: Vec<Point>,
    /// Triangle faces as vertex index triples; empty for 2D polygons.
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn from_polytope(name: &str, poly: &Polytope) -> Mesh {
        Mesh {
            name: name.to_string(),
            vertices: poly.vertices.clone(),
            faces: poly.faces.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// UV-sphere mesh of the MCD tolerance ellipsoid `MD^2 = chi2_{q, 3}`.
pub fn ellipsoid_mesh(fit: &McdFit, quantile: f64, rings: usize, segments: usize) -> Result<Mesh> {
    let p = fit.mean.len();
    if p != 3 {
        return Err(Error::parameter("ellipsoid mesh needs 3D data"));
    }
    let c = chi2_quantile(quantile, p).sqrt();
    // Cholesky factor of the scatter maps the unit sphere to the ellipsoid.
    let cov = nalgebra::DMatrix::from_fn(p, p, |r, s| fit.cov[r][s]);
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::degenerate("MCD scatter is singular"))?;
    let l = chol.l();

    let mut vertices = Vec::new();
    for ring in 0..=rings {
        let theta = std::f64::consts::PI * ring as f64 / rings as f64;
        for seg in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * seg as f64 / segments as f64;
            let u = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
            let v: Vec<f64> = (0..p)
                .map(|r| fit.mean[r] + c * (0..p).map(|s| l[(r, s)] * u[s]).sum::<f64>())
                .collect();
            vertices.push(v);
        }
    }
    let mut faces = Vec::new();
    for ring in 0..rings {
        for seg in 0..segments {
            let a = ring * segments + seg;
            let b = ring * segments + (seg + 1) % segments;
            let c2 = (ring + 1) * segments + seg;
            let d = (ring + 1) * segments + (seg + 1) % segments;
            faces.push([a, b, c2]);
            faces.push([b, d, c2]);
        }
    }
    Ok(Mesh {
        name: "ellipsoid".to_string(),
        vertices,
        faces,
    })
}

/// Write the figures for one detection run into `dir`.
///
/// 2D data yields a single SVG; 3D data yields JSON meshes for the bag,
/// loop, fence and MCD tolerance ellipsoid. Higher dimensions produce no
/// files (the caller should notify the user).
pub fn emit_figures(rows: &[Point], det: &Detection, dir: &std::path::Path) -> Result<Vec<PathBuf>> {
    let p = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut written = Vec::new();
    if p >= 4 || p == 0 {
        return Ok(written);
    }
    std::fs::create_dir_all(dir)?;
    let mut emit = |name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    if p == 2 {
        emit("bagplot.svg", detection_svg(rows, det)?)?;
        return Ok(written);
    }
    let (bag, loop_hull, fence) = match &det.ao_model {
        Some(m) => (&m.bag, m.loop_hull.as_ref(), m.fence.clone()),
        None => (
            &det.bagplot.bag,
            det.bagplot.loop_hull.as_ref(),
            Some(det.bagplot.fence.clone()),
        ),
    };
    emit("bag.json", Mesh::from_polytope("bag", bag).to_json()?)?;
    if let Some(l) = loop_hull {
        emit("loop.json", Mesh::from_polytope("loop", l).to_json()?)?;
    }
    if let Some(f) = &fence {
        emit("fence.json", Mesh::from_polytope("fence", f).to_json()?)?;
    }
    emit(
        "ellipsoid.json",
        ellipsoid_mesh(&det.mcd, 0.975, 12, 24)?.to_json()?,
    )?;
    Ok(written)
}
