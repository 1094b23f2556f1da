//! Run-off triangle ingestion, validation, and panel alignment.
//!
//! Triangles follow the standard layout: one row per accident period, one
//! column per development period, with the upper-left staircase observed
//! (cell `(i, j)` observed iff `i + j <= I + 1`, truncated at `J` for
//! non-square shapes). CSV files mirror this layout with empty strings for
//! unobserved cells.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriangleKind {
    Incremental,
    Cumulative,
}

/// One line of business's run-off triangle.
///
/// Rows are stored jagged: accident period `i` (1-based) holds its observed
/// development cells only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    rows: Vec<Vec<f64>>,
    accident_periods: usize,
    dev_periods: usize,
    pub kind: TriangleKind,
    pub label: String,
}

/// Maps an observed cell to its flat row index in a pooled residual panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellIndex {
    /// Accident period, 1-based.
    pub i: usize,
    /// Development period, 1-based.
    pub j: usize,
    /// Flat row index, 0-based, row-major over observed cells.
    pub row: usize,
}

impl Triangle {
    /// Number of observed development cells in accident row `i` (1-based).
    pub fn row_len(&self, i: usize) -> usize {
        self.dev_periods.min(self.accident_periods + 1 - i)
    }

    pub fn accident_periods(&self) -> usize {
        self.accident_periods
    }

    pub fn dev_periods(&self) -> usize {
        self.dev_periods
    }

    /// True iff cell `(i, j)` (1-based) is observed.
    pub fn observed(&self, i: usize, j: usize) -> bool {
        i >= 1 && i <= self.accident_periods && j >= 1 && j <= self.row_len(i)
    }

    /// Value at observed cell `(i, j)` (1-based). Panics if unobserved.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.observed(i, j), "cell ({i},{j}) not observed");
        self.rows[i - 1][j - 1]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(self.observed(i, j), "cell ({i},{j}) not observed");
        self.rows[i - 1][j - 1] = value;
    }

    /// Total number of observed cells (`I(I+1)/2` for square triangles).
    pub fn observed_cells(&self) -> usize {
        (1..=self.accident_periods).map(|i| self.row_len(i)).sum()
    }

    /// Row-major index of all observed cells.
    pub fn cell_indices(&self) -> Vec<CellIndex> {
        let mut out = Vec::with_capacity(self.observed_cells());
        let mut row = 0;
        for i in 1..=self.accident_periods {
            for j in 1..=self.row_len(i) {
                out.push(CellIndex { i, j, row });
                row += 1;
            }
        }
        out
    }

    /// Build a triangle from jagged rows (row `i` has `min(J, I+1-i)` cells).
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        dev_periods: usize,
        kind: TriangleKind,
        label: impl Into<String>,
    ) -> Result<Self> {
        let accident_periods = rows.len();
        if accident_periods == 0 || dev_periods == 0 {
            return Err(Error::data("triangle must have at least one cell"));
        }
        let t = Triangle {
            rows,
            accident_periods,
            dev_periods,
            kind,
            label: label.into(),
        };
        for i in 1..=accident_periods {
            if t.rows[i - 1].len() != t.row_len(i) {
                return Err(Error::data(format!(
                    "accident row {i} has {} cells, staircase expects {}",
                    t.rows[i - 1].len(),
                    t.row_len(i)
                )));
            }
        }
        if t.kind == TriangleKind::Cumulative {
            t.check_nondecreasing()?;
        }
        Ok(t)
    }

    fn check_nondecreasing(&self) -> Result<()> {
        for i in 1..=self.accident_periods {
            for j in 2..=self.row_len(i) {
                if self.get(i, j) < self.get(i, j - 1) {
                    return Err(Error::data(format!(
                        "cumulative triangle decreases at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Partial sums along each accident row.
    pub fn to_cumulative(&self) -> Result<Triangle> {
        if self.kind != TriangleKind::Incremental {
            return Err(Error::data("to_cumulative expects an incremental triangle"));
        }
        let mut rows = self.rows.clone();
        for row in &mut rows {
            let mut acc = 0.0;
            for v in row.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        Ok(Triangle {
            rows,
            kind: TriangleKind::Cumulative,
            ..self.clone()
        })
    }

    /// First differences along each accident row; exact inverse of
    /// [`Triangle::to_cumulative`].
    pub fn to_incremental(&self) -> Result<Triangle> {
        if self.kind != TriangleKind::Cumulative {
            return Err(Error::data("to_incremental expects a cumulative triangle"));
        }
        let mut rows = self.rows.clone();
        for row in &mut rows {
            for j in (1..row.len()).rev() {
                row[j] -= row[j - 1];
            }
        }
        Ok(Triangle {
            rows,
            kind: TriangleKind::Incremental,
            ..self.clone()
        })
    }

    /// Replace every observed negative incremental entry by zero.
    ///
    /// Returns the adjusted triangle, the replacement count, and the largest
    /// relative change (in percent) this induced in the classical development
    /// factors.
    pub fn zero_negatives(&self) -> Result<(Triangle, usize, f64)> {
        if self.kind != TriangleKind::Incremental {
            return Err(Error::data("zero_negatives expects an incremental triangle"));
        }
        let mut out = self.clone();
        let mut count = 0;
        for row in &mut out.rows {
            for v in row.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    count += 1;
                }
            }
        }
        let max_change = if count == 0 {
            0.0
        } else {
            let before = classical_dev_factors(&self.to_cumulative()?);
            let after = classical_dev_factors(&out.to_cumulative()?);
            before
                .iter()
                .zip(&after)
                .map(|(b, a)| if *b != 0.0 { ((a - b) / b).abs() * 100.0 } else { 0.0 })
                .fold(0.0, f64::max)
        };
        Ok((out, count, max_change))
    }
}

/// Classical volume-weighted development factors of a cumulative triangle:
/// `f_j = sum_i C_{i,j+1} / sum_i C_{i,j}`.
pub fn classical_dev_factors(t: &Triangle) -> Vec<f64> {
    assert_eq!(t.kind, TriangleKind::Cumulative);
    let mut factors = Vec::new();
    for j in 1..t.dev_periods() {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..=t.accident_periods() {
            if t.observed(i, j + 1) {
                num += t.get(i, j + 1);
                den += t.get(i, j);
            }
        }
        factors.push(if den > 0.0 { num / den } else { 1.0 });
    }
    factors
}

/// Ordered list of aligned triangles sharing shape and mask; `p = N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrianglePanel {
    pub triangles: Vec<Triangle>,
}

impl TrianglePanel {
    pub fn new(triangles: Vec<Triangle>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::data("panel must contain at least one triangle"));
        }
        let first = &triangles[0];
        for t in &triangles[1..] {
            if t.accident_periods() != first.accident_periods()
                || t.dev_periods() != first.dev_periods()
                || t.kind != first.kind
            {
                return Err(Error::data(format!(
                    "triangle '{}' does not match the panel shape of '{}'",
                    t.label, first.label
                )));
            }
        }
        Ok(TrianglePanel { triangles })
    }

    pub fn dimension(&self) -> usize {
        self.triangles.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (
            self.triangles[0].accident_periods(),
            self.triangles[0].dev_periods(),
        )
    }
}

/// Load a triangle from CSV: one row per accident period, empty cell =
/// unobserved. Dot decimal separator only; thousands separators rejected.
pub fn load_triangle_csv(path: &Path, kind: TriangleKind) -> Result<Triangle> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_triangle_csv(&text, kind, label)
}

pub fn parse_triangle_csv(text: &str, kind: TriangleKind, label: String) -> Result<Triangle> {
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::data("empty CSV"));
    }
    let grid: Vec<Vec<&str>> = lines.iter().map(|l| l.split(',').collect()).collect();
    let width = grid[0].len();
    for (idx, row) in grid.iter().enumerate() {
        if row.len() != width {
            return Err(Error::data(format!(
                "ragged CSV: row {} has {} fields, expected {width}",
                idx + 1,
                row.len()
            )));
        }
    }
    let accident_periods = grid.len();
    let dev_periods = width;
    let mut rows = Vec::with_capacity(accident_periods);
    for (i0, row) in grid.iter().enumerate() {
        let i = i0 + 1;
        let expect = dev_periods.min(accident_periods + 1 - i);
        let mut vals = Vec::with_capacity(expect);
        for (j0, field) in row.iter().enumerate() {
            let j = j0 + 1;
            let field = field.trim();
            if j <= expect {
                if field.is_empty() {
                    return Err(Error::data(format!(
                        "cell ({i},{j}) is inside the observed staircase but empty"
                    )));
                }
                let v: f64 = field.parse().map_err(|_| {
                    Error::data(format!("cell ({i},{j}): '{field}' is not a number"))
                })?;
                vals.push(v);
            } else if !field.is_empty() {
                return Err(Error::data(format!(
                    "cell ({i},{j}) lies below the observed staircase but holds '{field}'"
                )));
            }
        }
        rows.push(vals);
    }
    Triangle::from_rows(rows, dev_periods, kind, label)
}

/// One entry of a panel manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: TriangleKind,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelManifest {
    pub triangles: Vec<ManifestEntry>,
}

/// Load a panel from a JSON manifest listing triangle CSVs. Relative CSV
/// paths resolve against the manifest's directory. All triangles are
/// converted to incremental form and negatives zeroed by the caller.
pub fn load_panel_manifest(path: &Path) -> Result<TrianglePanel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let manifest: PanelManifest = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("bad manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut triangles = Vec::new();
    for entry in &manifest.triangles {
        let csv_path = base.join(&entry.path);
        let mut t = load_triangle_csv(&csv_path, entry.kind)?;
        if let Some(label) = &entry.label {
            t.label = label.clone();
        }
        if t.kind == TriangleKind::Cumulative {
            t = t.to_incremental()?;
        }
        triangles.push(t);
    }
    TrianglePanel::new(triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_incremental() -> Triangle {
        Triangle::from_rows(
            vec![vec![10.0, 5.0, 1.0], vec![20.0, 7.0], vec![30.0]],
            3,
            TriangleKind::Incremental,
            "t",
        )
        .unwrap()
    }

    #[test]
    fn cumulative_is_partial_sums() {
        let c = small_incremental().to_cumulative().unwrap();
        assert_eq!(c.get(1, 1), 10.0);
        assert_eq!(c.get(1, 2), 15.0);
        assert_eq!(c.get(1, 3), 16.0);
    }

    #[test]
    fn round_trip_identity() {
        let t = small_incremental();
        let back = t.to_cumulative().unwrap().to_incremental().unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn single_cell_triangle() {
        let t = parse_triangle_csv("5", TriangleKind::Incremental, "one".into()).unwrap();
        assert_eq!(t.accident_periods(), 1);
        assert_eq!(t.dev_periods(), 1);
        assert_eq!(t.get(1, 1), 5.0);
        let c = t.to_cumulative().unwrap();
        assert_eq!(c.get(1, 1), 5.0);
    }

    #[test]
    fn mask_violation_rejected() {
        // 3x3 staircase with a value in cell (3,2).
        let text = "1,2,3\n4,5,\n6,7,";
        let err = parse_triangle_csv(text, TriangleKind::Incremental, "bad".into());
        assert!(err.is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let text = "1,2,3\n4,5\n6";
        assert!(parse_triangle_csv(text, TriangleKind::Incremental, "bad".into()).is_err());
    }

    #[test]
    fn non_numeric_observed_cell_rejected() {
        let text = "1,2\nxyz,";
        assert!(parse_triangle_csv(text, TriangleKind::Incremental, "bad".into()).is_err());
    }

    #[test]
    fn thousands_separators_rejected() {
        let text = "1 376 384,2\n5,";
        assert!(parse_triangle_csv(text, TriangleKind::Incremental, "bad".into()).is_err());
    }

    #[test]
    fn zero_negatives_counts_and_is_idempotent() {
        let t = Triangle::from_rows(
            vec![vec![10.0, -5.0, 1.0], vec![-2.0, 7.0], vec![-30.0]],
            3,
            TriangleKind::Incremental,
            "t",
        )
        .unwrap();
        let (z, count, _) = t.zero_negatives().unwrap();
        assert_eq!(count, 3);
        assert_eq!(z.get(1, 2), 0.0);
        let (z2, count2, change2) = z.zero_negatives().unwrap();
        assert_eq!(count2, 0);
        assert_eq!(change2, 0.0);
        assert_eq!(z, z2);
    }

    #[test]
    fn observed_cell_count_square() {
        let t = Triangle::from_rows(
            (1..=10).map(|i| vec![1.0; 11 - i]).collect(),
            10,
            TriangleKind::Incremental,
            "t",
        )
        .unwrap();
        assert_eq!(t.observed_cells(), 55);
        let idx = t.cell_indices();
        assert_eq!(idx.len(), 55);
        assert_eq!(idx[0], CellIndex { i: 1, j: 1, row: 0 });
        assert_eq!(idx[54], CellIndex { i: 10, j: 1, row: 54 });
    }
}
