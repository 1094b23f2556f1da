//! Report assembly and serialization: per-cell outlier report plus
//! human-readable reserve tables, written as JSON, CSV and plain text.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::Result;
use crate::mcl::ReserveReport;
use crate::pipeline::{PipelineConfig, PipelineResult};

/// One observed accident/development cell with everything the detection
/// stage knows about it.
#[derive(Debug, Clone, Serialize)]
pub struct OutlierCell {
    /// 1-based accident period.
    pub i: usize,
    /// 1-based development period.
    pub j: usize,
    /// Original incremental claims, one per triangle.
    pub claims: Vec<f64>,
    /// Pooled Pearson residuals, one per triangle.
    pub residuals: Vec<f64>,
    pub depth: usize,
    pub bd: f64,
    pub ao: f64,
    pub md2: f64,
    pub flagged: bool,
    pub adjusted_residuals: Vec<f64>,
    /// Incremental claims after adjustment and backtransform.
    pub adjusted_claims: Vec<f64>,
}

/// Full outlier report for one pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct OutlierReport {
    pub technique: String,
    pub labels: Vec<String>,
    /// Scalar detection cut-off (fence factor for the bagplot techniques).
    pub cutoff: f64,
    pub seed: u64,
    pub n_flagged: usize,
    pub cells: Vec<OutlierCell>,
}

/// Assemble the outlier report from a finished pipeline run.
pub fn outlier_report(result: &PipelineResult, config: &PipelineConfig) -> OutlierReport {
    let rp = &result.residuals;
    let det = &result.detection;
    let labels: Vec<String> = rp.source.triangles.iter().map(|t| t.label.clone()).collect();
    let cells: Vec<OutlierCell> = rp
        .index
        .iter()
        .map(|cell| {
            let k = cell.row;
            OutlierCell {
                i: cell.i,
                j: cell.j,
                claims: rp
                    .source
                    .triangles
                    .iter()
                    .map(|t| t.get(cell.i, cell.j))
                    .collect(),
                residuals: rp.rows[k].clone(),
                depth: det.scores.depth[k],
                bd: det.scores.bd[k],
                ao: det.scores.ao[k],
                md2: det.scores.md2[k],
                flagged: det.flags[k],
                adjusted_residuals: det.adjusted_rows[k].clone(),
                adjusted_claims: result
                    .robust_panel
                    .triangles
                    .iter()
                    .map(|t| t.get(cell.i, cell.j))
                    .collect(),
            }
        })
        .collect();
    OutlierReport {
        technique: det.technique.token().to_string(),
        labels,
        cutoff: det.cutoff,
        seed: config.seed,
        n_flagged: det.flags.iter().filter(|f| **f).count(),
        cells,
    }
}

impl OutlierReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Flat CSV: one row per cell, score and claim columns expanded per
    /// triangle.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = String::from("i,j");
        for l in &self.labels {
            let _ = write!(header, ",claims_{l},residual_{l}");
        }
        header.push_str(",depth,bd,ao,md2,flagged");
        for l in &self.labels {
            let _ = write!(header, ",adjusted_residual_{l},adjusted_claims_{l}");
        }
        out.push_str(&header);
        out.push('\n');
        for c in &self.cells {
            let _ = write!(out, "{},{}", c.i, c.j);
            for (x, r) in c.claims.iter().zip(&c.residuals) {
                let _ = write!(out, ",{x:.2},{r:.6}");
            }
            let _ = write!(
                out,
                ",{},{:.6},{:.6},{:.6},{}",
                c.depth, c.bd, c.ao, c.md2, c.flagged
            );
            for (r, x) in c.adjusted_residuals.iter().zip(&c.adjusted_claims) {
                let _ = write!(out, ",{r:.6},{x:.2}");
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable table of the flagged cells and their scores.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "technique {}  cut-off {:.4}  flagged {}/{} cells",
            self.technique,
            self.cutoff,
            self.n_flagged,
            self.cells.len()
        );
        let _ = writeln!(
            out,
            "{:>3} {:>3} {:>6} {:>10} {:>10} {:>12}  flag  adjusted claims",
            "i", "j", "depth", "bd", "ao", "md2"
        );
        for c in &self.cells {
            if !c.flagged && self.n_flagged > 0 {
                continue;
            }
            let adj: Vec<String> = c
                .adjusted_claims
                .iter()
                .zip(&c.claims)
                .map(|(a, o)| format!("{o:.0}->{a:.0}"))
                .collect();
            let _ = writeln!(
                out,
                "{:>3} {:>3} {:>6} {:>10.4} {:>10.4} {:>12.4}  {}  {}",
                c.i,
                c.j,
                c.depth,
                c.bd,
                c.ao,
                c.md2,
                if c.flagged { "  * " } else { "    " },
                adj.join("  ")
            );
        }
        out
    }
}

/// Human-readable reserve table for one report.
pub fn reserve_text(title: &str, report: &ReserveReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let mut header = format!("{:>5}", "year");
    for l in &report.labels {
        let _ = write!(header, " {:>14} {:>12}", format!("res[{l}]"), "rmse");
    }
    let _ = write!(header, " {:>14} {:>12}", "total", "rmse");
    let _ = writeln!(out, "{header}");
    for row in &report.per_year {
        let _ = write!(out, "{:>5}", row.year);
        for (r, e) in row.reserves.iter().zip(&row.rmse) {
            let _ = write!(out, " {r:>14.0} {e:>12.0}");
        }
        let _ = writeln!(out, " {:>14.0} {:>12.0}", row.total_reserve, row.total_rmse);
    }
    let _ = write!(out, "{:>5}", "all");
    for (r, e) in report.triangle_reserves.iter().zip(&report.triangle_rmse) {
        let _ = write!(out, " {r:>14.0} {e:>12.0}");
    }
    let _ = writeln!(
        out,
        " {:>14.0} {:>12.0}",
        report.total_reserve, report.total_rmse
    );
    out
}

/// Combined human-readable run summary.
pub fn summary_text(result: &PipelineResult, outliers: &OutlierReport) -> String {
    let mut out = outliers.to_text();
    out.push('\n');
    out.push_str(&reserve_text("original reserves", &result.original));
    out.push('\n');
    out.push_str(&reserve_text(
        &format!("robust reserves ({})", outliers.technique),
        &result.robust,
    ));
    let dr = 100.0 * (result.robust.total_reserve - result.original.total_reserve)
        / result.original.total_reserve;
    let de =
        100.0 * (result.robust.total_rmse - result.original.total_rmse) / result.original.total_rmse;
    let _ = writeln!(out, "\nchange vs original: reserve {dr:+.2}%  rmse {de:+.2}%");
    out
}

/// Write the JSON/CSV/text reports into the configured output directory.
/// Returns the written paths; empty when no output directory is set.
pub fn write_reports(result: &PipelineResult, config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let Some(dir) = &config.output_dir else {
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir)?;
    let outliers = outlier_report(result, config);
    let mut written = Vec::new();
    let mut emit = |name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    emit("outliers.json", outliers.to_json()?)?;
    emit("outliers.csv", outliers.to_csv())?;
    emit(
        "reserves_original.json",
        serde_json::to_string_pretty(&result.original)? + "\n",
    )?;
    emit(
        "reserves_robust.json",
        serde_json::to_string_pretty(&result.robust)? + "\n",
    )?;
    emit("summary.txt", summary_text(result, &outliers))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{run_pipeline_on, PipelineConfig, Technique};
    use crate::triangle::load_panel_manifest;
    use std::path::Path;

    fn run() -> (PipelineResult, PipelineConfig) {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/bivariate_manifest.json");
        let panel = load_panel_manifest(&p).unwrap();
        let config = PipelineConfig {
            technique: Technique::BagplotFence,
            ..PipelineConfig::default()
        };
        (run_pipeline_on(&panel, &config).unwrap(), config)
    }

    #[test]
    fn report_shape_and_flag_count() {
        let (result, config) = run();
        let report = outlier_report(&result, &config);
        assert_eq!(report.cells.len(), 55);
        assert_eq!(report.n_flagged, 6);
        assert_eq!(report.labels.len(), 2);
        // Unflagged cells keep their claims.
        for c in report.cells.iter().filter(|c| !c.flagged) {
            for (a, o) in c.adjusted_claims.iter().zip(&c.claims) {
                assert!((a - o).abs() <= 1e-6 * o.abs().max(1.0));
            }
        }
    }

    #[test]
    fn serializations_are_deterministic() {
        let (result, config) = run();
        let report = outlier_report(&result, &config);
        assert_eq!(report.to_json().unwrap(), report.to_json().unwrap());
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 56);
        assert!(csv.starts_with("i,j,claims_"));
        let text = summary_text(&result, &report);
        assert!(text.contains("original reserves"));
        assert!(text.contains("change vs original"));
    }

    #[test]
    fn write_reports_emits_five_files() {
        let (result, mut config) = run();
        let dir = tempfile::tempdir().unwrap();
        config.output_dir = Some(dir.path().to_path_buf());
        let written = write_reports(&result, &config).unwrap();
        assert_eq!(written.len(), 5);
        for p in &written {
            assert!(p.exists());
            assert!(std::fs::metadata(p).unwrap().len() > 0);
        }
    }
}
