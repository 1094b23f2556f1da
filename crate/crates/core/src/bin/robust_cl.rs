//! Command-line front end for the robust reserving pipeline.
//!
//! Subcommands: `run` (full pipeline), `detect` (stop after flags),
//! `synth` (generate a synthetic panel with ground truth), `figures`
//! (detection figures only). Exit codes: 0 success, 2 data/parameter
//! error, 3 convergence error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_reserving::error::{Error, Result};
use robust_reserving::figures::emit_figures;
use robust_reserving::glm::residual_panel;
use robust_reserving::pipeline::{
    detect_and_adjust, run_pipeline_on, PipelineConfig, Technique,
};
use robust_reserving::report::{outlier_report, summary_text, write_reports};
use robust_reserving::synth::{generate_synthetic_panel, SynthSpec};
use robust_reserving::triangle::{load_panel_manifest, PanelManifest, Triangle, TrianglePanel};

#[derive(Parser)]
#[command(
    name = "robust-cl",
    about = "Robust multivariate chain-ladder reserving: outlier detection and treatment on pooled triangle residuals",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the pipeline-driven subcommands. CLI flags override
/// the JSON config file, which overrides the built-in defaults.
#[derive(Args)]
struct PipelineArgs {
    /// JSON pipeline configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Panel manifest (overrides the config file).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Detection/adjustment technique (overrides the config file).
    #[arg(long)]
    technique: Option<Technique>,
    /// Random seed for AO directions and the MCD search.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports and figures.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::data(format!("bad config {}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(m) = &self.manifest {
            config.manifest = m.clone();
        }
        if let Some(t) = self.technique {
            config.technique = t;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.output_dir = Some(o.clone());
        }
        if config.manifest.as_os_str().is_empty() {
            return Err(Error::parameter(
                "no panel manifest: pass --manifest or set it in the config file",
            ));
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and report original and robust reserves.
    Run(PipelineArgs),
    /// Stop after detection and print the per-cell flags and scores.
    Detect(PipelineArgs),
    /// Generate a synthetic panel with planted outliers and ground truth.
    Synth(SynthArgs),
    /// Run detection and emit the figures only.
    Figures(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthetic-panel specification file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of parallel triangles (1..=3).
    #[arg(long)]
    triangles: Option<usize>,
    /// Accident/development periods.
    #[arg(long)]
    periods: Option<usize>,
    /// Lognormal noise sigma; 0 = symmetric.
    #[arg(long)]
    skewness: Option<f64>,
    /// Cross-triangle noise correlation.
    #[arg(long)]
    correlation: Option<f64>,
    /// Fraction of cells with a planted outlier.
    #[arg(long)]
    contamination: Option<f64>,
    /// Planted shift in cell standard deviations.
    #[arg(long)]
    outlier_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the CSVs, manifest and ground truth.
    #[arg(long)]
    out: PathBuf,
}

fn triangle_csv(t: &Triangle) -> String {
    let mut out = String::new();
    let width = t.dev_periods();
    for i in 1..=t.accident_periods() {
        let cells: Vec<String> = (1..=width)
            .map(|j| {
                if t.observed(i, j) {
                    format!("{:.2}", t.get(i, j))
                } else {
                    String::new()
                }
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec: SynthSpec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::data(format!("bad spec {}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(v) = args.triangles {
        spec.triangles = v;
    }
    if let Some(v) = args.periods {
        spec.periods = v;
    }
    if let Some(v) = args.skewness {
        spec.skewness = v;
    }
    if let Some(v) = args.correlation {
        spec.correlation = v;
    }
    if let Some(v) = args.contamination {
        spec.contamination = v;
    }
    if let Some(v) = args.outlier_sigma {
        spec.outlier_sigma = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }

    let synth = generate_synthetic_panel(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let mut entries = Vec::new();
    for t in &synth.panel.triangles {
        let name = format!("{}.csv", t.label);
        std::fs::write(args.out.join(&name), triangle_csv(t))?;
        entries.push(robust_reserving::triangle::ManifestEntry {
            path: name,
            kind: robust_reserving::triangle::TriangleKind::Incremental,
            label: Some(t.label.clone()),
        });
    }
    let manifest = PanelManifest { triangles: entries };
    std::fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    let truth = serde_json::json!({
        "spec": spec,
        "planted-cells": synth
            .planted
            .iter()
            .map(|(i, j)| serde_json::json!({"i": i, "j": j}))
            .collect::<Vec<_>>(),
    });
    std::fs::write(
        args.out.join("ground_truth.json"),
        serde_json::to_string_pretty(&truth)? + "\n",
    )?;
    println!(
        "wrote {} triangles, manifest and ground truth ({} planted outliers) to {}",
        synth.panel.triangles.len(),
        synth.planted.len(),
        args.out.display()
    );
    Ok(())
}

fn load(config: &PipelineConfig) -> Result<TrianglePanel> {
    load_panel_manifest(&config.manifest).map_err(|e| e.at_step("load"))
}

fn cmd_run(args: &PipelineArgs) -> Result<()> {
    let config = args.resolve()?;
    let panel = load(&config)?;
    let result = run_pipeline_on(&panel, &config)?;
    let outliers = outlier_report(&result, &config);
    print!("{}", summary_text(&result, &outliers));
    let mut written = write_reports(&result, &config)?;
    if let Some(dir) = &config.output_dir {
        if result.residuals.p() <= 3 {
            written.extend(emit_figures(
                &result.residuals.rows,
                &result.detection,
                dir,
            )?);
        } else {
            eprintln!("figures skipped: no display for {}D panels", result.residuals.p());
        }
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_detect(args: &PipelineArgs) -> Result<()> {
    let config = args.resolve()?;
    let panel = load(&config)?;
    let residuals = residual_panel(&panel).map_err(|e| e.at_step("robust-glm"))?;
    let detection = detect_and_adjust(&residuals.rows, &config)?;
    println!(
        "technique {}  cut-off {:.4}  flagged {}/{} cells",
        detection.technique.token(),
        detection.cutoff,
        detection.flags.iter().filter(|f| **f).count(),
        residuals.n()
    );
    println!(
        "{:>3} {:>3} {:>6} {:>10} {:>10} {:>12}  flag",
        "i", "j", "depth", "bd", "ao", "md2"
    );
    for cell in &residuals.index {
        let k = cell.row;
        println!(
            "{:>3} {:>3} {:>6} {:>10.4} {:>10.4} {:>12.4}  {}",
            cell.i,
            cell.j,
            detection.scores.depth[k],
            detection.scores.bd[k],
            detection.scores.ao[k],
            detection.scores.md2[k],
            if detection.flags[k] { "*" } else { "" }
        );
    }
    Ok(())
}

fn cmd_figures(args: &PipelineArgs) -> Result<()> {
    let config = args.resolve()?;
    let Some(dir) = config.output_dir.clone() else {
        return Err(Error::parameter("figures need an output directory (--out)"));
    };
    let panel = load(&config)?;
    let residuals = residual_panel(&panel).map_err(|e| e.at_step("robust-glm"))?;
    let detection = detect_and_adjust(&residuals.rows, &config)?;
    if residuals.p() >= 4 {
        eprintln!("figures skipped: no display for {}D panels", residuals.p());
        return Ok(());
    }
    for p in emit_figures(&residuals.rows, &detection, &dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Figures(args) => cmd_figures(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
