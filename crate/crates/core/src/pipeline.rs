//! End-to-end robust reserving pipeline.
//!
//! Steps: load the triangle panel, fit the robust over-dispersed Poisson
//! model per triangle, pool Pearson residuals, detect outliers with the
//! configured technique, adjust the flagged residuals, backtransform into
//! claims, and run the multivariate chain-ladder on both the original and
//! the robustified panel.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ao::{ao_scores_with, build_ao_model, AoModel, AoScore, AoVariant, AoWhiskers, AO_FENCE_FACTOR};
use crate::bag::{
    adjust_bd_limited, adjust_bd_unbounded, adjust_to_polytope, bagdistance, build_bagplot,
    default_fence_factor, detect_bd, BagplotModel, BdScore,
};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::glm::{residual_panel, ResidualPanel};
use crate::mcd::{
    fast_mcd, mcd_detect_at, robust_md2, winsorize_at, McdFit, DEFAULT_ADJUSTMENT_QUANTILE,
    DEFAULT_DETECTION_QUANTILE, DEFAULT_H_FRACTION,
};
use crate::mcl::{fit_mcl, predict_reserves, ReserveReport, DEFAULT_FALLBACK_TAIL};
use crate::triangle::{load_panel_manifest, Triangle, TrianglePanel};

/// Detection/adjustment technique selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    /// Flag outside the fence, clip flagged rows to the fence.
    BagplotFence,
    /// Flag outside the fence, clip flagged rows to the loop.
    BagplotLoop,
    /// Graded bagdistance adjustment without an upper limit.
    BdUnbounded,
    /// Graded bagdistance adjustment; rows beyond `u` go to the fence.
    BdLimited,
    /// AO with formula whiskers and a skew-adjusted cut-off; clip to the loop.
    AoTraditional,
    /// AO with data-point whiskers and its own cut-off; clip to the loop.
    AoChi,
    /// AO traditional flags clipped to a 3x AO-bag fence.
    AoFence,
    /// MCD Mahalanobis detection with multivariate winsorization.
    Mcd,
}

impl Technique {
    pub const ALL: [Technique; 8] = [
        Technique::BagplotFence,
        Technique::BagplotLoop,
        Technique::BdUnbounded,
        Technique::BdLimited,
        Technique::AoTraditional,
        Technique::AoChi,
        Technique::AoFence,
        Technique::Mcd,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            Technique::BagplotFence => "bagplot-fence",
            Technique::BagplotLoop => "bagplot-loop",
            Technique::BdUnbounded => "bd-unbounded",
            Technique::BdLimited => "bd-limited",
            Technique::AoTraditional => "ao-traditional",
            Technique::AoChi => "ao-chi",
            Technique::AoFence => "ao-fence",
            Technique::Mcd => "mcd",
        }
    }
}

impl clap::ValueEnum for Technique {
    fn value_variants<'a>() -> &'a [Self] {
        &Technique::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.token()))
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .into_iter()
            .find(|t| t.token() == s)
            .ok_or_else(|| {
                Error::parameter(format!(
                    "unknown technique {s:?}; expected one of: {}",
                    Technique::ALL.map(|t| t.token()).join(", ")
                ))
            })
    }
}

/// Full pipeline configuration. All fields except the manifest path have
/// defaults, so a config file only needs to override what it changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct PipelineConfig {
    /// Path to the JSON panel manifest listing the triangle CSVs.
    pub manifest: PathBuf,
    pub technique: Technique,
    /// Fence factor `f`; `None` means `sqrt(chi2_{fence_quantile, p})`.
    pub fence_factor: Option<f64>,
    /// Quantile behind the default fence factor.
    pub fence_quantile: f64,
    /// Upper bagdistance limit `u` for `bd-limited`.
    pub bd_limit: f64,
    /// AO projection directions per dimension (`m = p * this`).
    pub ao_directions_per_dim: usize,
    /// Bag-to-fence factor for `ao-fence`.
    pub ao_fence_factor: f64,
    /// Use the literal `sqrt(chi2) * median` cut-off for `ao-chi` instead
    /// of the skew-adjusted cut-off on the data-point-whisker scores.
    pub ao_chi_literal: bool,
    /// Seed for AO direction sampling and the MCD subset search.
    pub seed: u64,
    /// MCD subset size as a fraction of n.
    pub h_fraction: f64,
    /// MCD detection quantile (`MD^2 > chi2_{q,p}` flags a row).
    pub detection_quantile: f64,
    /// MCD winsorization target quantile.
    pub adjustment_quantile: f64,
    /// Development periods estimated with per-triangle univariate factors.
    pub fallback_tail: usize,
    /// Where reports and figures are written; `None` = stdout only.
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::new(),
            technique: Technique::BagplotFence,
            fence_factor: None,
            fence_quantile: 0.99,
            bd_limit: 15.0,
            ao_directions_per_dim: 250,
            ao_fence_factor: AO_FENCE_FACTOR,
            ao_chi_literal: false,
            seed: 0,
            h_fraction: DEFAULT_H_FRACTION,
            detection_quantile: DEFAULT_DETECTION_QUANTILE,
            adjustment_quantile: DEFAULT_ADJUSTMENT_QUANTILE,
            fallback_tail: DEFAULT_FALLBACK_TAIL,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    /// Effective fence factor for a `p`-dimensional panel.
    pub fn fence(&self, p: usize) -> f64 {
        self.fence_factor
            .unwrap_or_else(|| default_fence_factor(p, self.fence_quantile))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let check_unit = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::parameter(format!("{name} must lie in (0, 1), got {v}")));
            }
            Ok(())
        };
        check_unit("fence-quantile", self.fence_quantile)?;
        check_unit("detection-quantile", self.detection_quantile)?;
        check_unit("adjustment-quantile", self.adjustment_quantile)?;
        check_unit("h-fraction", self.h_fraction)?;
        if let Some(f) = self.fence_factor {
            if f <= 0.0 {
                return Err(Error::parameter("fence-factor must be positive"));
            }
        }
        if self.ao_directions_per_dim == 0 {
            return Err(Error::parameter("ao-directions-per-dim must be positive"));
        }
        if self.ao_fence_factor <= 1.0 {
            return Err(Error::parameter("ao-fence-factor must exceed 1"));
        }
        if self.technique == Technique::BdLimited && self.bd_limit <= self.fence(p) {
            return Err(Error::parameter(format!(
                "bd-limit (u = {}) must exceed the fence factor (f = {:.4}) for bd-limited",
                self.bd_limit,
                self.fence(p)
            )));
        }
        Ok(())
    }
}

/// Per-row outlyingness scores computed for every run regardless of the
/// selected technique (they all appear in the outlier report).
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub depth: Vec<usize>,
    pub bd: Vec<f64>,
    pub ao: Vec<f64>,
    pub md2: Vec<f64>,
}

/// Detection and adjustment outcome on the pooled residual rows.
#[derive(Debug, Clone)]
pub struct Detection {
    pub technique: Technique,
    pub flags: Vec<bool>,
    /// Cut-off the flags were thresholded at, where the technique has a
    /// scalar cut-off (bd, AO, MCD); the fence factor otherwise.
    pub cutoff: f64,
    pub scores: ScoreTable,
    pub adjusted_rows: Vec<Point>,
    pub bagplot: BagplotModel,
    pub bd_scores: BdScore,
    pub ao_scores: AoScore,
    pub ao_model: Option<AoModel>,
    pub mcd: McdFit,
}

/// Run detection and adjustment on pooled residual rows.
pub fn detect_and_adjust(rows: &[Point], config: &PipelineConfig) -> Result<Detection> {
    let p = rows
        .first()
        .ok_or_else(|| Error::data("empty residual panel"))?
        .len();
    config.validate(p)?;
    let f = config.fence(p);
    let m = config.ao_directions_per_dim * p;

    let bagplot = build_bagplot(rows, f).map_err(|e| e.at_step("bagplot"))?;
    let bd_scores = bagdistance(rows, &bagplot).map_err(|e| e.at_step("bagdistance"))?;
    let whiskers = if config.technique == Technique::AoChi {
        AoWhiskers::DataPoint
    } else {
        AoWhiskers::Formula
    };
    let ao_scores =
        ao_scores_with(rows, m, config.seed, whiskers).map_err(|e| e.at_step("adjusted-outlyingness"))?;
    let h = ((config.h_fraction * rows.len() as f64).ceil() as usize).min(rows.len());
    let mcd = fast_mcd(rows, Some(h), config.seed).map_err(|e| e.at_step("mcd"))?;
    let md2 = robust_md2(&mcd, rows).map_err(|e| e.at_step("mcd"))?;

    let mut ao_model = None;
    let (flags, cutoff, adjusted_rows) = match config.technique {
        Technique::BagplotFence => {
            let flags = bagplot.outliers.clone();
            let adj = adjust_to_polytope(rows, &bagplot.fence, &flags)
                .map_err(|e| e.at_step("adjustment"))?;
            (flags, f, adj)
        }
        Technique::BagplotLoop => {
            let flags = bagplot.outliers.clone();
            let target = bagplot
                .loop_hull
                .as_ref()
                .ok_or_else(|| Error::degenerate("loop hull unavailable").at_step("adjustment"))?;
            let adj =
                adjust_to_polytope(rows, target, &flags).map_err(|e| e.at_step("adjustment"))?;
            (flags, f, adj)
        }
        Technique::BdUnbounded => {
            let flags = detect_bd(&bd_scores, f).map_err(|e| e.at_step("detection"))?;
            let adj = adjust_bd_unbounded(rows, &bd_scores, &bagplot.tukey_median, f)
                .map_err(|e| e.at_step("adjustment"))?;
            (flags, f, adj)
        }
        Technique::BdLimited => {
            let flags = detect_bd(&bd_scores, f).map_err(|e| e.at_step("detection"))?;
            let adj =
                adjust_bd_limited(rows, &bd_scores, &bagplot.tukey_median, f, config.bd_limit)
                    .map_err(|e| e.at_step("adjustment"))?;
            (flags, f, adj)
        }
        Technique::AoTraditional | Technique::AoChi => {
            // Both flag on a scalar AO cut-off and clip to the loop; they
            // differ in the whisker convention baked into `ao_scores` and,
            // optionally, in the cut-off formula.
            let variant = if config.technique == Technique::AoChi && config.ao_chi_literal {
                AoVariant::ChiMedian
            } else {
                AoVariant::Traditional
            };
            let model = build_ao_model(rows, &ao_scores, variant, config.ao_fence_factor)
                .map_err(|e| e.at_step("detection"))?;
            let flags = model.outliers.clone();
            let cutoff = model.cutoff;
            let target = model
                .loop_hull
                .clone()
                .ok_or_else(|| Error::degenerate("AO loop unavailable").at_step("adjustment"))?;
            let adj = crate::ao::ao_adjust(rows, &model, &flags, &target)
                .map_err(|e| e.at_step("adjustment"))?;
            ao_model = Some(model);
            (flags, cutoff, adj)
        }
        Technique::AoFence => {
            // Traditional cut-off decides the flags; the adjustment target
            // is the AO bag inflated about the AO median point.
            let model = build_ao_model(rows, &ao_scores, AoVariant::Traditional, config.ao_fence_factor)
                .map_err(|e| e.at_step("detection"))?;
            let flags = model.outliers.clone();
            let cutoff = model.cutoff;
            let fence = model
                .bag
                .scale_about_center(config.ao_fence_factor)
                .map_err(|e| e.at_step("adjustment"))?;
            let adj = crate::ao::ao_adjust(rows, &model, &flags, &fence)
                .map_err(|e| e.at_step("adjustment"))?;
            ao_model = Some(model);
            (flags, cutoff, adj)
        }
        Technique::Mcd => {
            let flags = mcd_detect_at(&md2, p, config.detection_quantile);
            let cutoff = crate::stats::chi2_quantile(config.detection_quantile, p);
            let adj = winsorize_at(rows, &mcd, &md2, &flags, config.adjustment_quantile);
            (flags, cutoff, adj)
        }
    };

    Ok(Detection {
        technique: config.technique,
        flags,
        cutoff,
        scores: ScoreTable {
            depth: bagplot.depth.depths.clone(),
            bd: bd_scores.bd.clone(),
            ao: ao_scores.ao.clone(),
            md2,
        },
        adjusted_rows,
        bagplot,
        bd_scores,
        ao_scores,
        ao_model,
        mcd,
    })
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub residuals: ResidualPanel,
    pub detection: Detection,
    /// Panel after adjustment and backtransform (incremental claims).
    pub robust_panel: TrianglePanel,
    pub original: ReserveReport,
    pub robust: ReserveReport,
}

fn sanitize(panel: &TrianglePanel) -> Result<TrianglePanel> {
    let triangles: Vec<Triangle> = panel
        .triangles
        .iter()
        .map(|t| t.zero_negatives().map(|(t, _, _)| t))
        .collect::<Result<_>>()?;
    TrianglePanel::new(triangles)
}

fn reserve_report(panel: &TrianglePanel, fallback_tail: usize) -> Result<ReserveReport> {
    let cum: Vec<Triangle> = panel
        .triangles
        .iter()
        .map(|t| t.to_cumulative())
        .collect::<Result<_>>()?;
    let labels: Vec<String> = panel.triangles.iter().map(|t| t.label.clone()).collect();
    let fit = fit_mcl(&cum, fallback_tail)?;
    predict_reserves(&cum, &fit, &labels)
}

/// Run the full pipeline on an already-loaded incremental panel.
pub fn run_pipeline_on(panel: &TrianglePanel, config: &PipelineConfig) -> Result<PipelineResult> {
    let panel = sanitize(panel).map_err(|e| e.at_step("load"))?;
    let residuals = residual_panel(&panel).map_err(|e| e.at_step("robust-glm"))?;
    let detection = detect_and_adjust(&residuals.rows, config)?;
    let robust_panel = residuals
        .with_rows(detection.adjusted_rows.clone())
        .backtransform()
        .map_err(|e| e.at_step("backtransform"))?;
    let robust_panel = sanitize(&robust_panel).map_err(|e| e.at_step("backtransform"))?;
    let original = reserve_report(&panel, config.fallback_tail)
        .map_err(|e| e.at_step("chain-ladder-original"))?;
    let robust = reserve_report(&robust_panel, config.fallback_tail)
        .map_err(|e| e.at_step("chain-ladder-robust"))?;
    Ok(PipelineResult {
        residuals,
        detection,
        robust_panel,
        original,
        robust,
    })
}

/// Load the manifest named in the config and run the full pipeline.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineResult> {
    let panel = load_panel_manifest(&config.manifest).map_err(|e| e.at_step("load"))?;
    run_pipeline_on(&panel, config)
}
