//! TOML experiment configurations.

use crate::error::{Error, Result};
use crate::estimation::Rect;
use crate::field::ChannelParams;
use crate::sampling::{Layout, LayoutKind, DEFAULT_BS_EXCLUSION_RADIUS};
use serde::Deserialize;
use std::path::Path;

fn default_n_pl() -> f64 {
    2.2
}
fn default_k_db() -> f64 {
    -80.0
}
fn default_alpha() -> f64 {
    8.0
}
fn default_beta() -> f64 {
    30.0
}
fn default_sigma2() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_n_pl")]
    pub n_pl: f64,
    #[serde(default = "default_k_db")]
    pub k_db: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            n_pl: default_n_pl(),
            k_db: default_k_db(),
            alpha: default_alpha(),
            beta: default_beta(),
            sigma2: default_sigma2(),
        }
    }
}

impl ParamsConfig {
    pub fn to_params(self) -> Result<ChannelParams> {
        ChannelParams::new(self.n_pl, self.k_db, self.alpha, self.beta, self.sigma2)
    }
}

fn default_area_side() -> f64 {
    300.0
}
fn default_exclusion() -> f64 {
    DEFAULT_BS_EXCLUSION_RADIUS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    /// "random" or "grid".
    pub kind: String,
    #[serde(default = "default_area_side")]
    pub area_side: f64,
    #[serde(default = "default_exclusion")]
    pub bs_exclusion_radius: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            kind: "random".into(),
            area_side: default_area_side(),
            bs_exclusion_radius: default_exclusion(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Densities for random layouts (samples per square meter).
    pub lambda: Option<Vec<f64>>,
    /// Spacings for grid layouts (meters).
    pub d: Option<Vec<f64>>,
    #[serde(default = "default_k_list")]
    pub k: Vec<usize>,
}

fn default_k_list() -> Vec<usize> {
    vec![1]
}

fn default_targets() -> usize {
    500
}
fn default_realizations() -> u32 {
    200
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_targets")]
    pub targets: usize,
    #[serde(default = "default_realizations")]
    pub realizations: u32,
    #[serde(default)]
    pub seed: u64,
    /// Override of the interior margin that keeps targets away from the
    /// area boundary; defaults to `max(3 beta, sqrt2 d/2, 3/sqrt(lambda))`.
    pub interior_margin: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            targets: default_targets(),
            realizations: default_realizations(),
            seed: 0,
            interior_margin: None,
        }
    }
}

/// Configuration of an AMSE sweep (density x k) experiment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.to_params()?;
        if self.run.targets == 0 || self.run.realizations == 0 {
            return Err(Error::Config("targets and realizations must be >= 1".into()));
        }
        if self.sweep.k.is_empty() || self.sweep.k.iter().any(|&k| k == 0) {
            return Err(Error::Config("sweep.k must be a nonempty list of k >= 1".into()));
        }
        match self.layout.kind.as_str() {
            "random" => {
                let l = self
                    .sweep
                    .lambda
                    .as_ref()
                    .ok_or_else(|| Error::Config("random layout needs sweep.lambda".into()))?;
                if l.is_empty() || self.sweep.d.is_some() {
                    return Err(Error::Config(
                        "random layout takes a nonempty sweep.lambda and no sweep.d".into(),
                    ));
                }
            }
            "grid" => {
                let d = self
                    .sweep
                    .d
                    .as_ref()
                    .ok_or_else(|| Error::Config("grid layout needs sweep.d".into()))?;
                if d.is_empty() || self.sweep.lambda.is_some() {
                    return Err(Error::Config(
                        "grid layout takes a nonempty sweep.d and no sweep.lambda".into(),
                    ));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "layout.kind must be \"random\" or \"grid\", got {other:?}"
                )))
            }
        }
        for (layout, _) in self.sweep_layouts()? {
            layout.validate()?;
            let margin = self.margin_for(&layout);
            if 2.0 * margin >= layout.area_side {
                return Err(Error::Config(format!(
                    "interior margin {margin} leaves no target area inside side {}",
                    layout.area_side
                )));
            }
        }
        Ok(())
    }

    /// The per-sweep-point layouts with their density labels.
    pub fn sweep_layouts(&self) -> Result<Vec<(Layout, f64)>> {
        let mk = |kind| Layout {
            kind,
            area_side: self.layout.area_side,
            bs_exclusion_radius: self.layout.bs_exclusion_radius,
        };
        match self.layout.kind.as_str() {
            "random" => Ok(self
                .sweep
                .lambda
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(|l| (mk(LayoutKind::Random { lambda: l }), l))
                .collect()),
            "grid" => Ok(self
                .sweep
                .d
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(|d| (mk(LayoutKind::Grid { spacing: d }), d))
                .collect()),
            other => Err(Error::Config(format!("unknown layout kind {other:?}"))),
        }
    }

    /// Interior margin for target draws so the unbounded-layout densities
    /// apply: `max(3 beta, sqrt2 d/2, 3/sqrt(lambda))` unless overridden.
    pub fn margin_for(&self, layout: &Layout) -> f64 {
        if let Some(m) = self.run.interior_margin {
            return m;
        }
        let beta = self.params.beta;
        let geometry = match layout.kind {
            LayoutKind::Random { lambda } => 3.0 / lambda.sqrt(),
            LayoutKind::Grid { spacing } => std::f64::consts::SQRT_2 * spacing / 2.0,
        };
        (3.0 * beta).max(geometry)
    }
}

/// Lemma-5-style parameter estimation error experiment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamErrorConfig {
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    #[serde(default = "default_delta_max")]
    pub delta_max: f64,
    pub n_list: Vec<usize>,
    #[serde(default = "default_pe_realizations")]
    pub realizations: u32,
    /// Correlation distances to sweep; defaults to the params' beta.
    pub beta_list: Option<Vec<f64>>,
}

fn default_delta_min() -> f64 {
    50.0
}
fn default_delta_max() -> f64 {
    500.0
}
fn default_pe_realizations() -> u32 {
    1000
}

/// Path-loss-only prediction AMSE vs the `(alpha + sigma2)(1 + 2/N)` law.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossOnlyConfig {
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    #[serde(default = "default_delta_max")]
    pub delta_max: f64,
    pub n_list: Vec<usize>,
    #[serde(default = "default_po_targets")]
    pub targets: usize,
    #[serde(default = "default_po_realizations")]
    pub realizations: u32,
    /// Correlation distance for this experiment (the law is a small-beta
    /// limit); defaults to the params' beta.
    pub beta: Option<f64>,
}

fn default_po_targets() -> usize {
    100
}
fn default_po_realizations() -> u32 {
    400
}

/// Prediction with locally estimated vs true parameters in one region.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstVsTrueConfig {
    #[serde(default = "default_grid_d")]
    pub grid_d: f64,
    #[serde(default = "default_area_side")]
    pub area_side: f64,
    pub region: Rect,
    #[serde(default = "default_evt_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_evt_targets")]
    pub targets: usize,
    #[serde(default = "default_evt_realizations")]
    pub realizations: u32,
    /// Estimate the shadowing triple locally too (the full pipeline) instead
    /// of only the path loss pair.
    #[serde(default)]
    pub estimate_shadowing: bool,
}

fn default_grid_d() -> f64 {
    25.0
}
fn default_evt_k() -> Vec<usize> {
    vec![0, 1, 2, 3, 4, 6]
}
fn default_evt_targets() -> usize {
    60
}
fn default_evt_realizations() -> u32 {
    300
}

/// Configuration of the estimation experiment suite; sections are optional
/// and run independently.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub seed: u64,
    pub param_error: Option<ParamErrorConfig>,
    pub pathloss_only: Option<PathlossOnlyConfig>,
    pub est_vs_true: Option<EstVsTrueConfig>,
}

impl EstimationConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.to_params()?;
        if self.param_error.is_none() && self.pathloss_only.is_none() && self.est_vs_true.is_none()
        {
            return Err(Error::Config(
                "estimation config needs at least one of [param_error], \
                 [pathloss_only], [est_vs_true]"
                    .into(),
            ));
        }
        if let Some(pe) = &self.param_error {
            if !(pe.delta_min > 0.0) || pe.delta_max <= pe.delta_min {
                return Err(Error::Config("need 0 < delta_min < delta_max".into()));
            }
            if pe.n_list.is_empty() || pe.n_list.iter().any(|&n| n < 3) {
                return Err(Error::Config("param_error.n_list entries must be >= 3".into()));
            }
            if pe.realizations == 0 {
                return Err(Error::Config("param_error.realizations must be >= 1".into()));
            }
        }
        if let Some(po) = &self.pathloss_only {
            if !(po.delta_min > 0.0) || po.delta_max <= po.delta_min {
                return Err(Error::Config("need 0 < delta_min < delta_max".into()));
            }
            if po.n_list.is_empty() || po.n_list.iter().any(|&n| n < 3) {
                return Err(Error::Config("pathloss_only.n_list entries must be >= 3".into()));
            }
            if po.targets == 0 || po.realizations == 0 {
                return Err(Error::Config(
                    "pathloss_only.targets and realizations must be >= 1".into(),
                ));
            }
        }
        if let Some(evt) = &self.est_vs_true {
            if evt.grid_d <= 0.0 || evt.area_side <= 0.0 {
                return Err(Error::Config("grid_d and area_side must be > 0".into()));
            }
            if evt.region.x1 <= evt.region.x0 || evt.region.y1 <= evt.region.y0 {
                return Err(Error::Config("est_vs_true.region is empty".into()));
            }
            if evt.k.is_empty() {
                return Err(Error::Config("est_vs_true.k must be nonempty".into()));
            }
            if evt.targets == 0 || evt.realizations == 0 {
                return Err(Error::Config(
                    "est_vs_true.targets and realizations must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}
