//! Channel parameter estimation from gain map samples within a region.
//!
//! Two-step local modeling: an LS fit of the path loss pair `(K_dB, n_PL)`
//! over the region's samples, then a distance-binned correlation fit of the
//! detrended residuals for the shadowing pair `(alpha, beta)`, and finally
//! the multipath variance as the residual power unexplained by shadowing.
//! Lemma-style closed forms predict the LS error variances as functions of
//! the sample count and the region's distance range.

use crate::error::{Error, Result};
use crate::field::{ChannelParams, Location};
use crate::sampling::{GainMap, LayoutKind};
use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::Deserialize;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, q: Location) -> bool {
        q.x >= self.x0 && q.x <= self.x1 && q.y >= self.y0 && q.y <= self.y1
    }
}

/// A subset of a gain map over which one channel model is fitted.
#[derive(Debug, Clone)]
pub struct Region {
    pub id: String,
    pub boundary: Option<Rect>,
    /// Indices into the map's sample list.
    pub members: Vec<usize>,
}

impl Region {
    pub fn from_rect(id: impl Into<String>, rect: Rect, map: &GainMap) -> Self {
        let members = map
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, (q, _))| rect.contains(*q))
            .map(|(i, _)| i)
            .collect();
        Self {
            id: id.into(),
            boundary: Some(rect),
            members,
        }
    }

    pub fn from_members(id: impl Into<String>, members: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            boundary: None,
            members,
        }
    }
}

/// Load region rectangles from a TOML file with `[[region]]` entries
/// carrying `id, x0, y0, x1, y1`.
pub fn load_regions(path: &Path) -> Result<Vec<(String, Rect)>> {
    #[derive(Deserialize)]
    struct RegionRow {
        id: String,
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    }
    #[derive(Deserialize)]
    struct File {
        region: Vec<RegionRow>,
    }
    let text = fs::read_to_string(path)?;
    let parsed: File =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(parsed
        .region
        .into_iter()
        .map(|r| {
            (
                r.id,
                Rect {
                    x0: r.x0,
                    y0: r.y0,
                    x1: r.x1,
                    y1: r.y1,
                },
            )
        })
        .collect())
}

/// Result of the two-parameter path loss LS fit.
#[derive(Debug, Clone)]
pub struct PathlossFit {
    pub k_db_hat: f64,
    pub n_pl_hat: f64,
    /// Normal-equation matrix `H^T H` (fit diagnostics).
    pub hth: Matrix2<f64>,
    pub n_samples: usize,
}

fn design_column(q: Location) -> f64 {
    -10.0 * q.range().log10()
}

/// LS fit of `(K_dB, n_PL)` over a region: solves the 2x2 normal equations
/// of `y ~ K + n h` with `h = -10 log10 |q|`.
pub fn fit_pathloss(map: &GainMap, region: &Region) -> Result<PathlossFit> {
    let n = region.members.len();
    if n < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "region {:?} has {n} samples; the fit needs at least 3",
            region.id
        )));
    }
    let mut sh = 0.0;
    let mut shh = 0.0;
    let mut sy = 0.0;
    let mut shy = 0.0;
    for &i in &region.members {
        let (q, y) = map.samples()[i];
        if q.range() <= 0.0 {
            return Err(Error::OriginQuery);
        }
        let h = design_column(q);
        sh += h;
        shh += h * h;
        sy += y;
        shy += h * y;
    }
    let nf = n as f64;
    let det = nf * shh - sh * sh;
    // all samples equidistant from the BS makes the design rank deficient
    if det.abs() <= 1e-9 * nf * shh.max(1.0) {
        return Err(Error::DegenerateGeometry(
            "all region samples are equidistant from the BS; the path loss \
             exponent is unidentifiable"
                .into(),
        ));
    }
    let k_db_hat = (shh * sy - sh * shy) / det;
    let n_pl_hat = (nf * shy - sh * sy) / det;
    Ok(PathlossFit {
        k_db_hat,
        n_pl_hat,
        hth: Matrix2::new(nf, sh, sh, shh),
        n_samples: n,
    })
}

/// Detrended residuals `s = y - K_hat - n_hat h` over the region members.
pub fn residuals(map: &GainMap, region: &Region, fit: &PathlossFit) -> Vec<f64> {
    region
        .members
        .iter()
        .map(|&i| {
            let (q, y) = map.samples()[i];
            y - fit.k_db_hat - fit.n_pl_hat * design_column(q)
        })
        .collect()
}

/// Exact LS error covariance for a fixed region geometry under known
/// channel parameters: `(H^T H)^{-1} H^T (R + sigma2 I) H (H^T H)^{-1}`.
pub fn ls_error_covariance(
    map: &GainMap,
    region: &Region,
    params: &ChannelParams,
) -> Result<Matrix2<f64>> {
    params.validate()?;
    let n = region.members.len();
    let fit = fit_pathloss(map, region)?; // reuses the rank checks
    let ginv = fit
        .hth
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("singular normal equations".into()))?;

    let locs: Vec<Location> = region.members.iter().map(|&i| map.samples()[i].0).collect();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut c = params.correlation(locs[i].distance(locs[j]));
            if i == j {
                c += params.sigma2;
            }
            r[(i, j)] = c;
            r[(j, i)] = c;
        }
    }
    let mut h = DMatrix::zeros(n, 2);
    for (row, &q) in locs.iter().enumerate() {
        h[(row, 0)] = 1.0;
        h[(row, 1)] = design_column(q);
    }
    let hrh = h.transpose() * r * h; // 2x2
    let hrh = Matrix2::new(hrh[(0, 0)], hrh[(0, 1)], hrh[(1, 0)], hrh[(1, 1)]);
    Ok(ginv * hrh * ginv)
}

/// Inputs for the closed-form LS error prediction.
#[derive(Debug, Clone, Copy)]
pub struct Lemma5Inputs {
    pub n_samples: usize,
    /// Samples' distances to the BS are uniform in `[delta_min, delta_max]`.
    pub delta_min: f64,
    pub delta_max: f64,
    pub layout: LayoutKind,
    pub params: ChannelParams,
}

/// Predicted LS error variances for the intercept and the exponent.
#[derive(Debug, Clone, Copy)]
pub struct Lemma5Error {
    pub var_k_db: f64,
    pub var_n_pl: f64,
}

/// Mean of `y = 10 log10 d` for `d ~ U[a, b]`.
pub fn log_distance_mean(a: f64, b: f64) -> f64 {
    (10.0 * b * b.log10() - 10.0 * a * a.log10()) / (b - a) - 10.0 / std::f64::consts::LN_10
}

/// Variance of `y = 10 log10 d` for `d ~ U[a, b]`.
///
/// Note: the log-ratio term is squared. Unsquared it goes negative for any
/// range ratio other than 10, and the Monte Carlo variance of `y` confirms
/// the squared form.
pub fn log_distance_variance(a: f64, b: f64) -> f64 {
    let ln10 = std::f64::consts::LN_10;
    let lr = (b / a).log10();
    100.0 / (ln10 * ln10) - 100.0 * a * b * (lr * lr) / ((b - a) * (b - a))
}

/// Closed-form LS error variances: grouping samples within the correlation
/// distance into `c` effective points gives
/// `var(K) = (alpha + sigma2/c)/(N/c) (mu^2 + chi)/chi` and
/// `var(n) = (alpha + sigma2/c)/(N/c) / chi`.
pub fn lemma5_error(inputs: &Lemma5Inputs) -> Result<Lemma5Error> {
    inputs.params.validate()?;
    if inputs.n_samples < 3 {
        return Err(Error::InvalidParameter("n_samples must be >= 3".into()));
    }
    if !(inputs.delta_min > 0.0) || inputs.delta_max <= inputs.delta_min {
        return Err(Error::InvalidParameter(
            "need 0 < delta_min < delta_max".into(),
        ));
    }
    let beta = inputs.params.beta;
    let c = match inputs.layout {
        LayoutKind::Random { lambda } => (PI * lambda * beta * beta).max(1.0),
        LayoutKind::Grid { spacing } => (PI * beta * beta / (spacing * spacing)).max(1.0),
    };
    let mu = log_distance_mean(inputs.delta_min, inputs.delta_max);
    let chi = log_distance_variance(inputs.delta_min, inputs.delta_max);
    let scale = (inputs.params.alpha + inputs.params.sigma2 / c) / (inputs.n_samples as f64 / c);
    Ok(Lemma5Error {
        var_k_db: scale * (mu * mu + chi) / chi,
        var_n_pl: scale / chi,
    })
}

/// One distance bin of the correlation-function estimate.
#[derive(Debug, Clone, Copy)]
pub struct VariogramBin {
    /// Representative pair distance of the bin.
    pub distance: f64,
    /// Average residual product over the bin's pairs.
    pub correlation: f64,
    /// Number of pairs in the bin.
    pub pairs: usize,
}

/// How pair distances are grouped into bins.
#[derive(Debug, Clone, Copy)]
pub enum BinSpec {
    /// Group exactly equal distances (grids, whose distance multiset repeats).
    Exact,
    /// Fixed-width bins represented by their centers (random layouts, whose
    /// pair distances are almost surely unique).
    Width(f64),
}

impl BinSpec {
    pub fn default_for(kind: LayoutKind, beta_hint: f64) -> Self {
        match kind {
            LayoutKind::Grid { .. } => BinSpec::Exact,
            LayoutKind::Random { .. } => BinSpec::Width(beta_hint / 10.0),
        }
    }
}

/// Bins with fewer pairs than this are dropped before the positivity
/// truncation.
pub const MIN_BIN_PAIRS: usize = 5;

/// Result of the shadowing correlation fit.
#[derive(Debug, Clone)]
pub struct ShadowingFit {
    pub alpha_hat: f64,
    /// `None` when the fit is degenerate (fewer than two usable bins, or a
    /// non-positive fitted decay rate, i.e. `beta_hat -> 0`).
    pub beta_hat: Option<f64>,
    pub bins: Vec<VariogramBin>,
    pub degenerate: bool,
}

/// Estimate the correlation function at binned pair distances and fit
/// `(alpha, beta)` by weighted log-linear LS.
///
/// Bins ascend by distance, small bins are dropped, and the sequence is
/// truncated at the first non-positive correlation estimate. The weighted
/// regression of `ln eps_hat` on `[1, -d]` returns `[ln alpha, 1/beta]`.
pub fn fit_shadowing(
    map: &GainMap,
    region: &Region,
    fit: &PathlossFit,
    spec: BinSpec,
) -> Result<ShadowingFit> {
    let s = residuals(map, region, fit);
    let locs: Vec<Location> = region.members.iter().map(|&i| map.samples()[i].0).collect();
    let n = locs.len();
    if n < 3 {
        return Err(Error::DegenerateGeometry(
            "shadowing fit needs at least 3 samples".into(),
        ));
    }

    // accumulate products per bin key
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new(); // key -> (sum d, sum prod, count)
    for i in 0..n {
        for j in (i + 1)..n {
            let d = locs[i].distance(locs[j]);
            let key = match spec {
                BinSpec::Exact => (d / 1e-6).round() as i64,
                BinSpec::Width(w) => (d / w).floor() as i64,
            };
            let e = acc.entry(key).or_insert((0.0, 0.0, 0));
            e.0 += d;
            e.1 += s[i] * s[j];
            e.2 += 1;
        }
    }
    let mut bins: Vec<VariogramBin> = acc
        .into_values()
        .filter(|&(_, _, c)| c >= MIN_BIN_PAIRS)
        .map(|(sd, sp, c)| VariogramBin {
            distance: sd / c as f64,
            correlation: sp / c as f64,
            pairs: c,
        })
        .collect();
    // truncation at the first non-positive estimate, per the selection rule
    if let Some(pos) = bins.iter().position(|b| b.correlation <= 0.0) {
        bins.truncate(pos);
    }

    if bins.len() < 2 {
        return Ok(ShadowingFit {
            alpha_hat: 0.0,
            beta_hat: None,
            bins,
            degenerate: true,
        });
    }

    fit_correlation_bins(&bins)
}

/// Weighted log-linear LS on prepared bins (the Eq-solver behind
/// [`fit_shadowing`], exposed so exact planted bins can be fitted directly).
pub fn fit_correlation_bins(bins: &[VariogramBin]) -> Result<ShadowingFit> {
    if bins.len() < 2 {
        return Ok(ShadowingFit {
            alpha_hat: 0.0,
            beta_hat: None,
            bins: bins.to_vec(),
            degenerate: true,
        });
    }
    if bins.iter().any(|b| b.correlation <= 0.0) {
        return Err(Error::InvalidParameter(
            "correlation bins must be positive for the log-linear fit".into(),
        ));
    }
    // weighted normal equations for ln eps = ln alpha - d / beta
    let mut sw = 0.0;
    let mut swd = 0.0;
    let mut swdd = 0.0;
    let mut swy = 0.0;
    let mut swdy = 0.0;
    for b in bins {
        let w = b.pairs as f64;
        let d = b.distance;
        let y = b.correlation.ln();
        sw += w;
        swd += w * d;
        swdd += w * d * d;
        swy += w * y;
        swdy += w * d * y;
    }
    let m = Matrix2::new(sw, -swd, -swd, swdd);
    let rhs = Vector2::new(swy, -swdy);
    let sol = m
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("singular variogram normal equations".into()))?
        * rhs;
    let (ln_alpha, inv_beta) = (sol[0], sol[1]);
    if inv_beta <= 0.0 {
        // noise produced a non-decaying fit; report the intercept and flag it
        return Ok(ShadowingFit {
            alpha_hat: ln_alpha.exp(),
            beta_hat: None,
            bins: bins.to_vec(),
            degenerate: true,
        });
    }
    Ok(ShadowingFit {
        alpha_hat: ln_alpha.exp(),
        beta_hat: Some(1.0 / inv_beta),
        bins: bins.to_vec(),
        degenerate: false,
    })
}

/// Multipath variance estimate: residual mean square unexplained by the
/// fitted shadowing variance, clamped at zero.
pub fn estimate_sigma2(residuals: &[f64], alpha_hat: f64) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    let ms = residuals.iter().map(|s| s * s).sum::<f64>() / residuals.len() as f64;
    (ms - alpha_hat).max(0.0)
}

/// A full per-region parameter estimate.
#[derive(Debug, Clone)]
pub struct EstimatedParams {
    pub k_db_hat: f64,
    pub n_pl_hat: f64,
    /// LS error covariance of `(K_hat, n_hat)`; plug-in evaluation from the
    /// region's own estimates when produced by the pipeline.
    pub c_ls: Matrix2<f64>,
    pub alpha_hat: f64,
    pub beta_hat: Option<f64>,
    pub sigma2_hat: f64,
    pub bins: Vec<VariogramBin>,
    pub degenerate_shadowing: bool,
}

impl EstimatedParams {
    /// An estimate equal to the true parameters with zero error covariance
    /// (analysis-mode helper).
    pub fn exact(params: &ChannelParams) -> Self {
        Self {
            k_db_hat: params.k_db,
            n_pl_hat: params.n_pl,
            c_ls: Matrix2::zeros(),
            alpha_hat: params.alpha,
            beta_hat: Some(params.beta),
            sigma2_hat: params.sigma2,
            bins: Vec::new(),
            degenerate_shadowing: false,
        }
    }

    /// View as channel parameters for the MMSE predictor. A degenerate
    /// shadowing fit maps to `alpha = 0` (prediction falls back to path
    /// loss only, with the correlation distance irrelevant).
    pub fn to_channel_params(&self) -> ChannelParams {
        match self.beta_hat {
            Some(beta) if self.alpha_hat > 0.0 => ChannelParams {
                n_pl: self.n_pl_hat,
                k_db: self.k_db_hat,
                alpha: self.alpha_hat,
                beta,
                sigma2: self.sigma2_hat,
            },
            _ => ChannelParams {
                n_pl: self.n_pl_hat,
                k_db: self.k_db_hat,
                alpha: 0.0,
                beta: 1.0,
                sigma2: self.sigma2_hat,
            },
        }
    }
}

/// Run the two-step estimation in every region; per-region failures are
/// collected, not fatal to the others.
pub fn fit_region_pipeline(
    map: &GainMap,
    regions: &[Region],
    spec: BinSpec,
) -> Vec<(String, Result<EstimatedParams>)> {
    regions
        .iter()
        .map(|region| {
            let out = fit_one_region(map, region, spec);
            (region.id.clone(), out)
        })
        .collect()
}

fn fit_one_region(map: &GainMap, region: &Region, spec: BinSpec) -> Result<EstimatedParams> {
    let fit = fit_pathloss(map, region)?;
    let shadow = fit_shadowing(map, region, &fit, spec)?;
    let s = residuals(map, region, &fit);
    let sigma2_hat = estimate_sigma2(&s, shadow.alpha_hat);
    // plug-in covariance from the region's own estimates
    let plug = EstimatedParams {
        k_db_hat: fit.k_db_hat,
        n_pl_hat: fit.n_pl_hat,
        c_ls: Matrix2::zeros(),
        alpha_hat: shadow.alpha_hat,
        beta_hat: shadow.beta_hat,
        sigma2_hat,
        bins: shadow.bins.clone(),
        degenerate_shadowing: shadow.degenerate,
    };
    let c_ls = ls_error_covariance(map, region, &plug.to_channel_params())?;
    Ok(EstimatedParams { c_ls, ..plug })
}

/// Write per-region estimates as CSV
/// (`region_id,n_pl,k_db,alpha,beta,sigma2,c_kk,c_kn,c_nk,c_nn`); a
/// degenerate shadowing fit reports `beta = 0`.
pub fn write_estimates_csv(
    out: &mut dyn Write,
    rows: &[(String, Result<EstimatedParams>)],
) -> Result<()> {
    writeln!(out, "region_id,n_pl,k_db,alpha,beta,sigma2,c_kk,c_kn,c_nk,c_nn")?;
    for (id, row) in rows {
        match row {
            Ok(e) => {
                writeln!(
                    out,
                    "{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                    id,
                    e.n_pl_hat,
                    e.k_db_hat,
                    e.alpha_hat,
                    e.beta_hat.unwrap_or(0.0),
                    e.sigma2_hat,
                    e.c_ls[(0, 0)],
                    e.c_ls[(0, 1)],
                    e.c_ls[(1, 0)],
                    e.c_ls[(1, 1)]
                )?;
            }
            Err(err) => writeln!(out, "{id},error:{err},,,,,,,,")?,
        }
    }
    Ok(())
}
