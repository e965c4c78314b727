//! Sample layouts and gain maps.
//!
//! Layouts cover a square area `[0, D]^2` whose corner hosts the base
//! station at the origin; a small exclusion radius keeps every sample at a
//! strictly positive range. Random layouts are homogeneous Poisson point
//! processes of density `lambda`; grid layouts place `floor(D/d)^2` lattice
//! points offset `(d/2, d/2)` from the corner.
//!
//! A [`GainMap`] stores `(location, gain)` samples behind a uniform-bucket
//! spatial hash that answers exact Euclidean k-NN queries via an
//! expanding-ring search (ties broken by insertion index).

use crate::error::{Error, Result};
use crate::field::Location;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

/// How the sample locations are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayoutKind {
    /// Homogeneous PPP with `lambda` samples per square meter.
    Random { lambda: f64 },
    /// Lattice with `spacing` meters between adjacent samples.
    Grid { spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: LayoutKind,
    /// Side length D of the square area in meters.
    pub area_side: f64,
    /// Minimum distance of any sample to the BS at the origin.
    pub bs_exclusion_radius: f64,
}

pub const DEFAULT_BS_EXCLUSION_RADIUS: f64 = 1.0;

impl Layout {
    pub fn random(lambda: f64, area_side: f64) -> Result<Self> {
        let l = Self {
            kind: LayoutKind::Random { lambda },
            area_side,
            bs_exclusion_radius: DEFAULT_BS_EXCLUSION_RADIUS,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn grid(spacing: f64, area_side: f64) -> Result<Self> {
        let l = Self {
            kind: LayoutKind::Grid { spacing },
            area_side,
            bs_exclusion_radius: DEFAULT_BS_EXCLUSION_RADIUS,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.area_side.is_finite() || self.area_side <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "area_side must be > 0, got {}",
                self.area_side
            )));
        }
        if self.bs_exclusion_radius < 0.0 {
            return Err(Error::InvalidParameter(
                "bs_exclusion_radius must be >= 0".into(),
            ));
        }
        match self.kind {
            LayoutKind::Random { lambda } => {
                if !lambda.is_finite() || lambda <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "lambda must be > 0, got {lambda}"
                    )));
                }
            }
            LayoutKind::Grid { spacing } => {
                if !spacing.is_finite() || spacing <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "grid spacing must be > 0, got {spacing}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Nominal point spacing: `d` for grids, `1/sqrt(lambda)` for PPPs.
    pub fn nominal_spacing(&self) -> f64 {
        match self.kind {
            LayoutKind::Random { lambda } => 1.0 / lambda.sqrt(),
            LayoutKind::Grid { spacing } => spacing,
        }
    }
}

/// Draw the sample locations of a layout.
///
/// Random: `N ~ Poisson(lambda D^2)` points uniform over the square.
/// Grid: lattice points at `((i + 1/2) d, (j + 1/2) d)`. Points closer than
/// the exclusion radius to the origin are removed in both cases.
pub fn draw_locations(layout: &Layout, rng: &mut ChaCha8Rng) -> Result<Vec<Location>> {
    layout.validate()?;
    let d_side = layout.area_side;
    let excl = layout.bs_exclusion_radius;
    let points: Vec<Location> = match layout.kind {
        LayoutKind::Random { lambda } => {
            let mean = lambda * d_side * d_side;
            let poisson = Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter(format!("poisson mean {mean}: {e}")))?;
            let n = poisson.sample(rng) as usize;
            (0..n)
                .map(|_| {
                    let x = rng.gen_range(0.0..d_side);
                    let y = rng.gen_range(0.0..d_side);
                    Location::new(x, y)
                })
                .filter(|q| q.range() > excl)
                .collect()
        }
        LayoutKind::Grid { spacing } => {
            // the epsilon absorbs representation dust in D/d for exact ratios
            let m = (d_side / spacing + 1e-9).floor() as usize;
            let mut pts = Vec::with_capacity(m * m);
            for i in 0..m {
                for j in 0..m {
                    let q = Location::new(
                        (i as f64 + 0.5) * spacing,
                        (j as f64 + 0.5) * spacing,
                    );
                    if q.range() > excl {
                        pts.push(q);
                    }
                }
            }
            pts
        }
    };
    if points.is_empty() {
        return Err(Error::EmptyLayout);
    }
    Ok(points)
}

/// One k-NN query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub location: Location,
    pub gain_db: f64,
    pub distance: f64,
    /// Insertion index of the sample in the map (the tie-break key).
    pub index: usize,
}

/// A constructed channel gain map: samples plus their spatial index.
#[derive(Debug, Clone)]
pub struct GainMap {
    layout: Layout,
    samples: Vec<(Location, f64)>,
    index: GridIndex,
}

impl GainMap {
    pub fn new(layout: Layout, samples: Vec<(Location, f64)>) -> Result<Self> {
        layout.validate()?;
        if samples.is_empty() {
            return Err(Error::EmptyLayout);
        }
        let index = GridIndex::build(&layout, &samples);
        Ok(Self {
            layout,
            samples,
            index,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn samples(&self) -> &[(Location, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The `k` nearest samples to `q` by Euclidean distance, ascending;
    /// exact ties resolve to the lower insertion index.
    pub fn knn(&self, q: Location, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 || k > self.samples.len() {
            return Err(Error::KExceedsSamples {
                k,
                n: self.samples.len(),
            });
        }
        Ok(self.index.knn(&self.samples, q, k))
    }

    /// Write `x,y,gain_db` rows (17 significant digits, lossless round-trip)
    /// plus a key-value metadata sidecar.
    pub fn save(&self, csv_path: &Path, meta_path: &Path, seed: Option<u64>) -> Result<()> {
        let mut csv = String::from("x,y,gain_db\n");
        for (q, g) in &self.samples {
            csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", q.x, q.y, g));
        }
        fs::File::create(csv_path)?.write_all(csv.as_bytes())?;

        let mut meta = String::new();
        match self.layout.kind {
            LayoutKind::Random { lambda } => {
                meta.push_str("kind=random\n");
                meta.push_str(&format!("lambda={:.16e}\n", lambda));
            }
            LayoutKind::Grid { spacing } => {
                meta.push_str("kind=grid\n");
                meta.push_str(&format!("d={:.16e}\n", spacing));
            }
        }
        meta.push_str(&format!("area_side={:.16e}\n", self.layout.area_side));
        meta.push_str(&format!(
            "bs_exclusion_radius={:.16e}\n",
            self.layout.bs_exclusion_radius
        ));
        if let Some(s) = seed {
            meta.push_str(&format!("seed={s}\n"));
        }
        fs::File::create(meta_path)?.write_all(meta.as_bytes())?;
        Ok(())
    }

    pub fn load(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta = fs::read_to_string(meta_path)?;
        let mut kind: Option<&str> = None;
        let mut lambda = None;
        let mut d = None;
        let mut area_side = None;
        let mut excl = DEFAULT_BS_EXCLUSION_RADIUS;
        for (lineno, line) in meta.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("{}:{}: expected key=value", meta_path.display(), lineno + 1))
            })?;
            let parse = |v: &str| -> Result<f64> {
                v.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!(
                        "{}:{}: bad number {v:?}: {e}",
                        meta_path.display(),
                        lineno + 1
                    ))
                })
            };
            match key.trim() {
                "kind" => kind = Some(if value.trim() == "grid" { "grid" } else { "random" }),
                "lambda" => lambda = Some(parse(value)?),
                "d" => d = Some(parse(value)?),
                "area_side" => area_side = Some(parse(value)?),
                "bs_exclusion_radius" => excl = parse(value)?,
                "seed" => {}
                other => {
                    return Err(Error::Parse(format!(
                        "{}:{}: unknown key {other:?}",
                        meta_path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        let area_side = area_side
            .ok_or_else(|| Error::Parse(format!("{}: missing area_side", meta_path.display())))?;
        let layout_kind = match (kind, lambda, d) {
            (Some("grid"), _, Some(sp)) => LayoutKind::Grid { spacing: sp },
            (Some("random"), Some(l), _) => LayoutKind::Random { lambda: l },
            _ => {
                return Err(Error::Parse(format!(
                    "{}: need kind plus matching lambda or d",
                    meta_path.display()
                )))
            }
        };
        let layout = Layout {
            kind: layout_kind,
            area_side,
            bs_exclusion_radius: excl,
        };

        let csv = fs::read_to_string(csv_path)?;
        let mut samples = Vec::new();
        for (lineno, line) in csv.lines().enumerate() {
            if lineno == 0 {
                if line.trim() != "x,y,gain_db" {
                    return Err(Error::Parse(format!(
                        "{}: expected header x,y,gain_db",
                        csv_path.display()
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = || -> Result<f64> {
                cols.next()
                    .ok_or_else(|| {
                        Error::Parse(format!("{}:{}: short row", csv_path.display(), lineno + 1))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| {
                        Error::Parse(format!("{}:{}: {e}", csv_path.display(), lineno + 1))
                    })
            };
            let x = next()?;
            let y = next()?;
            let g = next()?;
            samples.push((Location::new(x, y), g));
        }
        GainMap::new(layout, samples)
    }
}

/// Uniform-bucket spatial hash over the layout square.
#[derive(Debug, Clone)]
struct GridIndex {
    cell: f64,
    ncells: usize,
    buckets: Vec<Vec<u32>>,
}

impl GridIndex {
    fn build(layout: &Layout, samples: &[(Location, f64)]) -> Self {
        // cell size: the nominal spacing, clamped so the table stays small
        let cell = layout
            .nominal_spacing()
            .clamp(layout.area_side / 256.0, layout.area_side);
        let ncells = (layout.area_side / cell).ceil().max(1.0) as usize;
        let mut buckets = vec![Vec::new(); ncells * ncells];
        for (i, (q, _)) in samples.iter().enumerate() {
            let (cx, cy) = Self::cell_of(q, cell, ncells);
            buckets[cy * ncells + cx].push(i as u32);
        }
        Self {
            cell,
            ncells,
            buckets,
        }
    }

    fn cell_of(q: &Location, cell: f64, ncells: usize) -> (usize, usize) {
        let cx = ((q.x / cell).floor() as i64).clamp(0, ncells as i64 - 1) as usize;
        let cy = ((q.y / cell).floor() as i64).clamp(0, ncells as i64 - 1) as usize;
        (cx, cy)
    }

    fn knn(&self, samples: &[(Location, f64)], q: Location, k: usize) -> Vec<Neighbor> {
        let (cx, cy) = Self::cell_of(&q, self.cell, self.ncells);
        // distance from q to its clamped center cell (0 when q is inside the
        // area); the ring lower bound must subtract it for outside queries
        let x0 = cx as f64 * self.cell;
        let y0 = cy as f64 * self.cell;
        let dx = (x0 - q.x).max(q.x - (x0 + self.cell)).max(0.0);
        let dy = (y0 - q.y).max(q.y - (y0 + self.cell)).max(0.0);
        let clamp_off = dx.hypot(dy);

        // best k kept as a sorted vec keyed by (distance, index); k is small
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        let mut push = |dist: f64, idx: u32, best: &mut Vec<(f64, u32)>| {
            let key = (dist, idx);
            let pos = best
                .binary_search_by(|&(d, i)| (d, i).partial_cmp(&key).unwrap())
                .unwrap_or_else(|p| p);
            if pos < k {
                best.insert(pos, key);
                best.truncate(k);
            }
        };

        let max_ring = self.ncells;
        for ring in 0..=max_ring {
            if best.len() == k {
                // every point in an unvisited cell (Chebyshev ring >= `ring`)
                // is at least (ring-1)*cell - clamp_off away from q
                let lower = (ring as f64 - 1.0) * self.cell - clamp_off;
                if lower > best[k - 1].0 {
                    break;
                }
            }
            let lo_x = cx as i64 - ring as i64;
            let hi_x = cx as i64 + ring as i64;
            let lo_y = cy as i64 - ring as i64;
            let hi_y = cy as i64 + ring as i64;
            for gy in lo_y..=hi_y {
                if gy < 0 || gy >= self.ncells as i64 {
                    continue;
                }
                for gx in lo_x..=hi_x {
                    if gx < 0 || gx >= self.ncells as i64 {
                        continue;
                    }
                    let on_ring = gx == lo_x || gx == hi_x || gy == lo_y || gy == hi_y;
                    if !on_ring {
                        continue;
                    }
                    for &idx in &self.buckets[gy as usize * self.ncells + gx as usize] {
                        let d = samples[idx as usize].0.distance(q);
                        push(d, idx, &mut best);
                    }
                }
            }
        }

        best.into_iter()
            .map(|(d, i)| Neighbor {
                location: samples[i as usize].0,
                gain_db: samples[i as usize].1,
                distance: d,
                index: i as usize,
            })
            .collect()
    }
}

/// Nearest-neighbor distance density for a PPP of density `lambda`:
/// `2 pi lambda x exp(-pi lambda x^2)`.
pub fn pdf_dmin_random(x: f64, lambda: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    2.0 * PI * lambda * x * (-PI * lambda * x * x).exp()
}

/// CDF companion of [`pdf_dmin_random`].
pub fn cdf_dmin_random(x: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - (-PI * lambda * x * x).exp()
}

/// Nearest-neighbor distance density for a grid of spacing `d`: a target
/// uniform in a cell sees `2 pi x / d^2` up to `d/2`, then the circle leaves
/// the cell and the density is `(4x/d^2)(pi/2 - 2 arccos(d/2x))` up to the
/// half-diagonal.
pub fn pdf_dmin_grid(x: f64, d: f64) -> f64 {
    if x < 0.0 || x > d * std::f64::consts::SQRT_2 / 2.0 {
        return 0.0;
    }
    if x <= d / 2.0 {
        2.0 * PI * x / (d * d)
    } else {
        4.0 * x / (d * d) * (PI / 2.0 - 2.0 * (d / (2.0 * x)).acos())
    }
}

/// CDF companion of [`pdf_dmin_grid`]: the circle/cell intersection area
/// over the cell area.
pub fn cdf_dmin_grid(x: f64, d: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= d * std::f64::consts::SQRT_2 / 2.0 {
        return 1.0;
    }
    let area = if x <= d / 2.0 {
        PI * x * x
    } else {
        let a = d / 2.0;
        PI * x * x - 4.0 * (x * x * (a / x).acos() - a * (x * x - a * a).sqrt())
    };
    area / (d * d)
}
