//! Ground-truth channel gain fields.
//!
//! A gain in dB at location `q` decomposes as log-distance path loss from the
//! base station at the origin, plus zero-mean Gaussian shadowing with
//! exponential spatial correlation `alpha * exp(-h / beta)`, plus spatially
//! white multipath noise of variance `sigma2`. Synthesis draws the shadowing
//! vector jointly over all requested locations from one covariance
//! factorization, so sample/target cross-correlations are exact.

use crate::error::{Error, Result};
use crate::math::cholesky_with_jitter;
use crate::rng::StreamSeed;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// The five channel model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path loss exponent.
    pub n_pl: f64,
    /// Path loss intercept in dB.
    pub k_db: f64,
    /// Shadowing variance in dB^2.
    pub alpha: f64,
    /// Shadowing correlation distance in meters.
    pub beta: f64,
    /// Multipath variance in dB^2.
    pub sigma2: f64,
}

impl Default for ChannelParams {
    /// The urban macro defaults used throughout the experiments:
    /// `n_pl = 2.2`, `K_dB = -80`, `alpha = 8`, `beta = 30 m`, `sigma2 = 2`.
    fn default() -> Self {
        Self {
            n_pl: 2.2,
            k_db: -80.0,
            alpha: 8.0,
            beta: 30.0,
            sigma2: 2.0,
        }
    }
}

impl ChannelParams {
    pub fn new(n_pl: f64, k_db: f64, alpha: f64, beta: f64, sigma2: f64) -> Result<Self> {
        let p = Self {
            n_pl,
            k_db,
            alpha,
            beta,
            sigma2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_pl.is_finite() || self.n_pl < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "path loss exponent must be >= 0, got {}",
                self.n_pl
            )));
        }
        if !self.k_db.is_finite() {
            return Err(Error::InvalidParameter("k_db must be finite".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "shadowing variance must be >= 0, got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "correlation distance must be > 0, got {}",
                self.beta
            )));
        }
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "multipath variance must be >= 0, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    /// Shadowing correlation at pair distance `h`: `alpha * exp(-h / beta)`.
    pub fn correlation(&self, h: f64) -> f64 {
        self.alpha * (-h / self.beta).exp()
    }

    /// Deterministic path loss `K_dB - 10 n_PL log10(|q|)`.
    pub fn pathloss_db(&self, q: Location) -> Result<f64> {
        let r = q.range();
        if r <= 0.0 {
            return Err(Error::OriginQuery);
        }
        Ok(self.k_db - 10.0 * self.n_pl * r.log10())
    }
}

/// A planar location in meters; the base station sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Distance to the base station.
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One jointly drawn realization of the field over a fixed location set.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    pub locations: Vec<Location>,
    /// Per-location shadowing v(q) in dB.
    pub shadowing: Vec<f64>,
    /// Per-location multipath w(q) in dB.
    pub multipath: Vec<f64>,
    /// Per-location gain: path loss + shadowing + multipath, exactly.
    pub gains_db: Vec<f64>,
    pub seed: StreamSeed,
}

/// Draw the field jointly over `locations`.
///
/// The shadowing vector comes from one symmetric positive-definite
/// factorization of the full correlation matrix; coincident points are
/// tolerated via the diagonal jitter ladder. Identical `(locations, params,
/// seed)` produce bit-identical output.
pub fn synthesize_field(
    locations: &[Location],
    params: &ChannelParams,
    seed: StreamSeed,
) -> Result<FieldRealization> {
    params.validate()?;
    let n = locations.len();
    let mut pathloss = Vec::with_capacity(n);
    for &q in locations {
        pathloss.push(params.pathloss_db(q)?);
    }

    let mut rng = seed.rng();
    let shadowing = if params.alpha == 0.0 {
        vec![0.0; n]
    } else {
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = params.correlation(locations[i].distance(locations[j]));
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        let chol = cholesky_with_jitter(&cov)?;
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (chol.l() * z).iter().copied().collect()
    };

    let multipath: Vec<f64> = if params.sigma2 == 0.0 {
        vec![0.0; n]
    } else {
        let sd = params.sigma2.sqrt();
        (0..n)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };

    let gains_db = (0..n)
        .map(|i| pathloss[i] + shadowing[i] + multipath[i])
        .collect();

    Ok(FieldRealization {
        locations: locations.to_vec(),
        shadowing,
        multipath,
        gains_db,
        seed,
    })
}
