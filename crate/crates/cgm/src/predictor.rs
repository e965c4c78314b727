//! MMSE spatial prediction of channel gain from stored samples.
//!
//! The shadowing at a query point is the linear MMSE estimate from the `k`
//! nearest samples: with `phi` the query/neighbor correlations, `R` the
//! neighbor correlation matrix, and `s` the neighbors' gains minus their
//! path loss, the estimate is `phi^T (R + sigma2 I)^{-1} s` and its model
//! MSE is `alpha + sigma2 - phi^T (R + sigma2 I)^{-1} phi`. The system is
//! solved by Cholesky, never by explicit inversion.

use crate::error::Result;
use crate::estimation::EstimatedParams;
use crate::field::{ChannelParams, Location};
use crate::math::cholesky_with_jitter;
use crate::sampling::{GainMap, Neighbor};
use nalgebra::{DMatrix, DVector};

/// A predicted gain with its model MSE.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub gain_db: f64,
    /// Model MSE of the prediction in dB^2.
    pub mse_db2: f64,
    /// Number of neighbors that actually entered the estimate.
    pub k_used: usize,
    pub neighbor_distances: Vec<f64>,
}

/// Predict the gain at `q` from the `k` nearest samples of `map`.
pub fn predict(
    map: &GainMap,
    q: Location,
    k: usize,
    params: &ChannelParams,
) -> Result<Prediction> {
    let neighbors = map.knn(q, k)?;
    predict_from_neighbors(q, &neighbors, params)
}

/// Same as [`predict`] but with the neighbor set already fetched (callers
/// sweeping `k` reuse one descending-sorted fetch; prefixes are the nested
/// neighbor sets).
pub fn predict_from_neighbors(
    q: Location,
    neighbors: &[Neighbor],
    params: &ChannelParams,
) -> Result<Prediction> {
    params.validate()?;
    let pathloss = params.pathloss_db(q)?;

    // no shadowing to estimate: the weights vanish identically
    if params.alpha == 0.0 || neighbors.is_empty() {
        return Ok(Prediction {
            gain_db: pathloss,
            mse_db2: params.sigma2 + params.alpha,
            k_used: 0,
            neighbor_distances: Vec::new(),
        });
    }

    let k = neighbors.len();
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let c = params.correlation(neighbors[i].location.distance(neighbors[j].location));
            a[(i, j)] = c;
            a[(j, i)] = c;
        }
        a[(i, i)] += params.sigma2;
    }
    let phi = DVector::from_iterator(k, neighbors.iter().map(|n| params.correlation(n.distance)));
    let mut residuals = DVector::zeros(k);
    for (i, n) in neighbors.iter().enumerate() {
        residuals[i] = n.gain_db - params.pathloss_db(n.location)?;
    }

    let chol = cholesky_with_jitter(&a)?;
    let weights = chol.solve(&phi);
    let v_hat = weights.dot(&residuals);
    let mse = (params.alpha + params.sigma2 - weights.dot(&phi)).max(0.0);

    Ok(Prediction {
        gain_db: pathloss + v_hat,
        mse_db2: mse,
        k_used: k,
        neighbor_distances: neighbors.iter().map(|n| n.distance).collect(),
    })
}

/// Model MSE of the single-neighbor estimate at neighbor distance `d_min`:
/// `alpha + sigma2 - alpha^2/(alpha + sigma2) * exp(-2 d_min / beta)`.
pub fn k1_mse_closed_form(d_min: f64, params: &ChannelParams) -> f64 {
    params.alpha + params.sigma2
        - params.alpha * params.alpha / (params.alpha + params.sigma2)
            * (-2.0 * d_min / params.beta).exp()
}

/// Path-loss-only prediction from LS-estimated parameters.
///
/// The MSE accounts for the estimation error covariance: with
/// `u = 10 log10 |q|`, it is
/// `alpha + sigma2 + var(K) + u^2 var(n) - u (C(2,1) + C(1,2))`.
pub fn predict_pathloss_only(q: Location, est: &EstimatedParams) -> Result<Prediction> {
    let r = q.range();
    if r <= 0.0 {
        return Err(crate::error::Error::OriginQuery);
    }
    let u = 10.0 * r.log10();
    let gain = est.k_db_hat - est.n_pl_hat * u;
    let c = &est.c_ls;
    let mse = est.alpha_hat + est.sigma2_hat + c[(0, 0)] + u * u * c[(1, 1)]
        - u * (c[(0, 1)] + c[(1, 0)]);
    Ok(Prediction {
        gain_db: gain,
        mse_db2: mse,
        k_used: 0,
        neighbor_distances: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::synthesize_field;
    use crate::rng::StreamSeed;
    use crate::sampling::{draw_locations, Layout};
    use nalgebra::Matrix2;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn defaults() -> ChannelParams {
        ChannelParams::default()
    }

    fn map_from_field(layout: Layout, seed: StreamSeed, params: &ChannelParams) -> GainMap {
        let mut rng = seed.rng();
        let pts = draw_locations(&layout, &mut rng).unwrap();
        let field = synthesize_field(&pts, params, StreamSeed::new(seed.master, seed.stream + 1))
            .unwrap();
        let samples = pts.into_iter().zip(field.gains_db).collect();
        GainMap::new(layout, samples).unwrap()
    }

    #[test]
    fn coincident_sample_with_no_noise_is_exact() {
        let params = ChannelParams::new(2.2, -80.0, 8.0, 30.0, 0.0).unwrap();
        let layout = Layout::random(1e-3, 300.0).unwrap();
        let map = map_from_field(layout, StreamSeed::new(21, 0), &params);
        let (q, g) = map.samples()[2];
        let p = predict(&map, q, 1, &params).unwrap();
        assert!((p.gain_db - g).abs() < 1e-9);
        assert!(p.mse_db2 < 1e-9);
    }

    #[test]
    fn zero_shadowing_degrades_to_pathloss() {
        let params = ChannelParams::new(2.2, -80.0, 0.0, 30.0, 2.0).unwrap();
        let layout = Layout::random(1e-3, 300.0).unwrap();
        let map = map_from_field(layout, StreamSeed::new(22, 0), &params);
        let q = Location::new(150.0, 140.0);
        let p = predict(&map, q, 3, &params).unwrap();
        assert_eq!(p.gain_db, params.pathloss_db(q).unwrap());
        assert_eq!(p.mse_db2, 2.0);
        assert_eq!(p.k_used, 0);
    }

    #[test]
    fn k1_matches_the_closed_form_to_1e12() {
        let params = defaults();
        let layout = Layout::random(8e-4, 300.0).unwrap();
        let map = map_from_field(layout, StreamSeed::new(23, 0), &params);
        for (i, &q) in [
            Location::new(77.0, 140.0),
            Location::new(200.0, 83.0),
            Location::new(151.0, 151.0),
        ]
        .iter()
        .enumerate()
        {
            let p = predict(&map, q, 1, &params).unwrap();
            let want = k1_mse_closed_form(p.neighbor_distances[0], &params);
            assert!(
                (p.mse_db2 - want).abs() < 1e-12,
                "case {i}: {} vs {want}",
                p.mse_db2
            );
        }
        // hand value at d_min = 30: 10 - 6.4 e^{-2}
        assert!((k1_mse_closed_form(30.0, &params) - 9.1338541872856787719).abs() < 1e-13);
    }

    #[test]
    fn mse_tends_to_the_dense_limit_as_distances_vanish() {
        // all k neighbors collapsing onto the target: alpha + sigma2 - k a^2/(k a + s2)
        let params = defaults();
        let layout = Layout::grid(10.0, 100.0).unwrap();
        let q = Location::new(55.0, 55.0);
        for k in [1usize, 2, 4] {
            let eps = 1e-4;
            let samples: Vec<(Location, f64)> = (0..k)
                .map(|i| (Location::new(q.x + eps * (i as f64 + 1.0), q.y), -100.0))
                .collect();
            let map = GainMap::new(layout, samples).unwrap();
            let p = predict(&map, q, k, &params).unwrap();
            let ka = k as f64 * params.alpha;
            let want = params.alpha + params.sigma2 - k as f64 * params.alpha * params.alpha
                / (ka + params.sigma2);
            assert!(
                (p.mse_db2 - want).abs() < 1e-2,
                "k={k}: {} vs {want}",
                p.mse_db2
            );
        }
    }

    #[test]
    fn empirical_mse_matches_model_mse() {
        // fixed geometry, many field realizations
        let params = defaults();
        let layout = Layout::random(2e-3, 300.0).unwrap();
        let mut rng = StreamSeed::new(31, 0).rng();
        let pts = draw_locations(&layout, &mut rng).unwrap();
        let q = Location::new(150.0, 150.0);
        let all: Vec<Location> = pts.iter().copied().chain(std::iter::once(q)).collect();
        let n_real = 10_000;
        let mut model_mse = 0.0;
        let mut sq = 0.0;
        for t in 0..n_real {
            let f = synthesize_field(&all, &params, StreamSeed::new(32, t)).unwrap();
            let samples: Vec<(Location, f64)> = pts
                .iter()
                .copied()
                .zip(f.gains_db.iter().copied())
                .collect();
            let map = GainMap::new(layout, samples).unwrap();
            let p = predict(&map, q, 4, &params).unwrap();
            let truth = f.gains_db[all.len() - 1];
            sq += (truth - p.gain_db) * (truth - p.gain_db);
            model_mse = p.mse_db2; // geometry fixed, same every realization
        }
        let emp = sq / n_real as f64;
        assert!(
            (emp - model_mse).abs() / model_mse < 0.03,
            "empirical {emp} vs model {model_mse}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn mse_is_non_increasing_in_k(seed in 0u64..5_000, qx in 60.0f64..240.0, qy in 60.0f64..240.0) {
            let params = defaults();
            let layout = Layout::random(1e-3, 300.0).unwrap();
            let map = map_from_field(layout, StreamSeed::new(seed, 0), &params);
            let kmax = 8usize.min(map.len());
            let neighbors = map.knn(Location::new(qx, qy), kmax).unwrap();
            let mut last = f64::INFINITY;
            for k in 1..=kmax {
                let p = predict_from_neighbors(Location::new(qx, qy), &neighbors[..k], &params).unwrap();
                prop_assert!(p.mse_db2 <= last + 1e-9, "k={} mse {} > {}", k, p.mse_db2, last);
                prop_assert!(p.mse_db2 > 0.0 && p.mse_db2 <= params.alpha + params.sigma2 + 1e-12);
                last = p.mse_db2;
            }
        }
    }

    #[test]
    fn pathloss_only_special_values() {
        let params = defaults();
        let mut est = EstimatedParams::exact(&params);
        // perfect parameters: mse is alpha + sigma2
        let p = predict_pathloss_only(Location::new(60.0, 80.0), &est).unwrap();
        assert_eq!(p.mse_db2, 10.0);
        assert!((p.gain_db - params.pathloss_db(Location::new(60.0, 80.0)).unwrap()).abs() < 1e-12);
        // at range 1 only the intercept variance survives
        est.c_ls = Matrix2::new(3.0, 0.7, 0.7, 0.2);
        let p = predict_pathloss_only(Location::new(1.0, 0.0), &est).unwrap();
        assert!((p.mse_db2 - 13.0).abs() < 1e-12);
    }

    #[test]
    fn pathloss_only_mse_matches_parameter_error_monte_carlo() {
        // draw (dK, dn) from C_LS, brute-force the expected squared error
        let params = defaults();
        let mut est = EstimatedParams::exact(&params);
        let c = Matrix2::new(2.0, 0.45, 0.45, 0.15);
        est.c_ls = c;
        let q = Location::new(100.0, 0.0);
        let u = 10.0 * q.range().log10();
        // 2x2 Cholesky of c
        let l11 = c[(0, 0)].sqrt();
        let l21 = c[(1, 0)] / l11;
        let l22 = (c[(1, 1)] - l21 * l21).sqrt();
        let mut rng = StreamSeed::new(99, 0).rng();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let dk = l11 * z1;
            let dn = l21 * z1 + l22 * z2;
            let v: f64 = rng.sample::<f64, _>(StandardNormal) * params.alpha.sqrt();
            let w: f64 = rng.sample::<f64, _>(StandardNormal) * params.sigma2.sqrt();
            let err = dk - dn * u - v - w;
            acc += err * err;
        }
        let emp = acc / n as f64;
        let p = predict_pathloss_only(q, &est).unwrap();
        assert!(
            (emp - p.mse_db2).abs() / p.mse_db2 < 0.02,
            "empirical {emp} vs formula {}",
            p.mse_db2
        );
    }
}
