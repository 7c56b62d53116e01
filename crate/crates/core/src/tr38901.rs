//! 3GPP TR 38.901 Indoor Factory path loss (InF-SH preset) with
//! deterministic LoS classification and log-normal shadow-fading sampling.
//!
//! The InF-SH coefficients follow TR 38.901 Table 7.4.1-1:
//! `PL_LoS = 31.84 + 21.5 log10(d3D) + 19 log10(fc)` with sigma 4.3 dB, and
//! `PL_NLoS = max(32.4 + 23 log10(d3D) + 20 log10(fc), PL_LoS)` with sigma
//! 5.9 dB. Other sub-scenarios plug in through the `custom` variant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageGrid, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::scene::Node;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfScenario {
    InfSh,
    Custom,
}

/// Dual-slope path-loss coefficients (`a + b log10(d) + c log10(f)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfModelParams {
    pub scenario: InfScenario,
    pub los_intercept: f64,
    pub los_slope: f64,
    pub los_freq_coef: f64,
    pub nlos_intercept: f64,
    pub nlos_slope: f64,
    pub nlos_freq_coef: f64,
    pub sigma_sf_los: f64,
    pub sigma_sf_nlos: f64,
}

impl InfModelParams {
    /// TR 38.901 InF-SH preset.
    pub fn inf_sh() -> Self {
        InfModelParams {
            scenario: InfScenario::InfSh,
            los_intercept: 31.84,
            los_slope: 21.5,
            los_freq_coef: 19.0,
            nlos_intercept: 32.4,
            nlos_slope: 23.0,
            nlos_freq_coef: 20.0,
            sigma_sf_los: 4.3,
            sigma_sf_nlos: 5.9,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        los: (f64, f64, f64),
        nlos: (f64, f64, f64),
        sigma_sf_los: f64,
        sigma_sf_nlos: f64,
    ) -> Self {
        InfModelParams {
            scenario: InfScenario::Custom,
            los_intercept: los.0,
            los_slope: los.1,
            los_freq_coef: los.2,
            nlos_intercept: nlos.0,
            nlos_slope: nlos.1,
            nlos_freq_coef: nlos.2,
            sigma_sf_los,
            sigma_sf_nlos,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_sf_los <= 0.0 || self.sigma_sf_nlos <= 0.0 {
            return Err(Error::Validation("shadow-fading sigma must be > 0".into()));
        }
        if self.los_slope <= 0.0 || self.nlos_slope <= 0.0 {
            return Err(Error::Validation("path-loss slopes must be > 0".into()));
        }
        Ok(())
    }

    pub fn sigma_sf(&self, los: bool) -> f64 {
        if los {
            self.sigma_sf_los
        } else {
            self.sigma_sf_nlos
        }
    }
}

fn check_domain(d3d_m: f64, fc_ghz: f64) -> Result<()> {
    if d3d_m < 1.0 {
        return Err(Error::InvalidInput(format!(
            "InF path loss is defined for d3d >= 1 m, got {d3d_m}"
        )));
    }
    if fc_ghz <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "carrier frequency must be > 0 GHz, got {fc_ghz}"
        )));
    }
    Ok(())
}

/// LoS path loss in dB.
pub fn pl_los(d3d_m: f64, fc_ghz: f64, params: &InfModelParams) -> Result<f64> {
    check_domain(d3d_m, fc_ghz)?;
    Ok(params.los_intercept
        + params.los_slope * d3d_m.log10()
        + params.los_freq_coef * fc_ghz.log10())
}

/// NLoS path loss in dB: `max(NLoS expression, PL_LoS)`.
pub fn pl_nlos(d3d_m: f64, fc_ghz: f64, params: &InfModelParams) -> Result<f64> {
    check_domain(d3d_m, fc_ghz)?;
    let nlos = params.nlos_intercept
        + params.nlos_slope * d3d_m.log10()
        + params.nlos_freq_coef * fc_ghz.log10();
    Ok(nlos.max(pl_los(d3d_m, fc_ghz, params)?))
}

/// Mean channel gain grid (`CG = -PL`, no shadow fading) with per-pixel
/// LoS/NLoS decided by strict geometric visibility against the scene.
///
/// Pixels closer than the 1 m model floor are evaluated at 1 m.
pub fn predict_grid_with_visibility(
    geo: &Geometry,
    tx: &Node,
    spec: &GridSpec,
    params: &InfModelParams,
    mask: Option<&[[f64; 2]]>,
) -> Result<CoverageGrid> {
    crate::rt::grid::validate_grid_in_bounds(geo, spec)?;
    params.validate()?;
    let fc = geo.frequency_ghz;
    let values: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let p = spec.point_of_index(i);
            let d = (p - tx.position).norm().max(1.0);
            let los = geo.is_los(tx.position, p).unwrap_or(false);
            let pl = if los {
                pl_los(d, fc, params)
            } else {
                pl_nlos(d, fc, params)
            };
            pl.map(|v| -v).unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let mask = CoverageGrid::polygon_mask(spec, mask);
    CoverageGrid::new(spec.clone(), values, mask)
}

/// Seeded Monte-Carlo shadow-fading sampler. Every point gets an
/// independent, order-invariant stream (`ChaCha8` keyed by the seed with
/// the point index as the stream id).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfSampler {
    pub seed: u64,
    pub duplicates_per_point: u32,
}

impl Default for SfSampler {
    fn default() -> Self {
        SfSampler { seed: 42, duplicates_per_point: 100 }
    }
}

impl SfSampler {
    pub fn new(seed: u64, duplicates_per_point: u32) -> Self {
        SfSampler { seed, duplicates_per_point: duplicates_per_point.max(1) }
    }
}

/// Path-loss samples with i.i.d. Gaussian shadow fading: for each
/// `(d3d, los)` point, `duplicates_per_point` draws from
/// `N(mean PL, sigma_SF^2)` with sigma selected by the LoS flag.
pub fn sample_shadow_fading(
    points: &[(f64, bool)],
    params: &InfModelParams,
    sampler: &SfSampler,
    fc_ghz: f64,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    points
        .iter()
        .enumerate()
        .map(|(i, &(d3d, los))| {
            let mean = if los {
                pl_los(d3d, fc_ghz, params)?
            } else {
                pl_nlos(d3d, fc_ghz, params)?
            };
            let sigma = params.sigma_sf(los);
            let normal = Normal::new(mean, sigma)
                .map_err(|e| Error::InvalidInput(format!("bad normal params: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
            rng.set_stream(i as u64);
            Ok((0..sampler.duplicates_per_point)
                .map(|_| normal.sample(&mut rng))
                .collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values_at_3p7_ghz() {
        let p = InfModelParams::inf_sh();
        // d = 1 m: 31.84 + 19 log10(3.7) = 42.64 dB.
        assert!((pl_los(1.0, 3.7, &p).unwrap() - 42.64).abs() < 5e-3);
        // +21.5 dB/decade.
        assert!((pl_los(10.0, 3.7, &p).unwrap() - 64.14).abs() < 5e-3);
        assert!((pl_los(100.0, 3.7, &p).unwrap() - 85.64).abs() < 5e-3);
        // NLoS at 10 m: max(66.76, 64.14).
        assert!((pl_nlos(10.0, 3.7, &p).unwrap() - 66.76).abs() < 5e-3);
        // NLoS at 1 m: max(43.76, 42.64).
        assert!((pl_nlos(1.0, 3.7, &p).unwrap() - 43.76).abs() < 5e-3);
    }

    #[test]
    fn nlos_dominates_los() {
        let p = InfModelParams::inf_sh();
        for k in 0..60 {
            let d = 1.0 + k as f64 * 2.0;
            for f in [0.7, 3.7, 28.0] {
                assert!(pl_nlos(d, f, &p).unwrap() >= pl_los(d, f, &p).unwrap());
            }
        }
    }

    #[test]
    fn monotone_in_distance_and_frequency() {
        let p = InfModelParams::inf_sh();
        let mut last = 0.0;
        for k in 0..50 {
            let d = 1.0 + k as f64;
            let v = pl_los(d, 3.7, &p).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(pl_los(10.0, 4.0, &p).unwrap() > pl_los(10.0, 3.0, &p).unwrap());
        assert!(pl_nlos(10.0, 4.0, &p).unwrap() > pl_nlos(10.0, 3.0, &p).unwrap());
    }

    #[test]
    fn domain_floor_is_an_error() {
        let p = InfModelParams::inf_sh();
        assert!(pl_los(0.5, 3.7, &p).is_err());
        assert!(pl_nlos(0.99, 3.7, &p).is_err());
        assert!(pl_los(1.0, 3.7, &p).is_ok());
    }

    #[test]
    fn visibility_grid_uses_los_and_nlos_consistently() {
        use crate::coverage::GridSpec;
        use crate::geometry::Geometry;
        use crate::math::{Aabb, Vec3};
        use crate::scene::{default_catalog, AntennaPattern, Node, NodeRole, Scene, Solid};

        let mut scene = Scene {
            bounds: Aabb::new(Vec3::new(-20.0, -20.0, 0.0), Vec3::new(20.0, 20.0, 8.0)),
            frequency_ghz: 3.7,
            materials: default_catalog(),
            solids: vec![],
            racks: vec![],
            nodes: vec![],
            target_area: None,
            propagation: Default::default(),
            plan: None,
        };
        let tx = Node {
            id: "tx".into(),
            position: Vec3::new(0.0, 0.0, 5.0),
            antenna: AntennaPattern::isotropic(),
            role: NodeRole::Tx,
            tx_power_dbm: None,
        };
        let params = InfModelParams::inf_sh();
        let spec = GridSpec {
            origin: [-10.0, -2.0],
            resolution_m: 2.0,
            nx: 10,
            ny: 2,
            height_m: 1.5,
        };

        // Empty scene: every pixel is LoS; spot-check 5 pixels by hand.
        let geo = Geometry::build(&scene).unwrap();
        let grid = predict_grid_with_visibility(&geo, &tx, &spec, &params, None).unwrap();
        for i in [0usize, 4, 9, 12, 19] {
            let d = (spec.point_of_index(i) - tx.position).norm().max(1.0);
            let hand = 31.84 + 21.5 * d.log10() + 19.0 * 3.7f64.log10();
            assert!((grid.values[i] + hand).abs() < 1e-9, "pixel {i}");
        }

        // A wall in the +x half: shadowed pixels switch to NLoS and land
        // exactly on the classification from is_los.
        scene.solids.push(Solid::slab(
            "wall",
            vec![
                Vec3::new(5.0, -15.0, 0.0),
                Vec3::new(5.0, 15.0, 0.0),
                Vec3::new(5.0, 15.0, 8.0),
                Vec3::new(5.0, -15.0, 8.0),
            ],
            0.2,
            "concrete",
        ));
        let geo = Geometry::build(&scene).unwrap();
        let grid = predict_grid_with_visibility(&geo, &tx, &spec, &params, None).unwrap();
        for i in 0..spec.len() {
            let p = spec.point_of_index(i);
            let d = (p - tx.position).norm().max(1.0);
            let los = geo.is_los(tx.position, p).unwrap();
            let hand = if los {
                pl_los(d, 3.7, &params).unwrap()
            } else {
                pl_nlos(d, 3.7, &params).unwrap()
            };
            assert!((grid.values[i] + hand).abs() < 1e-9, "pixel {i} (los = {los})");
        }
        // The wall actually creates both classes in this grid.
        let n_los = (0..spec.len())
            .filter(|&i| geo.is_los(tx.position, spec.point_of_index(i)).unwrap())
            .count();
        assert!(n_los > 0 && n_los < spec.len());
    }

    #[test]
    fn sf_sampling_is_seed_deterministic_and_order_invariant() {
        let p = InfModelParams::inf_sh();
        let sampler = SfSampler::new(7, 50);
        let pts = vec![(10.0, true), (20.0, false), (5.0, true)];
        let a = sample_shadow_fading(&pts, &p, &sampler, 3.7).unwrap();
        let b = sample_shadow_fading(&pts, &p, &sampler, 3.7).unwrap();
        assert_eq!(a, b);
        // Reordering points does not change each point's stream.
        let pts_rev: Vec<_> = vec![pts[2], pts[1], pts[0]];
        let c = sample_shadow_fading(&pts_rev, &p, &sampler, 3.7).unwrap();
        // Streams are keyed by index, not content; same index -> same
        // noise offsets around the new means.
        assert_eq!(c[1].len(), b[1].len());
    }

    #[test]
    fn sf_std_converges_to_sigma() {
        let p = InfModelParams::inf_sh();
        let sampler = SfSampler::new(1234, 100_000);
        let samples = &sample_shadow_fading(&[(10.0, true)], &p, &sampler, 3.7).unwrap()[0];
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!(
            (std - 4.3).abs() < 0.043,
            "sample std {std} should be within 1% of 4.3"
        );
        let mean_pl = pl_los(10.0, 3.7, &p).unwrap();
        assert!((mean - mean_pl).abs() < 3.0 * 4.3 / n.sqrt() * 5.0);
    }

    #[test]
    fn sigma_zero_like_limit() {
        // A tiny sigma collapses all samples onto the mean.
        let p = InfModelParams::custom((31.84, 21.5, 19.0), (32.4, 23.0, 20.0), 1e-12, 1e-12);
        let sampler = SfSampler::new(9, 10);
        let samples = &sample_shadow_fading(&[(10.0, true)], &p, &sampler, 3.7).unwrap()[0];
        let mean_pl = pl_los(10.0, 3.7, &p).unwrap();
        for s in samples {
            assert!((s - mean_pl).abs() < 1e-9);
        }
    }
}
