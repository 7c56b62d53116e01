//! Ray-tracing engine: shooting-and-bouncing launcher, per-path physics,
//! power aggregation, and the (A, B) tuning correction.

mod fresnel;
pub(crate) mod grid;
mod trace;
mod utd;

pub use fresnel::{fresnel_reflection, fresnel_reflection_eps, reflection_loss_db, Polarization};
pub use grid::predict_grid;
pub use trace::{trace_paths, trace_to_points};
pub use utd::{
    diffraction_point, fresnel_integrals, transition_function, utd_diffraction,
    DiffractionCoefficient, EDGE_SEARCH_TOL_M, KELLER_CONE_TOL_RAD,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{db_to_lin, fspl_db, lin_to_db, Vec3};
use crate::scene::AntennaPattern;

/// Ray-launcher configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtConfig {
    /// Maximum reflections per path (0..=4).
    pub max_reflections: u32,
    /// Maximum diffractions per path (0 or 1).
    pub max_diffractions: u32,
    /// Number of launched ray directions (Fibonacci sphere).
    pub launch_count: u32,
    /// Reception-sphere scale: radius = alpha * d * sqrt(4 pi / launch_count).
    pub reception_sphere_alpha: f64,
    pub frequency_ghz: f64,
    /// Wedges tried per receiver for single-diffraction paths (closest
    /// detours first).
    pub diffraction_candidates: u32,
    /// Wedges tried when combining reflections with a diffraction.
    pub mixed_diffraction_candidates: u32,
}

impl RtConfig {
    pub fn new(frequency_ghz: f64) -> Self {
        RtConfig {
            max_reflections: 2,
            max_diffractions: 1,
            launch_count: 100_000,
            reception_sphere_alpha: 1.0,
            frequency_ghz,
            diffraction_candidates: 24,
            mixed_diffraction_candidates: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_reflections > 4 {
            return Err(Error::Validation(format!(
                "max_reflections must be <= 4, got {}",
                self.max_reflections
            )));
        }
        if self.max_diffractions > 1 {
            return Err(Error::Validation(format!(
                "max_diffractions must be 0 or 1, got {}",
                self.max_diffractions
            )));
        }
        if self.launch_count < 100 {
            return Err(Error::Validation(format!(
                "launch_count must be >= 100, got {}",
                self.launch_count
            )));
        }
        if self.frequency_ghz <= 0.0 {
            return Err(Error::Validation(format!(
                "frequency must be > 0 GHz, got {}",
                self.frequency_ghz
            )));
        }
        if self.reception_sphere_alpha <= 0.0 {
            return Err(Error::Validation("reception_sphere_alpha must be > 0".into()));
        }
        Ok(())
    }
}

/// Calibration pair: `A` corrects the 1 m free-space loss, `B` the
/// dB/decade distance slope. `(0, 20)` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    #[serde(default)]
    pub a_db: f64,
    #[serde(default = "default_b")]
    pub b_db_per_decade: f64,
}

fn default_b() -> f64 {
    20.0
}

impl Default for TuningParams {
    fn default() -> Self {
        TuningParams::identity()
    }
}

impl TuningParams {
    pub fn identity() -> Self {
        TuningParams { a_db: 0.0, b_db_per_decade: 20.0 }
    }

    pub fn new(a_db: f64, b_db_per_decade: f64) -> Self {
        TuningParams { a_db, b_db_per_decade }
    }

    pub fn is_identity(&self) -> bool {
        self.a_db == 0.0 && self.b_db_per_decade == 20.0
    }
}

/// `tuned = untuned - A - (B - 20) log10(d3d)`. Applies equally to RxP
/// (dBm) and channel gain (dB); `d3d` is the straight-line Tx-Rx distance.
pub fn apply_tuning(untuned_db: f64, d3d_m: f64, tuning: &TuningParams) -> Result<f64> {
    if d3d_m <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tuning requires d3d > 0, got {d3d_m}"
        )));
    }
    Ok(untuned_db - tuning.a_db - (tuning.b_db_per_decade - 20.0) * d3d_m.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionKind {
    Reflection,
    Diffraction,
    Transmission,
}

/// One ray/environment interaction along a path.
#[derive(Debug, Clone, Serialize)]
pub struct Interaction {
    pub kind: InteractionKind,
    /// Facet id for reflections/transmissions, wedge index for diffractions.
    pub target: u32,
    pub point: Vec3,
    /// Field loss in dB (>= 0 for reflection/transmission; diffraction
    /// stores the loss relative to free space over the unfolded length).
    pub loss_db: f64,
}

/// One propagation path between a Tx and an Rx, antennas excluded.
#[derive(Debug, Clone, Serialize)]
pub struct PropagationPath {
    pub interactions: Vec<Interaction>,
    /// Total unfolded geometric length, meters.
    pub length_m: f64,
    /// Unit direction the ray leaves the Tx.
    pub departure: Vec3,
    /// Unit direction from the Rx toward the incoming ray (for antenna
    /// gain evaluation at the receiver).
    pub arrival: Vec3,
    /// Path gain in dB: `-FSPL(length) - sum(interaction losses)`.
    pub gain_db: f64,
}

impl PropagationPath {
    /// Number of reflection/diffraction interactions (transmissions do not
    /// count against the interaction budget).
    pub fn specular_order(&self) -> usize {
        self.interactions
            .iter()
            .filter(|i| i.kind != InteractionKind::Transmission)
            .count()
    }

    /// Interaction signature used for ordering and deduplication.
    pub fn signature(&self) -> Vec<(InteractionKind, u32)> {
        self.interactions
            .iter()
            .filter(|i| i.kind != InteractionKind::Transmission)
            .map(|i| (i.kind, i.target))
            .collect()
    }
}

/// `-FSPL(length) - sum(interaction losses)` in dB.
pub fn path_gain(path: &PropagationPath, freq_ghz: f64) -> f64 {
    let losses: f64 = path.interactions.iter().map(|i| i.loss_db).sum();
    -fspl_db(path.length_m, freq_ghz) - losses
}

/// Incoherent (linear-power) sum of per-path received powers, dBm.
/// Each path contributes `tx_power + G_tx(departure) + gain + G_rx(arrival)`.
/// An empty path list yields `-inf` (no coverage).
pub fn aggregate_rx_power(
    paths: &[PropagationPath],
    tx_antenna: &AntennaPattern,
    rx_antenna: &AntennaPattern,
    tx_power_dbm: f64,
) -> Result<f64> {
    let mut lin = 0.0;
    for p in paths {
        let g_tx = tx_antenna.gain_dbi(p.departure)?;
        let g_rx = rx_antenna.gain_dbi(p.arrival)?;
        lin += db_to_lin(tx_power_dbm + g_tx + p.gain_db + g_rx);
    }
    if lin == 0.0 {
        Ok(f64::NEG_INFINITY)
    } else {
        Ok(lin_to_db(lin))
    }
}

/// Incoherent sum of path gains only (no antennas, no tx power): the
/// channel gain in dB. Empty list yields `-inf`.
pub fn aggregate_channel_gain(paths: &[PropagationPath]) -> f64 {
    let lin: f64 = paths.iter().map(|p| db_to_lin(p.gain_db)).sum();
    if lin == 0.0 {
        f64::NEG_INFINITY
    } else {
        lin_to_db(lin)
    }
}
