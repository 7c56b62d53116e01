//! Scenario-level model settings: propagation backend and planning defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rt::{RtConfig, TuningParams};
use crate::scene::AntennaPattern;
use crate::tr38901::InfModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationModelKind {
    #[default]
    Rt,
    InfSh,
    Custom,
}

/// `propagation` section of the scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PropagationSection {
    #[serde(default)]
    pub model: PropagationModelKind,
    /// Ray-tracing settings; frequency is taken from the scene.
    #[serde(default)]
    pub rt: RtSettings,
    /// Calibration correction applied to RT predictions.
    #[serde(default)]
    pub tuning: TuningParams,
    /// Path-loss coefficients for `model = "custom"`; `inf-sh` uses the
    /// standard preset.
    #[serde(default)]
    pub inf: Option<InfModelParams>,
}

impl PropagationSection {
    pub fn validate(&self) -> Result<()> {
        if let Some(inf) = &self.inf {
            inf.validate()?;
        }
        self.rt.validate()
    }

    /// Full RT config for a scene carrier frequency.
    pub fn rt_config(&self, frequency_ghz: f64) -> RtConfig {
        self.rt.to_config(frequency_ghz)
    }

    /// InF parameters: explicit `custom` coefficients or the InF-SH preset.
    pub fn inf_params(&self) -> InfModelParams {
        self.inf.clone().unwrap_or_else(InfModelParams::inf_sh)
    }
}

/// RT engine knobs as stored in scenario files (see [`RtConfig`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSettings {
    #[serde(default = "default_max_reflections")]
    pub max_reflections: u32,
    #[serde(default = "default_max_diffractions")]
    pub max_diffractions: u32,
    #[serde(default = "default_launch_count")]
    pub launch_count: u32,
    #[serde(default = "default_alpha")]
    pub reception_sphere_alpha: f64,
    #[serde(default = "default_diffraction_candidates")]
    pub diffraction_candidates: u32,
    #[serde(default = "default_mixed_candidates")]
    pub mixed_diffraction_candidates: u32,
}

fn default_max_reflections() -> u32 {
    2
}
fn default_max_diffractions() -> u32 {
    1
}
fn default_launch_count() -> u32 {
    100_000
}
fn default_alpha() -> f64 {
    1.0
}
fn default_diffraction_candidates() -> u32 {
    24
}
fn default_mixed_candidates() -> u32 {
    8
}

impl Default for RtSettings {
    fn default() -> Self {
        RtSettings {
            max_reflections: default_max_reflections(),
            max_diffractions: default_max_diffractions(),
            launch_count: default_launch_count(),
            reception_sphere_alpha: default_alpha(),
            diffraction_candidates: default_diffraction_candidates(),
            mixed_diffraction_candidates: default_mixed_candidates(),
        }
    }
}

impl RtSettings {
    fn to_config(&self, frequency_ghz: f64) -> RtConfig {
        RtConfig {
            max_reflections: self.max_reflections,
            max_diffractions: self.max_diffractions,
            launch_count: self.launch_count,
            reception_sphere_alpha: self.reception_sphere_alpha,
            frequency_ghz,
            diffraction_candidates: self.diffraction_candidates,
            mixed_diffraction_candidates: self.mixed_diffraction_candidates,
        }
    }

    fn validate(&self) -> Result<()> {
        // Delegate to RtConfig's checks with a placeholder frequency.
        self.to_config(1.0).validate()
    }
}

/// `plan` section of the scenario file: radio-planning defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSection {
    #[serde(default = "default_threshold")]
    pub rsrp_threshold_dbm: f64,
    #[serde(default = "default_target")]
    pub coverage_target: f64,
    #[serde(default = "default_confidence")]
    pub confidence_level: f64,
    /// Standard deviation of the propagation-model error, dB (drives the
    /// confidence margin).
    #[serde(default)]
    pub model_std_dev_db: f64,
    #[serde(default = "default_rx_height")]
    pub rx_height_m: f64,
    #[serde(default = "default_grid_res")]
    pub grid_resolution_m: f64,
    #[serde(default = "default_rx_antenna")]
    pub rx_antenna: AntennaPattern,
    #[serde(default = "default_total_tx_power")]
    pub total_tx_power_dbm: f64,
    #[serde(default = "default_n_prb")]
    pub n_prb: u32,
    #[serde(default = "default_scs")]
    pub scs_khz: u32,
    /// Rack occupancy forced for planning runs (worst case).
    #[serde(default = "default_plan_occupancy")]
    pub rack_occupancy: f64,
}

fn default_threshold() -> f64 {
    -100.0
}
fn default_target() -> f64 {
    0.95
}
fn default_confidence() -> f64 {
    0.95
}
fn default_rx_height() -> f64 {
    1.5
}
fn default_grid_res() -> f64 {
    0.5
}
fn default_rx_antenna() -> AntennaPattern {
    AntennaPattern::half_wave_dipole()
}
fn default_total_tx_power() -> f64 {
    30.0
}
fn default_n_prb() -> u32 {
    152
}
fn default_scs() -> u32 {
    30
}
fn default_plan_occupancy() -> f64 {
    1.0
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection {
            rsrp_threshold_dbm: default_threshold(),
            coverage_target: default_target(),
            confidence_level: default_confidence(),
            model_std_dev_db: 0.0,
            rx_height_m: default_rx_height(),
            grid_resolution_m: default_grid_res(),
            rx_antenna: default_rx_antenna(),
            total_tx_power_dbm: default_total_tx_power(),
            n_prb: default_n_prb(),
            scs_khz: default_scs(),
            rack_occupancy: default_plan_occupancy(),
        }
    }
}

impl PlanSection {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.coverage_target && self.coverage_target < 1.0) {
            return Err(Error::Validation(format!(
                "coverage_target must be in (0, 1), got {}",
                self.coverage_target
            )));
        }
        if !(0.5 < self.confidence_level && self.confidence_level < 1.0) {
            return Err(Error::Validation(format!(
                "confidence_level must be in (0.5, 1), got {}",
                self.confidence_level
            )));
        }
        if !self.rsrp_threshold_dbm.is_finite() {
            return Err(Error::Validation("rsrp threshold must be finite".into()));
        }
        if self.grid_resolution_m <= 0.0 {
            return Err(Error::Validation("grid resolution must be > 0".into()));
        }
        Ok(())
    }
}
