//! Parametric antenna patterns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Horizontal pattern class. Only omnidirectional is supported; the field
/// exists so scenario files state it explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizontalPattern {
    #[default]
    Omni,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AntennaModel {
    #[default]
    Isotropic,
    /// Parabolic-in-dB vertical cut with a front-to-back floor, azimuth
    /// invariant.
    GaussianVertical,
    /// Vertically oriented half-wave dipole.
    HalfWaveDipole,
}

/// Antenna described by its vertical cut; all models are omnidirectional in
/// azimuth. Angles in degrees, downtilt positive below the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    #[serde(default)]
    pub model: AntennaModel,
    /// Peak gain in dBi. Defaults per model: 2.15 for the half-wave dipole,
    /// 0 otherwise.
    #[serde(default)]
    pub peak_gain_dbi: Option<f64>,
    /// Full 3 dB beamwidth of the vertical cut (gaussian-vertical only).
    #[serde(default = "default_beamwidth")]
    pub vertical_beamwidth_deg: f64,
    #[serde(default)]
    pub downtilt_deg: f64,
    #[serde(default)]
    pub horizontal: HorizontalPattern,
}

fn default_beamwidth() -> f64 {
    65.0
}

/// Gain floor below peak for the gaussian-vertical model (front-to-back).
const GAUSSIAN_FLOOR_DB: f64 = 25.0;
/// Gain floor below peak for the dipole pattern nulls.
const DIPOLE_FLOOR_DB: f64 = 40.0;
/// Half-wave dipole directivity in dBi.
pub const HALF_WAVE_DIPOLE_PEAK_DBI: f64 = 2.15;

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern {
            model: AntennaModel::Isotropic,
            peak_gain_dbi: None,
            vertical_beamwidth_deg: default_beamwidth(),
            downtilt_deg: 0.0,
            horizontal: HorizontalPattern::Omni,
        }
    }
}

impl AntennaPattern {
    pub fn isotropic() -> Self {
        AntennaPattern::default()
    }

    pub fn half_wave_dipole() -> Self {
        AntennaPattern { model: AntennaModel::HalfWaveDipole, ..Default::default() }
    }

    pub fn gaussian_vertical(peak_gain_dbi: f64, beamwidth_deg: f64, downtilt_deg: f64) -> Self {
        AntennaPattern {
            model: AntennaModel::GaussianVertical,
            peak_gain_dbi: Some(peak_gain_dbi),
            vertical_beamwidth_deg: beamwidth_deg,
            downtilt_deg,
            horizontal: HorizontalPattern::Omni,
        }
    }

    /// Peak gain with the per-model default applied.
    pub fn peak_gain(&self) -> f64 {
        self.peak_gain_dbi.unwrap_or(match self.model {
            AntennaModel::HalfWaveDipole => HALF_WAVE_DIPOLE_PEAK_DBI,
            _ => 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertical_beamwidth_deg <= 0.0 {
            return Err(Error::Validation(format!(
                "antenna: vertical beamwidth must be > 0 deg, got {}",
                self.vertical_beamwidth_deg
            )));
        }
        Ok(())
    }

    /// Gain in dBi toward `direction` (unit vector, checked to 1e-9).
    ///
    /// The direction points away from the antenna: use the departure
    /// direction at a transmitter and the direction toward the incoming ray
    /// at a receiver.
    pub fn gain_dbi(&self, direction: Vec3) -> Result<f64> {
        if !direction.is_unit(1e-9) {
            return Err(Error::InvalidInput(format!(
                "antenna gain query requires a unit direction, |d| = {}",
                direction.norm()
            )));
        }
        let peak = self.peak_gain();
        Ok(match self.model {
            AntennaModel::Isotropic => peak,
            AntennaModel::GaussianVertical => {
                // Angle below the horizon, positive downward.
                let theta_down = (-direction.z).clamp(-1.0, 1.0).asin().to_degrees();
                let off = (theta_down - self.downtilt_deg) / self.vertical_beamwidth_deg;
                peak - (12.0 * off * off).min(GAUSSIAN_FLOOR_DB)
            }
            AntennaModel::HalfWaveDipole => {
                // Theta measured from the (vertical) dipole axis.
                let cos_t = direction.z.clamp(-1.0, 1.0);
                let sin_t = (1.0 - cos_t * cos_t).sqrt();
                if sin_t < 1e-9 {
                    peak - DIPOLE_FLOOR_DB
                } else {
                    let f = (std::f64::consts::FRAC_PI_2 * cos_t).cos() / sin_t;
                    let g = peak + 20.0 * f.abs().max(1e-12).log10();
                    g.max(peak - DIPOLE_FLOOR_DB)
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(az_deg: f64, down_deg: f64) -> Vec3 {
        let az = az_deg.to_radians();
        let el = -down_deg.to_radians();
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    #[test]
    fn gaussian_boresight_is_peak() {
        let p = AntennaPattern::gaussian_vertical(5.8, 9.0, 30.0);
        for az in [0.0, 77.0, 190.0] {
            let g = p.gain_dbi(dir(az, 30.0)).unwrap();
            assert!((g - 5.8).abs() < 1e-9, "az {az}: {g}");
        }
    }

    #[test]
    fn gaussian_half_beamwidth_is_minus_3db() {
        let p = AntennaPattern::gaussian_vertical(5.8, 9.0, 30.0);
        let g = p.gain_dbi(dir(0.0, 30.0 + 4.5)).unwrap();
        assert!((g - (5.8 - 3.0)).abs() < 1e-9, "{g}");
        let g = p.gain_dbi(dir(0.0, 30.0 - 4.5)).unwrap();
        assert!((g - (5.8 - 3.0)).abs() < 1e-9, "{g}");
    }

    #[test]
    fn gaussian_floor_applies() {
        let p = AntennaPattern::gaussian_vertical(5.8, 9.0, 30.0);
        let g = p.gain_dbi(dir(0.0, -60.0)).unwrap();
        assert!((g - (5.8 - 25.0)).abs() < 1e-9);
    }

    #[test]
    fn dipole_broadside() {
        let p = AntennaPattern::half_wave_dipole();
        let g = p.gain_dbi(dir(123.0, 0.0)).unwrap();
        assert!((g - 2.15).abs() < 1e-9);
    }

    #[test]
    fn dipole_axis_null() {
        let p = AntennaPattern::half_wave_dipole();
        let g = p.gain_dbi(Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((g - (2.15 - 40.0)).abs() < 1e-9);
    }

    #[test]
    fn dipole_matches_closed_form_off_broadside() {
        // Independent evaluation of 2.15 + 20 log10(cos(pi/2 cos t)/sin t).
        let p = AntennaPattern::half_wave_dipole();
        for theta_deg in [30.0f64, 45.0, 60.0, 75.0, 120.0] {
            let theta = theta_deg.to_radians();
            let expect =
                2.15 + 20.0 * ((std::f64::consts::FRAC_PI_2 * theta.cos()).cos() / theta.sin())
                    .abs()
                    .log10();
            let d = Vec3::new(theta.sin(), 0.0, theta.cos());
            let g = p.gain_dbi(d).unwrap();
            assert!((g - expect).abs() < 1e-9, "theta {theta_deg}: {g} vs {expect}");
        }
    }

    #[test]
    fn omni_azimuth_invariance() {
        // 360 azimuth samples at fixed elevation must agree to < 1e-12 dB.
        for p in [
            AntennaPattern::isotropic(),
            AntennaPattern::half_wave_dipole(),
            AntennaPattern::gaussian_vertical(5.8, 9.0, 30.0),
        ] {
            let g0 = p.gain_dbi(dir(0.0, 17.0)).unwrap();
            for k in 1..360 {
                let g = p.gain_dbi(dir(k as f64, 17.0)).unwrap();
                assert!((g - g0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gain_never_exceeds_peak() {
        for p in [
            AntennaPattern::isotropic(),
            AntennaPattern::half_wave_dipole(),
            AntennaPattern::gaussian_vertical(5.8, 9.0, 30.0),
        ] {
            for az in (0..36).map(|k| k as f64 * 10.0) {
                for down in (-9..=9).map(|k| k as f64 * 10.0) {
                    let g = p.gain_dbi(dir(az, down)).unwrap();
                    assert!(g <= p.peak_gain() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_unit_direction_rejected() {
        let p = AntennaPattern::isotropic();
        assert!(p.gain_dbi(Vec3::new(0.0, 0.0, 2.0)).is_err());
    }
}
