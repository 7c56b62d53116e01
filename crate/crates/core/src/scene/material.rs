//! Dielectric materials and the built-in catalog.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dielectric description of a surface/volume material.
///
/// `eps_real`/`eps_imag` are the real and imaginary parts of the relative
/// permittivity (the complex permittivity used by the Fresnel equations is
/// `eps_real - j*eps_imag`). `conductivity_s_per_m` optionally adds the
/// frequency-dependent ITU-R P.2040 loss term `17.98 * sigma / f_GHz` on top
/// of `eps_imag`. `transmission_loss_rate_db_per_m` attenuates rays passing
/// through the solid volume, per meter of chord length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub eps_real: f64,
    #[serde(default)]
    pub eps_imag: f64,
    #[serde(default)]
    pub conductivity_s_per_m: f64,
    pub transmission_loss_rate_db_per_m: f64,
}

impl Material {
    pub fn new(name: &str, eps_real: f64, eps_imag: f64, loss_rate_db_per_m: f64) -> Self {
        Material {
            name: name.to_string(),
            eps_real,
            eps_imag,
            conductivity_s_per_m: 0.0,
            transmission_loss_rate_db_per_m: loss_rate_db_per_m,
        }
    }

    /// Complex relative permittivity at the given carrier frequency.
    pub fn complex_permittivity(&self, freq_ghz: f64) -> num_complex::Complex64 {
        let imag = self.eps_imag + 17.98 * self.conductivity_s_per_m / freq_ghz;
        num_complex::Complex64::new(self.eps_real, -imag)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_real < 1.0 {
            return Err(Error::Validation(format!(
                "material '{}': eps_real must be >= 1, got {}",
                self.name, self.eps_real
            )));
        }
        if self.eps_imag < 0.0 || self.conductivity_s_per_m < 0.0 {
            return Err(Error::Validation(format!(
                "material '{}': loss terms must be >= 0",
                self.name
            )));
        }
        if self.transmission_loss_rate_db_per_m < 0.0 {
            return Err(Error::Validation(format!(
                "material '{}': transmission loss rate must be >= 0 dB/m, got {}",
                self.name, self.transmission_loss_rate_db_per_m
            )));
        }
        Ok(())
    }
}

/// Material catalog file: a JSON list of [`Material`] records.
pub fn load_material_catalog(path: impl AsRef<std::path::Path>) -> Result<Vec<Material>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let catalog: Vec<Material> = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    for m in &catalog {
        m.validate()?;
    }
    Ok(catalog)
}

/// Built-in catalog: permittivities follow ITU-R P.2040 around 3.7 GHz,
/// transmission rates are engineering defaults for that band.
pub fn default_catalog() -> Vec<Material> {
    vec![
        Material::new("concrete", 5.24, 0.63, 90.0),
        Material {
            name: "metal".to_string(),
            eps_real: 1.0,
            eps_imag: 0.0,
            conductivity_s_per_m: 1.0e7,
            transmission_loss_rate_db_per_m: 5000.0,
        },
        Material::new("glass", 6.27, 0.10, 14.0),
        Material::new("plasterboard", 2.73, 0.14, 29.0),
        // Composite stand-in for glass/plastic/rubber-panelled metal frames.
        Material::new("equivalent", 5.31, 0.44, 8.0),
        Material::new("cardboard", 1.80, 0.07, 18.0),
    ]
}
