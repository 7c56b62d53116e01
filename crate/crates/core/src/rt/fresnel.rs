//! Fresnel reflection at an air/dielectric interface.

use num_complex::Complex64;

use crate::scene::Material;

/// Field polarization relative to the plane of incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    /// E-field perpendicular to the plane of incidence (s / soft).
    Te,
    /// E-field parallel to the plane of incidence (p / hard).
    Tm,
}

/// Complex reflection coefficient for a ray in air hitting the material,
/// with `incidence_angle` measured from the surface normal in `[0, pi/2)`.
///
/// Uses the complex relative permittivity `eps' - j eps''` (plus the
/// conductivity term when the material defines one). The magnitude is
/// always <= 1.
pub fn fresnel_reflection(
    material: &Material,
    incidence_angle: f64,
    polarization: Polarization,
    freq_ghz: f64,
) -> Complex64 {
    let eps = material.complex_permittivity(freq_ghz);
    fresnel_reflection_eps(eps, incidence_angle, polarization)
}

/// [`fresnel_reflection`] for an explicit complex permittivity.
pub fn fresnel_reflection_eps(
    eps: Complex64,
    incidence_angle: f64,
    polarization: Polarization,
) -> Complex64 {
    let cos_i = incidence_angle.cos();
    let sin2_i = incidence_angle.sin().powi(2);
    // Transmitted-side term; principal branch keeps Re(root) >= 0.
    let root = (eps - sin2_i).sqrt();
    match polarization {
        Polarization::Te => (cos_i - root) / (cos_i + root),
        Polarization::Tm => (eps * cos_i - root) / (eps * cos_i + root),
    }
}

/// Power reflection loss in dB (>= 0): `-20 log10 |R|`.
pub fn reflection_loss_db(r: Complex64) -> f64 {
    let mag = r.norm().clamp(1e-30, 1.0);
    -20.0 * mag.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless(eps_real: f64) -> Material {
        Material::new("t", eps_real, 0.0, 0.0)
    }

    #[test]
    fn normal_incidence_reference() {
        // eps = 5.31 lossless: |R| = (sqrt(5.31)-1)/(sqrt(5.31)+1) = 0.3947,
        // i.e. 8.07 dB power reflection loss.
        let m = lossless(5.31);
        for pol in [Polarization::Te, Polarization::Tm] {
            let r = fresnel_reflection(&m, 0.0, pol, 3.7);
            assert!((r.norm() - 0.39473).abs() < 1e-4, "{}", r.norm());
            assert!((reflection_loss_db(r) - 8.074).abs() < 5e-3);
        }
    }

    #[test]
    fn pec_limit_reflects_fully() {
        let metal = Material {
            name: "metal".into(),
            eps_real: 1.0,
            eps_imag: 0.0,
            conductivity_s_per_m: 1.0e7,
            transmission_loss_rate_db_per_m: 0.0,
        };
        for angle in [0.0, 0.3, 0.9, 1.4] {
            for pol in [Polarization::Te, Polarization::Tm] {
                let r = fresnel_reflection(&metal, angle, pol, 3.7);
                assert!(r.norm() > 0.995, "angle {angle}: |R| = {}", r.norm());
            }
        }
    }

    #[test]
    fn brewster_angle_kills_tm() {
        let m = lossless(5.31);
        let brewster = 5.31f64.sqrt().atan();
        let r = fresnel_reflection(&m, brewster, Polarization::Tm, 3.7);
        assert!(r.norm() < 1e-6, "|R| = {}", r.norm());
        // TE does not vanish there.
        let r_te = fresnel_reflection(&m, brewster, Polarization::Te, 3.7);
        assert!(r_te.norm() > 0.1);
    }

    #[test]
    fn magnitude_bounded_over_ten_thousand_random_inputs() {
        // Deterministic LCG sampling of (eps', eps'', angle).
        let mut state = 0x12345678u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let eps = Complex64::new(1.0 + rnd() * 79.0, -rnd() * 1e4);
            let angle = rnd() * std::f64::consts::FRAC_PI_2 * 0.9999;
            for pol in [Polarization::Te, Polarization::Tm] {
                let r = fresnel_reflection_eps(eps, angle, pol);
                assert!(r.norm() <= 1.0 + 1e-12, "eps {eps} angle {angle}");
            }
        }
    }

    #[test]
    fn grazing_incidence_approaches_unity() {
        let m = lossless(3.0);
        let r = fresnel_reflection(&m, 1.570, Polarization::Te, 3.7);
        assert!(r.norm() > 0.99);
    }
}
