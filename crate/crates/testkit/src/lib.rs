//! Independent oracles and scene builders for validating the propagation
//! engine.
//!
//! Everything here deliberately avoids the production ray launcher and UTD
//! code paths: specular paths are enumerated exhaustively with mirror
//! images, and the half-plane diffraction reference evaluates the
//! closed-form knife-edge expression with quadrature-based Fresnel
//! integrals.

use num_complex::Complex64;
use rfplan_core::geometry::{mirror_point, Geometry};
use rfplan_core::math::{Aabb, Vec3};
use rfplan_core::scene::{default_catalog, Scene, Solid};

/// One specular path found by exhaustive image-method enumeration.
#[derive(Debug, Clone)]
pub struct OraclePath {
    pub facets: Vec<u32>,
    pub length_m: f64,
    pub points: Vec<Vec3>,
}

/// Every valid specular reflection path up to `max_reflections`, found by
/// brute-force enumeration of facet sequences (no immediate repeats) and
/// mirror-image reconstruction. Obstructed paths are kept, matching the
/// transmission-allowed engine semantics.
pub fn enumerate_specular_paths(
    geo: &Geometry,
    tx: Vec3,
    rx: Vec3,
    max_reflections: usize,
) -> Vec<OraclePath> {
    let n_facets = geo.facets().len() as u32;
    let mut out = Vec::new();
    let mut seq: Vec<u32> = Vec::new();
    enumerate_rec(geo, tx, rx, max_reflections, n_facets, &mut seq, &mut out);
    out.sort_by(|a, b| {
        (a.facets.len(), &a.facets).cmp(&(b.facets.len(), &b.facets))
    });
    out
}

fn enumerate_rec(
    geo: &Geometry,
    tx: Vec3,
    rx: Vec3,
    depth_left: usize,
    n_facets: u32,
    seq: &mut Vec<u32>,
    out: &mut Vec<OraclePath>,
) {
    if !seq.is_empty() {
        if let Some(path) = solve_sequence(geo, tx, rx, seq) {
            out.push(path);
        }
    }
    if depth_left == 0 {
        return;
    }
    for f in 0..n_facets {
        if seq.last() == Some(&f) {
            continue; // consecutive reflections off one plane degenerate
        }
        seq.push(f);
        enumerate_rec(geo, tx, rx, depth_left - 1, n_facets, seq, out);
        seq.pop();
    }
}

/// Image-method solution for one facet sequence: mirror the source through
/// the facets in order, intersect backward, validate containment and
/// (for one-sided facets) the illuminated side.
fn solve_sequence(geo: &Geometry, tx: Vec3, rx: Vec3, facets: &[u32]) -> Option<OraclePath> {
    let mut images = vec![tx];
    for &fi in facets {
        images.push(mirror_point(*images.last().unwrap(), geo.facet(fi)));
    }
    let mut pts = vec![Vec3::ZERO; facets.len()];
    let mut after = rx;
    for (k, &fi) in facets.iter().enumerate().rev() {
        let f = geo.facet(fi);
        let img = images[k + 1];
        let seg = after - img;
        let denom = seg.dot(f.normal);
        if denom.abs() < 1e-14 {
            return None;
        }
        let t = -f.plane_distance(img) / denom;
        if !(1e-9..=1.0 - 1e-9).contains(&t) {
            return None;
        }
        let q = img + seg * t;
        let on_plane = q - f.normal * f.plane_distance(q);
        if !f.contains_on_plane(on_plane) {
            return None;
        }
        pts[k] = q;
        after = q;
    }
    let mut prev = tx;
    let mut length = 0.0;
    for (k, &fi) in facets.iter().enumerate() {
        let f = geo.facet(fi);
        let leg = pts[k] - prev;
        let leg_len = leg.norm();
        if leg_len < 1e-9 {
            return None;
        }
        if !f.two_sided && (leg / leg_len).dot(f.normal) >= -1e-12 {
            return None;
        }
        length += leg_len;
        prev = pts[k];
    }
    let last = (rx - prev).norm();
    if last < 1e-9 {
        return None;
    }
    length += last;
    let mut points = vec![tx];
    points.extend(pts.iter().cloned());
    points.push(rx);
    Some(OraclePath { facets: facets.to_vec(), length_m: length, points })
}

// ---------------------------------------------------------------------
// Knife-edge diffraction reference
// ---------------------------------------------------------------------

/// Fresnel integrals `C(u)`, `S(u)` by composite Simpson quadrature
/// (reference-quality, slow).
pub fn fresnel_integrals_quadrature(u: f64) -> (f64, f64) {
    let x = u.abs();
    if x == 0.0 {
        return (0.0, 0.0);
    }
    // Resolve the chirp oscillation: the local period at t is ~2/t.
    let n = ((40.0 * x * x).ceil() as usize).clamp(400, 2_000_000);
    let n = n + n % 2;
    let h = x / n as f64;
    let phase = |t: f64| std::f64::consts::FRAC_PI_2 * t * t;
    let (mut c, mut s) = (phase(0.0).cos(), phase(0.0).sin());
    for k in 1..n {
        let t = h * k as f64;
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        c += w * phase(t).cos();
        s += w * phase(t).sin();
    }
    c += phase(x).cos();
    s += phase(x).sin();
    c *= h / 3.0;
    s *= h / 3.0;
    if u < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

/// UTD transition function from the quadrature Fresnel integrals.
pub fn transition_function_quadrature(x: f64) -> Complex64 {
    if x <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if x > 2e6 {
        return Complex64::new(1.0, 0.0);
    }
    let sqrt_x = x.sqrt();
    let u = sqrt_x * (2.0 / std::f64::consts::PI).sqrt();
    let (c, s) = fresnel_integrals_quadrature(u);
    let tail = Complex64::new(0.5 - c, -(0.5 - s)) * (std::f64::consts::PI / 2.0).sqrt();
    Complex64::new(0.0, 2.0 * sqrt_x) * Complex64::from_polar(1.0, x) * tail
}

/// Closed-form PEC half-plane (knife edge) diffraction coefficients
/// `(soft, hard)`:
///
/// `D = -e^{-j pi/4} / (2 sqrt(2 pi k) sin b0) *
///      [ sec((phi-phi')/2) F(kL a(phi-phi'))
///        -/+ sec((phi+phi')/2) F(kL a(phi+phi')) ]`
///
/// with `a(b) = 2 cos^2(b/2)`. Angles measured from one face of the half
/// plane, in (0, 2 pi).
pub fn half_plane_pec_coefficients(
    phi_src: f64,
    phi_obs: f64,
    k: f64,
    l_param: f64,
    sin_beta0: f64,
) -> (Complex64, Complex64) {
    let pref = -Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)
        / (2.0 * (2.0 * std::f64::consts::PI * k).sqrt() * sin_beta0);
    let term = |beta: f64| {
        let a = 2.0 * (beta / 2.0).cos().powi(2);
        let sec = 1.0 / (beta / 2.0).cos();
        transition_function_quadrature(k * l_param * a) * sec
    };
    let t_inc = term(phi_obs - phi_src);
    let t_ref = term(phi_obs + phi_src);
    (pref * (t_inc - t_ref), pref * (t_inc + t_ref))
}

// ---------------------------------------------------------------------
// Scene builders
// ---------------------------------------------------------------------

/// Obstacle-free scene with wide bounds.
pub fn open_scene(half_extent: f64) -> Scene {
    Scene {
        bounds: Aabb::new(
            Vec3::new(-half_extent, -half_extent, -half_extent),
            Vec3::new(half_extent, half_extent, half_extent),
        ),
        frequency_ghz: 3.7,
        materials: default_catalog(),
        solids: vec![],
        racks: vec![],
        nodes: vec![],
        target_area: None,
        propagation: Default::default(),
        plan: None,
    }
}

/// Rectangular wall slab in the x = `x` plane.
pub fn wall_at_x(id: &str, x: f64, y: (f64, f64), z: (f64, f64), material: &str) -> Solid {
    Solid::slab(
        id,
        vec![
            Vec3::new(x, y.0, z.0),
            Vec3::new(x, y.1, z.0),
            Vec3::new(x, y.1, z.1),
            Vec3::new(x, y.0, z.1),
        ],
        0.1,
        material,
    )
}

/// Rectangular wall slab in the y = `y` plane.
pub fn wall_at_y(id: &str, y: f64, x: (f64, f64), z: (f64, f64), material: &str) -> Solid {
    Solid::slab(
        id,
        vec![
            Vec3::new(x.0, y, z.0),
            Vec3::new(x.1, y, z.0),
            Vec3::new(x.1, y, z.1),
            Vec3::new(x.0, y, z.1),
        ],
        0.1,
        material,
    )
}

/// Horizontal slab (floor/ceiling) at height `z`.
pub fn floor_at_z(id: &str, z: f64, x: (f64, f64), y: (f64, f64), material: &str) -> Solid {
    Solid::slab(
        id,
        vec![
            Vec3::new(x.0, y.0, z),
            Vec3::new(x.1, y.0, z),
            Vec3::new(x.1, y.1, z),
            Vec3::new(x.0, y.1, z),
        ],
        0.1,
        material,
    )
}

/// The five small scenes used for image-method validation, with Tx/Rx
/// placements: (description, scene, tx, rx).
pub fn image_oracle_scenes() -> Vec<(&'static str, Scene, Vec3, Vec3)> {
    let mut out = Vec::new();

    let mut s = open_scene(60.0);
    s.solids = vec![wall_at_x("w", 0.0, (-30.0, 30.0), (-20.0, 20.0), "metal")];
    out.push((
        "single wall beside the link",
        s,
        Vec3::new(1.0, -5.0, 0.0),
        Vec3::new(1.0, 5.0, 0.0),
    ));

    let mut s = open_scene(60.0);
    s.solids = vec![
        wall_at_x("left", -2.0, (-30.0, 30.0), (-20.0, 20.0), "metal"),
        wall_at_x("right", 3.0, (-30.0, 30.0), (-20.0, 20.0), "concrete"),
    ];
    out.push((
        "corridor between parallel walls",
        s,
        Vec3::new(0.0, -6.0, 0.0),
        Vec3::new(0.5, 6.0, 0.5),
    ));

    let mut s = open_scene(60.0);
    s.solids = vec![
        wall_at_x("wx", 0.0, (-30.0, 30.0), (-20.0, 20.0), "metal"),
        wall_at_y("wy", 0.0, (0.5, 30.0), (-20.0, 20.0), "metal"),
    ];
    out.push((
        "perpendicular corner",
        s,
        Vec3::new(4.0, 3.0, 0.0),
        Vec3::new(6.0, 5.0, 0.3),
    ));

    let mut s = open_scene(60.0);
    s.solids = vec![
        floor_at_z("floor", 0.0, (-30.0, 30.0), (-30.0, 30.0), "concrete"),
        wall_at_x("wall", 10.0, (-30.0, 30.0), (0.0, 20.0), "metal"),
    ];
    out.push((
        "floor bounce plus end wall",
        s,
        Vec3::new(0.0, -3.0, 2.0),
        Vec3::new(6.0, 4.0, 1.5),
    ));

    let mut s = open_scene(60.0);
    s.solids = vec![
        floor_at_z("floor", 0.0, (-30.0, 30.0), (-30.0, 30.0), "concrete"),
        wall_at_x("w1", -5.0, (-30.0, 30.0), (0.0, 15.0), "metal"),
        wall_at_y("w2", 8.0, (-30.0, 30.0), (0.0, 15.0), "equivalent"),
    ];
    out.push((
        "three-facet room corner",
        s,
        Vec3::new(-1.0, 2.0, 1.8),
        Vec3::new(2.0, 5.0, 1.2),
    ));

    out
}
