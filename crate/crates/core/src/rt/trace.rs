//! Shooting-and-bouncing ray launcher with image-method path refinement.
//!
//! Reflection paths are discovered by launching `launch_count` rays on a
//! Fibonacci sphere, capturing rays that pass within the distance-scaled
//! reception sphere of a receiver, and collapsing duplicates by their
//! facet-sequence signature. Each captured signature is then re-solved
//! exactly with mirror images, so path lengths are not quantized by the
//! launch grid. The direct path is always present (obstructed segments pay
//! per-meter transmission loss). Single diffractions and
//! reflection/diffraction combinations come from deterministic wedge
//! enumeration with path-length-ranked candidate pruning.
//!
//! Everything is deterministic for a fixed config: parallel stages reduce
//! into order-independent sets, and per-receiver assembly sorts by
//! interaction signature before accumulating.

use std::collections::HashSet;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Wedge};
use crate::math::{Aabb, Vec3};
use crate::rt::fresnel::{fresnel_reflection, Polarization};
use crate::rt::utd::utd_diffraction;
use crate::rt::{path_gain, Interaction, InteractionKind, PropagationPath, RtConfig};
use crate::scene::Node;

/// Self-intersection guard after a reflection, meters.
const RAY_OFFSET: f64 = 1e-6;
/// Launched rays stop spawning reflections once the accumulated
/// transmission loss along the branch exceeds this.
const MAX_SPAWN_TRANSMISSION_DB: f64 = 80.0;
/// Cap on a single interaction's field loss, dB (Brewster nulls etc.).
const MAX_INTERACTION_LOSS_DB: f64 = 200.0;

/// Reflection-facet sequence of a launched ray branch (up to 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct RefSig {
    n: u8,
    facets: [u32; 4],
}

impl RefSig {
    const EMPTY: RefSig = RefSig { n: 0, facets: [u32::MAX; 4] };

    fn push(&self, facet: u32) -> RefSig {
        let mut out = *self;
        out.facets[out.n as usize] = facet;
        out.n += 1;
        out
    }

    fn as_slice(&self) -> &[u32] {
        &self.facets[..self.n as usize]
    }
}

/// Deterministic near-uniform unit directions.
fn fibonacci_direction(i: u32, n: u32) -> Vec3 {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = golden * i as f64;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Dense 2D bucket grid over receiver points for capture queries.
struct RxGrid {
    points: Vec<Vec3>,
    min: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl RxGrid {
    fn build(points: &[Vec3]) -> RxGrid {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            min[0] = min[0].min(p.x);
            min[1] = min[1].min(p.y);
            max[0] = max[0].max(p.x);
            max[1] = max[1].max(p.y);
        }
        let span = ((max[0] - min[0]).max(max[1] - min[1])).max(1e-6);
        let cell = (span / 128.0).clamp(0.5, 4.0);
        let nx = ((max[0] - min[0]) / cell).floor() as usize + 1;
        let ny = ((max[1] - min[1]) / cell).floor() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let ix = ((p.x - min[0]) / cell).floor() as usize;
            let iy = ((p.y - min[1]) / cell).floor() as usize;
            cells[iy.min(ny - 1) * nx + ix.min(nx - 1)].push(i as u32);
        }
        RxGrid { points: points.to_vec(), min, cell, nx, ny, cells }
    }

    /// Points whose reception sphere the segment pierces.
    ///
    /// The capture radius grows along the ray: `r = alpha_k * (s0 + s)`
    /// with `alpha_k = alpha * sqrt(4 pi / launch_count)` and `s` the arc
    /// length along the segment.
    fn capture(
        &self,
        origin: Vec3,
        dir: Vec3,
        seg_len: f64,
        s0: f64,
        alpha_k: f64,
        mut found: impl FnMut(u32),
    ) {
        let r_max = alpha_k * (s0 + seg_len);
        // Broad-phase against the grid footprint.
        let lo = [self.min[0] - r_max, self.min[1] - r_max];
        let hi = [
            self.min[0] + self.nx as f64 * self.cell + r_max,
            self.min[1] + self.ny as f64 * self.cell + r_max,
        ];
        let end = origin + dir * seg_len;
        if (origin.x < lo[0] && end.x < lo[0])
            || (origin.x > hi[0] && end.x > hi[0])
            || (origin.y < lo[1] && end.y < lo[1])
            || (origin.y > hi[1] && end.y > hi[1])
        {
            return;
        }
        let steps = (seg_len / self.cell).ceil().max(1.0) as usize;
        let ds = seg_len / steps as f64;
        let mut tested: HashSet<u32> = HashSet::new();
        for k in 0..=steps {
            let s = ds * k as f64;
            let p = origin + dir * s;
            let r_local = alpha_k * (s0 + (s + ds).min(seg_len));
            let nr = ((r_local + self.cell) / self.cell).ceil() as isize;
            let cx = ((p.x - self.min[0]) / self.cell).floor() as isize;
            let cy = ((p.y - self.min[1]) / self.cell).floor() as isize;
            for gy in (cy - nr).max(0)..=(cy + nr).min(self.ny as isize - 1) {
                for gx in (cx - nr).max(0)..=(cx + nr).min(self.nx as isize - 1) {
                    for &pi in &self.cells[gy as usize * self.nx + gx as usize] {
                        if !tested.insert(pi) {
                            continue;
                        }
                        let q = self.points[pi as usize];
                        let t = (q - origin).dot(dir).clamp(0.0, seg_len);
                        let dist = (q - (origin + dir * t)).norm();
                        if dist <= alpha_k * (s0 + t) {
                            found(pi);
                        }
                    }
                }
            }
        }
    }
}

/// Complex field vector for polarization tracking.
#[derive(Debug, Clone, Copy)]
struct FieldVec {
    x: Complex64,
    y: Complex64,
    z: Complex64,
}

impl FieldVec {
    fn from_real(v: Vec3) -> FieldVec {
        FieldVec {
            x: Complex64::new(v.x, 0.0),
            y: Complex64::new(v.y, 0.0),
            z: Complex64::new(v.z, 0.0),
        }
    }

    fn dot_real(&self, v: Vec3) -> Complex64 {
        self.x * v.x + self.y * v.y + self.z * v.z
    }

    /// Inner product against another field vector's real part (used for
    /// polarization projections where the basis vector is real).
    fn dot_real_vec(&self, v: &FieldVec) -> Complex64 {
        self.x * v.x.re + self.y * v.y.re + self.z * v.z.re
    }

    fn add_scaled(self, v: Vec3, s: Complex64) -> FieldVec {
        FieldVec { x: self.x + s * v.x, y: self.y + s * v.y, z: self.z + s * v.z }
    }

    fn zero() -> FieldVec {
        FieldVec {
            x: Complex64::new(0.0, 0.0),
            y: Complex64::new(0.0, 0.0),
            z: Complex64::new(0.0, 0.0),
        }
    }

    fn norm(&self) -> f64 {
        (self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()).sqrt()
    }
}

/// Vertical-polarization field vector perpendicular to the departure
/// direction (CW setup with vertical antennas).
fn initial_polarization(dir: Vec3) -> FieldVec {
    let up = Vec3::new(0.0, 0.0, 1.0);
    let v = up - dir * up.dot(dir);
    let e = v.normalized().unwrap_or_else(|| dir.any_perpendicular());
    FieldVec::from_real(e)
}

/// Field update at a specular reflection; returns the new field vector.
fn reflect_field(
    e: FieldVec,
    d_in: Vec3,
    normal: Vec3,
    r_te: Complex64,
    r_tm: Complex64,
) -> FieldVec {
    let d_out = d_in - normal * (2.0 * d_in.dot(normal));
    let e_perp = match d_in.cross(normal).normalized() {
        Some(v) => v,
        // Normal incidence: the decomposition is arbitrary.
        None => d_in.any_perpendicular(),
    };
    let e_par_in = e_perp.cross(d_in);
    let e_par_out = e_perp.cross(d_out);
    let c_perp = e.dot_real(e_perp);
    let c_par = e.dot_real(e_par_in);
    FieldVec::zero()
        .add_scaled(e_perp, r_te * c_perp)
        .add_scaled(e_par_out, r_tm * c_par)
}

/// Field update at an edge diffraction (edge-fixed soft/hard split).
fn diffract_field(
    e: FieldVec,
    d_in: Vec3,
    d_out: Vec3,
    edge_dir: Vec3,
    d_soft: Complex64,
    d_hard: Complex64,
) -> FieldVec {
    let phi_in = match edge_dir.cross(d_in).normalized() {
        Some(v) => -v,
        None => return FieldVec::zero(), // along the edge; degenerate
    };
    let beta_in = phi_in.cross(d_in);
    let phi_out = match edge_dir.cross(d_out).normalized() {
        Some(v) => v,
        None => return FieldVec::zero(),
    };
    let beta_out = phi_out.cross(d_out);
    let c_soft = e.dot_real(beta_in);
    let c_hard = e.dot_real(phi_in);
    FieldVec::zero()
        .add_scaled(beta_out, d_soft * c_soft)
        .add_scaled(phi_out, d_hard * c_hard)
}

fn field_ratio_loss_db(before: f64, after: f64) -> f64 {
    if before <= 0.0 {
        return MAX_INTERACTION_LOSS_DB;
    }
    let ratio = (after / before).max(0.0);
    (-20.0 * ratio.max(1e-30).log10()).clamp(0.0, MAX_INTERACTION_LOSS_DB)
}

/// Path builder shared by all path kinds: walks the interaction points,
/// collecting transmission chords per leg and applying the interaction
/// physics.
struct PathAssembler<'a> {
    geo: &'a Geometry,
    freq_ghz: f64,
}

enum SpecularStep {
    Reflection { facet: u32 },
    Diffraction { wedge: u32, d_soft: Complex64, d_hard: Complex64, spreading: f64 },
}

impl<'a> PathAssembler<'a> {
    /// `points` = [tx, q1, .., qn, rx]; `steps[k]` acts at `points[k+1]`.
    fn assemble(&self, points: &[Vec3], steps: &[SpecularStep]) -> Option<PropagationPath> {
        debug_assert_eq!(points.len(), steps.len() + 2);
        let mut interactions: Vec<Interaction> = Vec::new();
        let mut length = 0.0;
        let mut dir = (points[1] - points[0]).normalized()?;
        let departure = dir;
        let mut field = initial_polarization(dir);

        for k in 0..points.len() - 1 {
            let (a, b) = (points[k], points[k + 1]);
            let leg = (b - a).norm();
            if leg < 1e-9 {
                return None;
            }
            length += leg;
            dir = (b - a) / leg;
            for pen in self.geo.penetration_lengths(a, b).ok()? {
                let rate = self
                    .geo
                    .material(self.geo.solid_material(pen.solid))
                    .transmission_loss_rate_db_per_m;
                let loss = (rate * pen.length).min(MAX_INTERACTION_LOSS_DB);
                if loss > 0.0 {
                    interactions.push(Interaction {
                        kind: InteractionKind::Transmission,
                        target: pen.solid,
                        point: pen.entry,
                        loss_db: loss,
                    });
                }
            }
            if k < steps.len() {
                let q = points[k + 1];
                let before = field.norm();
                match &steps[k] {
                    SpecularStep::Reflection { facet } => {
                        let f = self.geo.facet(*facet);
                        let cos_i = dir.dot(f.normal).abs().clamp(0.0, 1.0);
                        let angle = cos_i.acos();
                        let mat = self.geo.facet_material(*facet);
                        let r_te = fresnel_reflection(mat, angle, Polarization::Te, self.freq_ghz);
                        let r_tm = fresnel_reflection(mat, angle, Polarization::Tm, self.freq_ghz);
                        field = reflect_field(field, dir, f.normal, r_te, r_tm);
                        interactions.push(Interaction {
                            kind: InteractionKind::Reflection,
                            target: *facet,
                            point: q,
                            loss_db: field_ratio_loss_db(before, field.norm()),
                        });
                    }
                    SpecularStep::Diffraction { wedge, d_soft, d_hard, spreading } => {
                        let w = &self.geo.wedges()[*wedge as usize];
                        let d_out = (points[k + 2] - q).normalized()?;
                        field = diffract_field(field, dir, d_out, w.edge_dir, *d_soft, *d_hard);
                        let after = field.norm() * spreading;
                        interactions.push(Interaction {
                            kind: InteractionKind::Diffraction,
                            target: *wedge,
                            point: q,
                            loss_db: field_ratio_loss_db(before, after),
                        });
                        // Renormalize so later reflections see unit-scale
                        // ratios; the loss is already recorded.
                        field = FieldVec {
                            x: field.x * spreading,
                            y: field.y * spreading,
                            z: field.z * spreading,
                        };
                    }
                }
            }
        }

        // Project the arriving field onto the (vertical) receive
        // polarization: the co-polarized amplitude is what a matched
        // vertical antenna sees, and it makes path gains exactly
        // reciprocal. The mismatch is booked on the last specular
        // interaction.
        let n = points.len();
        let d_final = (points[n - 1] - points[n - 2]).normalized()?;
        let rx_pol = initial_polarization(d_final);
        let projected = field.dot_real_vec(&rx_pol).norm();
        let mismatch = field_ratio_loss_db(field.norm(), projected);
        if mismatch > 0.0 {
            if let Some(last) = interactions
                .iter_mut()
                .rev()
                .find(|i| i.kind != InteractionKind::Transmission)
            {
                last.loss_db = (last.loss_db + mismatch).min(MAX_INTERACTION_LOSS_DB);
            }
        }

        let arrival = (points[n - 2] - points[n - 1]).normalized()?;
        let mut path = PropagationPath {
            interactions,
            length_m: length,
            departure,
            arrival,
            gain_db: 0.0,
        };
        path.gain_db = path_gain(&path, self.freq_ghz);
        Some(path)
    }
}

/// Exact specular reflection points for a facet sequence, via mirror
/// images. Returns the interior points or `None` when the sequence has no
/// valid specular solution.
fn solve_reflection_points(
    geo: &Geometry,
    source: Vec3,
    target: Vec3,
    facets: &[u32],
) -> Option<Vec<Vec3>> {
    let mut images = vec![source];
    for &fi in facets {
        let f = geo.facet(fi);
        images.push(crate::geometry::mirror_point(*images.last().unwrap(), f));
    }
    // Walk backward from the target, intersecting each facet plane.
    let mut pts = vec![Vec3::ZERO; facets.len()];
    let mut after = target;
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
        if !f.contains_on_plane(q - f.normal * f.plane_distance(q)) {
            return None;
        }
        pts[k] = q;
        after = q;
    }
    // Forward validation: legs sane, one-sided facets hit from the front.
    let mut prev = source;
    for (k, &fi) in facets.iter().enumerate() {
        let f = geo.facet(fi);
        let d_in = (pts[k] - prev).normalized()?;
        if !f.two_sided && d_in.dot(f.normal) >= -1e-12 {
            return None;
        }
        prev = pts[k];
    }
    if (target - prev).norm() < 1e-9 {
        return None;
    }
    Some(pts)
}

/// Wedges eligible for diffraction between two endpoints: knife edges
/// always, solid edges when they are a silhouette from either endpoint.
fn wedge_eligible(geo: &Geometry, w: &Wedge, a: Vec3, b: Vec3) -> bool {
    if w.face_a == w.face_b {
        return true;
    }
    let fa = geo.facet(w.face_a);
    let fb = geo.facet(w.face_b);
    for p in [a, b] {
        if (fa.plane_distance(p) > 0.0) != (fb.plane_distance(p) > 0.0) {
            return true;
        }
    }
    false
}

/// Cheap detour estimate used to rank wedge candidates.
fn wedge_detour(w: &Wedge, a: Vec3, b: Vec3) -> f64 {
    let mid = w.midpoint();
    let candidates = [w.edge.0, mid, w.edge.1];
    candidates
        .iter()
        .map(|e| a.distance(*e) + b.distance(*e))
        .fold(f64::INFINITY, f64::min)
}

/// Top diffraction candidates by detour length, deterministic order.
fn ranked_wedges(geo: &Geometry, a: Vec3, b: Vec3, count: usize) -> Vec<u32> {
    let mut ranked: Vec<(f64, u32)> = geo
        .wedges()
        .iter()
        .enumerate()
        .filter(|(_, w)| wedge_eligible(geo, w, a, b))
        .map(|(i, w)| (wedge_detour(w, a, b), i as u32))
        .collect();
    ranked.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
    ranked.truncate(count);
    ranked.into_iter().map(|(_, i)| i).collect()
}

struct CaptureSets {
    per_rx: Vec<Vec<RefSig>>,
}

/// Launch rays and collect (receiver, reflection-signature) captures.
fn launch_capture(
    geo: &Geometry,
    cfg: &RtConfig,
    tx: Vec3,
    rxg: &RxGrid,
) -> CaptureSets {
    let n_rx = rxg.points.len();
    if cfg.max_reflections == 0 {
        return CaptureSets { per_rx: vec![Vec::new(); n_rx] };
    }
    let alpha_k =
        cfg.reception_sphere_alpha * (4.0 * std::f64::consts::PI / cfg.launch_count as f64).sqrt();
    let bounds = geo.bounds.expand(1e-3);
    let n = cfg.launch_count;
    let set: HashSet<(u32, RefSig)> = (0..n)
        .into_par_iter()
        .chunks(2048)
        .fold(HashSet::new, |mut acc, chunk| {
            for i in chunk {
                let dir = fibonacci_direction(i, n);
                walk_ray(
                    geo,
                    rxg,
                    &bounds,
                    alpha_k,
                    tx,
                    dir,
                    0.0,
                    RefSig::EMPTY,
                    cfg.max_reflections,
                    0.0,
                    &mut |rx, sig| {
                        acc.insert((rx, sig));
                    },
                );
            }
            acc
        })
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let mut per_rx = vec![Vec::new(); n_rx];
    for (rx, sig) in set {
        per_rx[rx as usize].push(sig);
    }
    for sigs in &mut per_rx {
        sigs.sort_unstable();
    }
    CaptureSets { per_rx }
}

#[allow(clippy::too_many_arguments)]
fn walk_ray(
    geo: &Geometry,
    rxg: &RxGrid,
    bounds: &Aabb,
    alpha_k: f64,
    origin: Vec3,
    dir: Vec3,
    s0: f64,
    sig: RefSig,
    refl_left: u32,
    trans_db: f64,
    found: &mut impl FnMut(u32, RefSig),
) {
    let Some(t_exit) = exit_distance(bounds, origin, dir) else {
        return;
    };
    if t_exit < 1e-9 {
        return;
    }
    // Capture along the whole straight run (transmission is allowed, so
    // the segment does not stop at obstacles). The empty signature is the
    // direct path, which is handled analytically.
    if sig.n > 0 {
        rxg.capture(origin, dir, t_exit, s0, alpha_k, |rx| found(rx, sig));
    }
    if refl_left == 0 || sig.n as usize >= sig.facets.len() {
        return;
    }
    let end = origin + dir * t_exit;
    let Ok(hits) = geo.segment_hits(origin, end) else {
        return;
    };
    let mut trans_running = trans_db;
    let mut open: std::collections::HashMap<u32, f64> = Default::default();
    for h in &hits {
        if trans_running > MAX_SPAWN_TRANSMISSION_DB {
            break;
        }
        let facet = geo.facet(h.facet);
        let reflective =
            facet.two_sided || h.entry_exit == crate::geometry::EntryExit::Entering;
        if reflective {
            let r_dir = dir - h.normal * (2.0 * dir.dot(h.normal));
            let point = origin + dir * h.distance;
            walk_ray(
                geo,
                rxg,
                bounds,
                alpha_k,
                point + r_dir * RAY_OFFSET,
                r_dir,
                s0 + h.distance,
                sig.push(h.facet),
                refl_left - 1,
                trans_running,
                found,
            );
        }
        // Transmission bookkeeping for the spawn budget.
        let rate = geo.facet_material(h.facet).transmission_loss_rate_db_per_m;
        match geo.facets()[h.facet as usize].two_sided {
            true => {
                let cos = dir.dot(h.normal).abs().max(0.05);
                trans_running += rate * 0.1 / cos; // nominal slab cost
            }
            false => match h.entry_exit {
                crate::geometry::EntryExit::Entering => {
                    open.insert(facet.solid, h.distance);
                }
                crate::geometry::EntryExit::Exiting => {
                    let start = open.remove(&facet.solid).unwrap_or(0.0);
                    trans_running += rate * (h.distance - start);
                }
            },
        }
    }
}

fn exit_distance(bounds: &Aabb, origin: Vec3, dir: Vec3) -> Option<f64> {
    let mut t_max = f64::INFINITY;
    for axis in 0..3 {
        let (o, d, lo, hi) = match axis {
            0 => (origin.x, dir.x, bounds.min.x, bounds.max.x),
            1 => (origin.y, dir.y, bounds.min.y, bounds.max.y),
            _ => (origin.z, dir.z, bounds.min.z, bounds.max.z),
        };
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let (ta, tb) = ((lo - o) / d, (hi - o) / d);
            let t_far = ta.max(tb);
            if t_far < 0.0 {
                return None;
            }
            t_max = t_max.min(t_far);
        }
    }
    Some(t_max)
}

/// Multipath between one transmitter and many receiver points.
///
/// Returns one deduplicated, signature-sorted path list per receiver.
/// Deterministic for a fixed config, independent of thread count.
pub fn trace_to_points(
    geo: &Geometry,
    tx: Vec3,
    rx_points: &[Vec3],
    cfg: &RtConfig,
) -> Result<Vec<Vec<PropagationPath>>> {
    cfg.validate()?;
    if rx_points.is_empty() {
        return Ok(Vec::new());
    }
    for (i, rx) in rx_points.iter().enumerate() {
        if (*rx - tx).norm() < 1e-9 {
            return Err(Error::InvalidInput(format!(
                "receiver {i} coincides with the transmitter"
            )));
        }
    }
    let rxg = RxGrid::build(rx_points);
    let captures = launch_capture(geo, cfg, tx, &rxg);
    let assembler = PathAssembler { geo, freq_ghz: cfg.frequency_ghz };

    let out: Vec<Vec<PropagationPath>> = rx_points
        .par_iter()
        .enumerate()
        .map(|(ri, &rx)| build_rx_paths(geo, cfg, &assembler, tx, rx, &captures.per_rx[ri]))
        .collect();
    Ok(out)
}

fn build_rx_paths(
    geo: &Geometry,
    cfg: &RtConfig,
    assembler: &PathAssembler,
    tx: Vec3,
    rx: Vec3,
    sigs: &[RefSig],
) -> Vec<PropagationPath> {
    let mut paths: Vec<PropagationPath> = Vec::new();
    // Direct path, always present.
    if let Some(p) = assembler.assemble(&[tx, rx], &[]) {
        paths.push(p);
    }

    // Image-refined reflection paths from captured signatures.
    let mut refined_sigs: Vec<&RefSig> = Vec::new();
    for sig in sigs {
        if sig.n as u32 > cfg.max_reflections {
            continue;
        }
        if let Some(pts) = solve_reflection_points(geo, tx, rx, sig.as_slice()) {
            let mut points = vec![tx];
            points.extend(pts);
            points.push(rx);
            let steps: Vec<SpecularStep> = sig
                .as_slice()
                .iter()
                .map(|&f| SpecularStep::Reflection { facet: f })
                .collect();
            if let Some(p) = assembler.assemble(&points, &steps) {
                paths.push(p);
                refined_sigs.push(sig);
            }
        }
    }

    // Diffraction paths.
    if cfg.max_diffractions >= 1 {
        for wi in ranked_wedges(geo, tx, rx, cfg.diffraction_candidates as usize) {
            if let Some(p) = build_diffracted(geo, cfg, assembler, tx, rx, &[], wi, &[]) {
                paths.push(p);
            }
        }
        if cfg.max_reflections >= 1 {
            let mixed_wedges =
                ranked_wedges(geo, tx, rx, cfg.mixed_diffraction_candidates as usize);
            for sig in &refined_sigs {
                let seq = sig.as_slice();
                for &wi in &mixed_wedges {
                    for pos in 0..=seq.len() {
                        let (prefix, suffix) = seq.split_at(pos);
                        if let Some(p) = build_diffracted(
                            geo, cfg, assembler, tx, rx, prefix, wi, suffix,
                        ) {
                            paths.push(p);
                        }
                    }
                }
            }
        }
    }

    // Canonical order and final dedupe by interaction signature.
    paths.sort_by(|a, b| {
        (a.specular_order(), a.signature()).cmp(&(b.specular_order(), b.signature()))
    });
    paths.dedup_by(|a, b| a.signature() == b.signature());
    paths
}

/// Build a path `tx -> prefix reflections -> wedge diffraction -> suffix
/// reflections -> rx`, or `None` when the geometry does not support it.
#[allow(clippy::too_many_arguments)]
fn build_diffracted(
    geo: &Geometry,
    cfg: &RtConfig,
    assembler: &PathAssembler,
    tx: Vec3,
    rx: Vec3,
    prefix: &[u32],
    wedge_idx: u32,
    suffix: &[u32],
) -> Option<PropagationPath> {
    let w = &geo.wedges()[wedge_idx as usize];
    // Unfold both sides with mirror images.
    let mut src_img = tx;
    for &fi in prefix {
        src_img = crate::geometry::mirror_point(src_img, geo.facet(fi));
    }
    let mut obs_img = rx;
    for &fi in suffix.iter().rev() {
        obs_img = crate::geometry::mirror_point(obs_img, geo.facet(fi));
    }
    let mats = (geo.material(w.materials.0), geo.material(w.materials.1));
    let coeff = utd_diffraction(w, mats, src_img, obs_img, cfg.frequency_ghz).ok()?;
    let qd = coeff.point;

    // Refold the reflection points on each side.
    let pre_pts = if prefix.is_empty() {
        Vec::new()
    } else {
        solve_reflection_points(geo, tx, qd, prefix)?
    };
    let suf_pts = if suffix.is_empty() {
        Vec::new()
    } else {
        solve_reflection_points(geo, qd, rx, suffix)?
    };

    let mut points = vec![tx];
    points.extend(pre_pts);
    points.push(qd);
    points.extend(suf_pts);
    points.push(rx);

    let mut steps: Vec<SpecularStep> = prefix
        .iter()
        .map(|&f| SpecularStep::Reflection { facet: f })
        .collect();
    steps.push(SpecularStep::Diffraction {
        wedge: wedge_idx,
        d_soft: coeff.soft,
        d_hard: coeff.hard,
        spreading: coeff.spreading_factor(),
    });
    steps.extend(suffix.iter().map(|&f| SpecularStep::Reflection { facet: f }));
    assembler.assemble(&points, &steps)
}

/// Multipath between two scene nodes.
pub fn trace_paths(
    geo: &Geometry,
    tx: &Node,
    rx: &Node,
    cfg: &RtConfig,
) -> Result<Vec<PropagationPath>> {
    if (tx.position - rx.position).norm() < 1e-9 {
        return Err(Error::InvalidInput(format!(
            "tx '{}' and rx '{}' share the same position",
            tx.id, rx.id
        )));
    }
    let mut lists = trace_to_points(geo, tx.position, &[rx.position], cfg)?;
    Ok(lists.pop().unwrap_or_default())
}
