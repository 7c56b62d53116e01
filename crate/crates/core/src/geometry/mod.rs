//! Geometric kernel: exact ray/segment queries against the expanded scene.
//!
//! [`Geometry::build`] decomposes every solid into planar facets (boxes into
//! 6 rectangles, slabs into their polygon), indexes them in a BVH, and
//! enumerates diffraction wedges. All queries are pure functions over the
//! immutable structure.
//!
//! Tie rule: a crossing within 1e-9 m of a facet boundary counts as a hit.
//! This is deterministic and errs toward more obstruction.

mod bvh;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::scene::{polygon_normal, Material, Scene, SolidKind};
use bvh::Bvh;

/// Inclusive boundary tolerance for facet containment, meters.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Crossings closer than this to a segment endpoint are not reported.
const ENDPOINT_EPS: f64 = 1e-9;
/// Offset used by exposure probes when classifying wedge edges.
const PROBE_DELTA: f64 = 1e-4;
/// Grazing clamp for slab penetration: cos(incidence vs normal) floor.
const SLAB_COS_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryExit {
    Entering,
    Exiting,
}

/// One facet crossing along a segment.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub facet: u32,
    /// Distance from the segment start, meters; strictly positive.
    pub distance: f64,
    pub entry_exit: EntryExit,
    /// Facet normal (outward for closed solids).
    pub normal: Vec3,
}

/// Through-material chord of a segment crossing a solid.
#[derive(Debug, Clone, Copy)]
pub struct Penetration {
    pub solid: u32,
    /// In-material path length, meters.
    pub length: f64,
    /// Where the segment first meets the solid.
    pub entry: Vec3,
}

/// Planar facet of a solid.
#[derive(Debug, Clone)]
pub struct Facet {
    pub id: u32,
    pub solid: u32,
    pub material: u32,
    pub vertices: Vec<Vec3>,
    /// Unit normal; outward for closed solids.
    pub normal: Vec3,
    /// Slab facets reflect from both sides; box facets only from outside.
    pub two_sided: bool,
    // Local frame and 2D vertices for containment tests.
    u_axis: Vec3,
    v_axis: Vec3,
    verts2d: Vec<(f64, f64)>,
    plane_d: f64,
}

impl Facet {
    /// Signed distance of `p` from the facet plane.
    pub fn plane_distance(&self, p: Vec3) -> f64 {
        p.dot(self.normal) - self.plane_d
    }

    /// Is the on-plane point inside the polygon (inclusive within
    /// [`BOUNDARY_TOL`])?
    pub fn contains_on_plane(&self, p: Vec3) -> bool {
        let rel = p - self.vertices[0];
        let (px, py) = (rel.dot(self.u_axis), rel.dot(self.v_axis));
        // Boundary proximity counts as inside.
        let n = self.verts2d.len();
        for i in 0..n {
            let (ax, ay) = self.verts2d[i];
            let (bx, by) = self.verts2d[(i + 1) % n];
            let (ex, ey) = (bx - ax, by - ay);
            let len_sq = ex * ex + ey * ey;
            let t = if len_sq > 0.0 {
                (((px - ax) * ex + (py - ay) * ey) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (dx, dy) = (px - (ax + t * ex), py - (ay + t * ey));
            if (dx * dx + dy * dy).sqrt() <= BOUNDARY_TOL {
                return true;
            }
        }
        // Even-odd crossing test.
        let mut inside = false;
        for i in 0..n {
            let (ax, ay) = self.verts2d[i];
            let (bx, by) = self.verts2d[(i + 1) % n];
            if (ay > py) != (by > py) {
                let x_cross = ax + (py - ay) / (by - ay) * (bx - ax);
                if px < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn aabb(&self) -> Aabb {
        let mut bb = Aabb::new(self.vertices[0], self.vertices[0]);
        for v in &self.vertices[1..] {
            bb = bb.union(&Aabb::new(*v, *v));
        }
        bb
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::ZERO;
        for v in &self.vertices {
            c = c + *v;
        }
        c / self.vertices.len() as f64
    }
}

/// Reflection of `p` across the facet plane.
pub fn mirror_point(p: Vec3, facet: &Facet) -> Vec3 {
    p - facet.normal * (2.0 * facet.plane_distance(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SolidShape {
    /// Closed axis-aligned box.
    Closed,
    /// Thin wall; through-transmission uses this thickness.
    Slab { thickness: f64 },
}

#[derive(Debug, Clone)]
struct SolidInfo {
    name: String,
    shape: SolidShape,
    aabb: Aabb,
    first_facet: u32,
    facet_count: u32,
}

/// Exterior edge where two facets of one solid meet; the diffraction
/// geometry unit. For slab boundary (knife) edges the two faces coincide
/// and the exterior angle is 2*pi.
#[derive(Debug, Clone)]
pub struct Wedge {
    pub edge: (Vec3, Vec3),
    pub face_a: u32,
    pub face_b: u32,
    /// Angle of the air region around the edge, in (pi, 2*pi].
    pub exterior_angle: f64,
    pub materials: (u32, u32),
    /// Unit edge direction.
    pub edge_dir: Vec3,
    /// In-face tangent of face a (the reference face for angles).
    pub tangent_a: Vec3,
    /// Normal of face a, oriented toward the exterior region.
    pub normal_a: Vec3,
}

impl Wedge {
    pub fn midpoint(&self) -> Vec3 {
        (self.edge.0 + self.edge.1) * 0.5
    }

    pub fn length(&self) -> f64 {
        (self.edge.1 - self.edge.0).norm()
    }

    /// Angle of `p` around the edge, measured from face a through the
    /// exterior region, in [0, 2*pi). Valid positions lie in
    /// (0, exterior_angle).
    pub fn azimuth_of(&self, p: Vec3) -> f64 {
        let rel = p - self.edge.0;
        let perp = rel - self.edge_dir * rel.dot(self.edge_dir);
        let x = perp.dot(self.tangent_a);
        let y = perp.dot(self.normal_a);
        let phi = y.atan2(x);
        if phi < 0.0 {
            phi + 2.0 * std::f64::consts::PI
        } else {
            phi
        }
    }
}

/// Immutable facet/wedge index over an expanded scene.
#[derive(Debug)]
pub struct Geometry {
    pub frequency_ghz: f64,
    pub bounds: Aabb,
    facets: Vec<Facet>,
    solids: Vec<SolidInfo>,
    materials: Vec<Material>,
    wedges: Vec<Wedge>,
    bvh: Bvh,
}

impl Geometry {
    /// Build the kernel from an expanded scene (no racks left).
    pub fn build(scene: &Scene) -> Result<Geometry> {
        if !scene.racks.is_empty() {
            return Err(Error::InvalidInput(
                "geometry requires an expanded scene; call Scene::expand_racks first".into(),
            ));
        }
        let materials = scene.materials.clone();
        let mat_index = |name: &str| -> Result<u32> {
            materials
                .iter()
                .position(|m| m.name == name)
                .map(|i| i as u32)
                .ok_or_else(|| Error::Validation(format!("unknown material '{name}'")))
        };

        let mut facets: Vec<Facet> = Vec::new();
        let mut solids: Vec<SolidInfo> = Vec::new();
        for (si, solid) in scene.solids.iter().enumerate() {
            let mat = mat_index(&solid.material)?;
            let first = facets.len() as u32;
            match &solid.kind {
                SolidKind::Box { center, size } => {
                    let lo = *center - *size * 0.5;
                    let (dx, dy, dz) = (size.x, size.y, size.z);
                    let ex = Vec3::new(dx, 0.0, 0.0);
                    let ey = Vec3::new(0.0, dy, 0.0);
                    let ez = Vec3::new(0.0, 0.0, dz);
                    let hi_x = lo + ex;
                    let hi_y = lo + ey;
                    let hi_z = lo + ez;
                    // (corner, edge1, edge2) with normal = e1 x e2 outward.
                    let rects = [
                        (lo, ez, ey),   // -x
                        (hi_x, ey, ez), // +x
                        (lo, ex, ez),   // -y
                        (hi_y, ez, ex), // +y
                        (lo, ey, ex),   // -z
                        (hi_z, ex, ey), // +z
                    ];
                    for (corner, e1, e2) in rects {
                        facets.push(make_facet(
                            facets.len() as u32,
                            si as u32,
                            mat,
                            vec![corner, corner + e1, corner + e1 + e2, corner + e2],
                            false,
                        )?);
                    }
                    solids.push(SolidInfo {
                        name: solid.id.clone(),
                        shape: SolidShape::Closed,
                        aabb: solid.aabb(),
                        first_facet: first,
                        facet_count: 6,
                    });
                }
                SolidKind::PlanarSlab { vertices, thickness_m } => {
                    facets.push(make_facet(
                        facets.len() as u32,
                        si as u32,
                        mat,
                        vertices.clone(),
                        true,
                    )?);
                    solids.push(SolidInfo {
                        name: solid.id.clone(),
                        shape: SolidShape::Slab { thickness: *thickness_m },
                        aabb: solid.aabb(),
                        first_facet: first,
                        facet_count: 1,
                    });
                }
            }
        }

        let boxes: Vec<Aabb> = facets.iter().map(|f| f.aabb().expand(BOUNDARY_TOL)).collect();
        let bvh = Bvh::build(&boxes);
        let mut geo = Geometry {
            frequency_ghz: scene.frequency_ghz,
            bounds: scene.bounds,
            facets,
            solids,
            materials,
            wedges: Vec::new(),
            bvh,
        };
        geo.wedges = geo.enumerate_wedges();
        Ok(geo)
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, id: u32) -> &Facet {
        &self.facets[id as usize]
    }

    pub fn wedges(&self) -> &[Wedge] {
        &self.wedges
    }

    pub fn material(&self, idx: u32) -> &Material {
        &self.materials[idx as usize]
    }

    pub fn facet_material(&self, facet: u32) -> &Material {
        self.material(self.facet(facet).material)
    }

    pub fn solid_name(&self, idx: u32) -> &str {
        &self.solids[idx as usize].name
    }

    /// Material index of a solid (all its facets share it).
    pub fn solid_material(&self, idx: u32) -> u32 {
        self.facets[self.solids[idx as usize].first_facet as usize].material
    }

    pub fn solid_count(&self) -> usize {
        self.solids.len()
    }

    /// All facet crossings strictly between `a` and `b`, ordered by
    /// distance from `a` (ties by facet id).
    pub fn segment_hits(&self, a: Vec3, b: Vec3) -> Result<Vec<Hit>> {
        let d = b - a;
        let len = d.norm();
        if len < 1e-12 {
            return Err(Error::InvalidInput("degenerate segment (a == b)".into()));
        }
        let dir = d / len;
        let mut hits: Vec<Hit> = Vec::new();
        self.bvh.for_segment(a, b, &mut |fi| {
            let f = &self.facets[fi as usize];
            let denom = dir.dot(f.normal);
            if denom.abs() < 1e-14 {
                return;
            }
            let s = -(a.dot(f.normal) - f.plane_d) / denom;
            if s <= ENDPOINT_EPS || s >= len - ENDPOINT_EPS {
                return;
            }
            let p = a + dir * s;
            if !f.contains_on_plane(p) {
                return;
            }
            let entry_exit = if denom < 0.0 {
                EntryExit::Entering
            } else {
                EntryExit::Exiting
            };
            hits.push(Hit { facet: fi, distance: s, entry_exit, normal: f.normal });
        });
        hits.sort_by(|x, y| {
            x.distance
                .partial_cmp(&y.distance)
                .unwrap()
                .then(x.facet.cmp(&y.facet))
        });
        Ok(hits)
    }

    /// Brute-force variant of [`Geometry::segment_hits`] (no BVH); used to
    /// verify that acceleration does not change results.
    pub fn segment_hits_brute(&self, a: Vec3, b: Vec3) -> Result<Vec<Hit>> {
        let d = b - a;
        let len = d.norm();
        if len < 1e-12 {
            return Err(Error::InvalidInput("degenerate segment (a == b)".into()));
        }
        let dir = d / len;
        let mut hits: Vec<Hit> = Vec::new();
        for f in &self.facets {
            let denom = dir.dot(f.normal);
            if denom.abs() < 1e-14 {
                continue;
            }
            let s = -(a.dot(f.normal) - f.plane_d) / denom;
            if s <= ENDPOINT_EPS || s >= len - ENDPOINT_EPS {
                continue;
            }
            let p = a + dir * s;
            if !f.contains_on_plane(p) {
                continue;
            }
            let entry_exit = if denom < 0.0 {
                EntryExit::Entering
            } else {
                EntryExit::Exiting
            };
            hits.push(Hit { facet: f.id, distance: s, entry_exit, normal: f.normal });
        }
        hits.sort_by(|x, y| {
            x.distance
                .partial_cmp(&y.distance)
                .unwrap()
                .then(x.facet.cmp(&y.facet))
        });
        Ok(hits)
    }

    /// Strict geometric visibility: no facet crossing between the points.
    pub fn is_los(&self, a: Vec3, b: Vec3) -> Result<bool> {
        Ok(self.segment_hits(a, b)?.is_empty())
    }

    /// Material path lengths through solids crossed by the segment, sorted
    /// by solid index.
    ///
    /// Closed solids contribute the enter-to-exit chord (clipped to the
    /// segment when an endpoint lies inside); slabs contribute
    /// `thickness / cos(incidence)` per crossing.
    pub fn penetration_lengths(&self, a: Vec3, b: Vec3) -> Result<Vec<Penetration>> {
        let hits = self.segment_hits(a, b)?;
        let len = (b - a).norm();
        let dir = (b - a) / len;
        let mut chords: std::collections::BTreeMap<u32, (f64, f64)> = Default::default();
        // Per-solid entry distance for open intervals.
        let mut open: std::collections::HashMap<u32, f64> = Default::default();
        let mut crossed: std::collections::HashSet<u32> = Default::default();
        for h in &hits {
            let f = &self.facets[h.facet as usize];
            let si = f.solid;
            crossed.insert(si);
            match self.solids[si as usize].shape {
                SolidShape::Slab { thickness } => {
                    let cos = dir.dot(f.normal).abs().max(SLAB_COS_FLOOR);
                    let e = chords.entry(si).or_insert((0.0, h.distance));
                    e.0 += thickness / cos;
                }
                SolidShape::Closed => match h.entry_exit {
                    EntryExit::Entering => {
                        open.entry(si).or_insert(h.distance);
                    }
                    EntryExit::Exiting => {
                        let start = open.remove(&si).unwrap_or(0.0);
                        let e = chords.entry(si).or_insert((0.0, start));
                        e.0 += h.distance - start;
                    }
                },
            }
        }
        // Segments ending inside a solid.
        for (si, start) in open {
            let e = chords.entry(si).or_insert((0.0, start));
            e.0 += len - start;
        }
        // Segments fully inside a solid produce no hits at all.
        for (si, info) in self.solids.iter().enumerate() {
            let si = si as u32;
            if crossed.contains(&si) || info.shape != SolidShape::Closed {
                continue;
            }
            if info.aabb.contains(a, 0.0) && info.aabb.contains(b, 0.0) {
                chords.insert(si, (len, 0.0));
            }
        }
        Ok(chords
            .into_iter()
            .map(|(solid, (length, at))| Penetration { solid, length, entry: a + dir * at })
            .collect())
    }

    /// Is `p` strictly inside the volume of a solid (with `margin` shrink)?
    fn inside_solid(&self, si: u32, p: Vec3, margin: f64) -> bool {
        let info = &self.solids[si as usize];
        match info.shape {
            SolidShape::Closed => {
                let bb = info.aabb;
                p.x > bb.min.x + margin
                    && p.x < bb.max.x - margin
                    && p.y > bb.min.y + margin
                    && p.y < bb.max.y - margin
                    && p.z > bb.min.z + margin
                    && p.z < bb.max.z - margin
            }
            SolidShape::Slab { thickness } => {
                let f = &self.facets[info.first_facet as usize];
                if f.plane_distance(p).abs() > thickness / 2.0 {
                    return false;
                }
                let on_plane = p - f.normal * f.plane_distance(p);
                f.contains_on_plane(on_plane)
            }
        }
    }

    fn inside_any_other_solid(&self, exclude: u32, p: Vec3, margin: f64) -> bool {
        (0..self.solids.len() as u32)
            .any(|si| si != exclude && self.inside_solid(si, p, margin))
    }

    /// Convex exterior edges usable as diffraction wedges.
    ///
    /// Each edge shared by two facets of a closed solid appears once when
    /// its exterior angle exceeds pi and both faces are exposed near the
    /// edge (edges buried in or coincident with neighboring solids are
    /// dropped). Slab polygon boundaries yield knife edges (exterior angle
    /// 2*pi).
    fn enumerate_wedges(&self) -> Vec<Wedge> {
        let mut wedges = Vec::new();
        for (si, info) in self.solids.iter().enumerate() {
            let si = si as u32;
            match info.shape {
                SolidShape::Closed => {
                    self.closed_solid_wedges(si, info, &mut wedges);
                }
                SolidShape::Slab { .. } => {
                    let f = &self.facets[info.first_facet as usize];
                    let nverts = f.vertices.len();
                    for i in 0..nverts {
                        let p0 = f.vertices[i];
                        let p1 = f.vertices[(i + 1) % nverts];
                        if let Some(w) = self.knife_edge(f, p0, p1) {
                            wedges.push(w);
                        }
                    }
                }
            }
        }
        wedges
    }

    fn closed_solid_wedges(&self, si: u32, info: &SolidInfo, out: &mut Vec<Wedge>) {
        let facets: Vec<&Facet> = (info.first_facet..info.first_facet + info.facet_count)
            .map(|i| &self.facets[i as usize])
            .collect();
        type EdgeKey = ((i64, i64, i64), (i64, i64, i64));
        let quant = |v: Vec3| -> (i64, i64, i64) {
            (
                (v.x * 1e7).round() as i64,
                (v.y * 1e7).round() as i64,
                (v.z * 1e7).round() as i64,
            )
        };
        // edge key -> (facet id, endpoints)
        let mut edge_map: std::collections::HashMap<EdgeKey, Vec<(u32, Vec3, Vec3)>> =
            Default::default();
        for f in &facets {
            let n = f.vertices.len();
            for i in 0..n {
                let a = f.vertices[i];
                let b = f.vertices[(i + 1) % n];
                let (ka, kb) = (quant(a), quant(b));
                let key = if ka <= kb { (ka, kb) } else { (kb, ka) };
                edge_map.entry(key).or_default().push((f.id, a, b));
            }
        }
        let mut entries: Vec<_> = edge_map.into_iter().collect();
        entries.sort_by_key(|(k, _)| *k);
        for (_, users) in entries {
            if users.len() != 2 {
                continue;
            }
            let (fa_id, a0, a1) = users[0];
            let (fb_id, _, _) = users[1];
            if let Some(w) = self.solid_edge_wedge(si, fa_id, fb_id, a0, a1) {
                out.push(w);
            }
        }
    }

    fn solid_edge_wedge(
        &self,
        si: u32,
        fa_id: u32,
        fb_id: u32,
        p0: Vec3,
        p1: Vec3,
    ) -> Option<Wedge> {
        let fa = &self.facets[fa_id as usize];
        let fb = &self.facets[fb_id as usize];
        let edge_dir = (p1 - p0).normalized()?;
        let mid = (p0 + p1) * 0.5;
        // In-face tangents perpendicular to the edge, pointing into each face.
        let tangent_into = |f: &Facet| -> Option<Vec3> {
            let t = f.normal.cross(edge_dir);
            let t = t.normalized()?;
            // Orient toward the facet interior.
            if (f.centroid() - mid).dot(t) >= 0.0 {
                Some(t)
            } else {
                Some(-t)
            }
        };
        let ta = tangent_into(fa)?;
        let tb = tangent_into(fb)?;
        // Interior dihedral: angle of tb from ta, rotating through the
        // material side (-normal_a).
        let x = tb.dot(ta);
        let y = tb.dot(fa.normal);
        let mut interior = (-y).atan2(x);
        if interior < 0.0 {
            interior += 2.0 * std::f64::consts::PI;
        }
        let exterior = 2.0 * std::f64::consts::PI - interior;
        if exterior <= std::f64::consts::PI + 1e-9 {
            return None; // flat or concave
        }
        // Exposure: the edge midpoint must not be buried, and both faces
        // must be uncovered just off the edge.
        if self.inside_any_other_solid(si, mid, PROBE_DELTA / 2.0) {
            return None;
        }
        for (f, t) in [(fa, ta), (fb, tb)] {
            let probe = mid + t * PROBE_DELTA + f.normal * PROBE_DELTA;
            if self.inside_any_other_solid(si, probe, 0.0) {
                return None;
            }
        }
        Some(Wedge {
            edge: (p0, p1),
            face_a: fa_id,
            face_b: fb_id,
            exterior_angle: exterior,
            materials: (fa.material, fb.material),
            edge_dir,
            tangent_a: ta,
            normal_a: fa.normal,
        })
    }

    fn knife_edge(&self, f: &Facet, p0: Vec3, p1: Vec3) -> Option<Wedge> {
        let edge_dir = (p1 - p0).normalized()?;
        let mid = (p0 + p1) * 0.5;
        let t = f.normal.cross(edge_dir).normalized()?;
        let ta = if (f.centroid() - mid).dot(t) >= 0.0 { t } else { -t };
        if self.inside_any_other_solid(f.solid, mid, PROBE_DELTA / 2.0) {
            return None;
        }
        Some(Wedge {
            edge: (p0, p1),
            face_a: f.id,
            face_b: f.id,
            exterior_angle: 2.0 * std::f64::consts::PI,
            materials: (f.material, f.material),
            edge_dir,
            tangent_a: ta,
            normal_a: f.normal,
        })
    }
}

fn make_facet(
    id: u32,
    solid: u32,
    material: u32,
    vertices: Vec<Vec3>,
    two_sided: bool,
) -> Result<Facet> {
    let normal = polygon_normal(&vertices)
        .ok_or_else(|| Error::Validation(format!("facet {id}: degenerate polygon")))?;
    let u_axis = normal.any_perpendicular();
    let v_axis = normal.cross(u_axis);
    let origin = vertices[0];
    let verts2d = vertices
        .iter()
        .map(|v| {
            let rel = *v - origin;
            (rel.dot(u_axis), rel.dot(v_axis))
        })
        .collect();
    let plane_d = origin.dot(normal);
    Ok(Facet {
        id,
        solid,
        material,
        vertices,
        normal,
        two_sided,
        u_axis,
        v_axis,
        verts2d,
        plane_d,
    })
}
