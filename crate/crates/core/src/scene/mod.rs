//! Scenario model: solids, racks, antennas, nodes, and the scenario file.
//!
//! A scenario JSON document carries `bounds`, `frequency_ghz`, `materials`,
//! `solids`, `racks`, and `nodes` (lengths in meters, angles in degrees),
//! plus optional `target_area`, `propagation`, and `plan` sections consumed
//! by the prediction and planning layers. Materials are referenced by name;
//! names missing from the scenario's own list are resolved against the
//! built-in catalog.

mod antenna;
mod config;
mod material;

pub use antenna::{AntennaModel, AntennaPattern, HorizontalPattern, HALF_WAVE_DIPOLE_PEAK_DBI};
pub use config::{PlanSection, PropagationModelKind, PropagationSection};
pub use material::{default_catalog, load_material_catalog, Material};

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

/// Tolerance for the polygon coplanarity check, in meters.
const COPLANAR_TOL: f64 = 1e-6;

/// Rack frame geometry: corner post cross-section and shelf plate thickness.
const POST_SIDE_M: f64 = 0.05;
const SHELF_THICKNESS_M: f64 = 0.02;
/// Stored boxes fill this fraction of their slot cell footprint and height.
const SLOT_FILL_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolidKind {
    /// Axis-aligned box given by center and size.
    Box { center: Vec3, size: Vec3 },
    /// Planar polygon (wall, floor, panel) with a wall thickness used for
    /// through-transmission loss.
    PlanarSlab {
        vertices: Vec<Vec3>,
        #[serde(default = "default_slab_thickness")]
        thickness_m: f64,
    },
}

fn default_slab_thickness() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solid {
    pub id: String,
    #[serde(flatten)]
    pub kind: SolidKind,
    /// Material name, resolved against the scenario catalog.
    pub material: String,
}

impl Solid {
    pub fn boxed(id: &str, center: Vec3, size: Vec3, material: &str) -> Self {
        Solid {
            id: id.to_string(),
            kind: SolidKind::Box { center, size },
            material: material.to_string(),
        }
    }

    pub fn slab(id: &str, vertices: Vec<Vec3>, thickness_m: f64, material: &str) -> Self {
        Solid {
            id: id.to_string(),
            kind: SolidKind::PlanarSlab { vertices, thickness_m },
            material: material.to_string(),
        }
    }

    /// Number of planar facets this solid decomposes into.
    pub fn facet_count(&self) -> usize {
        match self.kind {
            SolidKind::Box { .. } => 6,
            SolidKind::PlanarSlab { .. } => 1,
        }
    }

    pub fn aabb(&self) -> Aabb {
        match &self.kind {
            SolidKind::Box { center, size } => {
                Aabb::new(*center - *size * 0.5, *center + *size * 0.5)
            }
            SolidKind::PlanarSlab { vertices, .. } => {
                let mut bb = Aabb::new(vertices[0], vertices[0]);
                for v in vertices.iter().skip(1) {
                    bb = bb.union(&Aabb::new(*v, *v));
                }
                bb
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            SolidKind::Box { size, .. } => {
                if size.x <= 0.0 || size.y <= 0.0 || size.z <= 0.0 {
                    return Err(Error::Validation(format!(
                        "solid '{}': box extents must be strictly positive",
                        self.id
                    )));
                }
            }
            SolidKind::PlanarSlab { vertices, thickness_m } => {
                if vertices.len() < 3 {
                    return Err(Error::Validation(format!(
                        "solid '{}': polygon needs at least 3 vertices",
                        self.id
                    )));
                }
                if *thickness_m < 0.0 {
                    return Err(Error::Validation(format!(
                        "solid '{}': thickness must be >= 0",
                        self.id
                    )));
                }
                let n = polygon_normal(vertices).ok_or_else(|| {
                    Error::Validation(format!("solid '{}': degenerate polygon", self.id))
                })?;
                for v in vertices {
                    let d = (*v - vertices[0]).dot(n).abs();
                    if d > COPLANAR_TOL {
                        return Err(Error::Validation(format!(
                            "solid '{}': polygon vertices not coplanar (off-plane by {d:.2e} m)",
                            self.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Unit normal of a (nearly) planar polygon via the Newell method.
pub fn polygon_normal(vertices: &[Vec3]) -> Option<Vec3> {
    let mut n = Vec3::ZERO;
    for i in 0..vertices.len() {
        let a = vertices[i];
        let b = vertices[(i + 1) % vertices.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n.normalized()
}

/// Storage rack: a frame subdivided into `cols x rows x levels` box slots,
/// a seeded fraction of which holds a stored box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rack {
    pub id: String,
    pub center: Vec3,
    pub size: Vec3,
    /// Slot subdivisions along x (cols), y (rows), z (levels).
    pub cols: u32,
    pub rows: u32,
    pub levels: u32,
    /// Filled fraction of slots in `[0, 1]`.
    pub occupancy: f64,
    /// Seed for the slot fill pattern; when omitted it is derived from the
    /// run seed and the rack's position in the list.
    #[serde(default)]
    pub fill_seed: Option<u64>,
    pub box_material: String,
    #[serde(default = "default_frame_material")]
    pub frame_material: String,
}

fn default_frame_material() -> String {
    "metal".to_string()
}

impl Rack {
    pub fn slot_count(&self) -> usize {
        (self.cols * self.rows * self.levels) as usize
    }

    pub fn filled_slot_count(&self) -> usize {
        (self.occupancy * self.slot_count() as f64).round() as usize
    }

    /// Number of solids the rack expands into: 4 posts, `levels + 1`
    /// shelves, one box per filled slot.
    pub fn expanded_solid_count(&self) -> usize {
        4 + self.levels as usize + 1 + self.filled_slot_count()
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.occupancy) {
            return Err(Error::Validation(format!(
                "rack '{}': occupancy must be in [0, 1], got {}",
                self.id, self.occupancy
            )));
        }
        if self.cols == 0 || self.rows == 0 || self.levels == 0 {
            return Err(Error::Validation(format!(
                "rack '{}': slot grid dimensions must be >= 1",
                self.id
            )));
        }
        if self.size.x <= 0.0 || self.size.y <= 0.0 || self.size.z <= 0.0 {
            return Err(Error::Validation(format!(
                "rack '{}': frame extents must be strictly positive",
                self.id
            )));
        }
        Ok(())
    }

    /// Deterministic filled-slot indices: a seeded shuffle of all slot
    /// indices, truncated to the filled count and sorted.
    fn filled_slots(&self, seed: u64) -> Vec<usize> {
        let total = self.slot_count();
        let mut indices: Vec<usize> = (0..total).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let mut filled: Vec<usize> = indices.into_iter().take(self.filled_slot_count()).collect();
        filled.sort_unstable();
        filled
    }

    /// Frame parts and filled slot boxes, as plain solids.
    fn expand(&self, seed: u64) -> Vec<Solid> {
        let min = self.center - self.size * 0.5;
        let mut out = Vec::with_capacity(self.expanded_solid_count());

        // Corner posts, full height.
        let post = Vec3::new(POST_SIDE_M, POST_SIDE_M, self.size.z);
        for (k, (cx, cy)) in [
            (min.x + POST_SIDE_M / 2.0, min.y + POST_SIDE_M / 2.0),
            (min.x + self.size.x - POST_SIDE_M / 2.0, min.y + POST_SIDE_M / 2.0),
            (min.x + POST_SIDE_M / 2.0, min.y + self.size.y - POST_SIDE_M / 2.0),
            (
                min.x + self.size.x - POST_SIDE_M / 2.0,
                min.y + self.size.y - POST_SIDE_M / 2.0,
            ),
        ]
        .into_iter()
        .enumerate()
        {
            out.push(Solid::boxed(
                &format!("{}/post-{}", self.id, k),
                Vec3::new(cx, cy, min.z + self.size.z / 2.0),
                post,
                &self.frame_material,
            ));
        }

        // Shelf plates: levels + 1 of them, evenly spaced so the bottom
        // plate starts at the frame bottom and the top plate ends at the top.
        let pitch = (self.size.z - SHELF_THICKNESS_M) / self.levels as f64;
        for k in 0..=self.levels {
            let z0 = min.z + k as f64 * pitch;
            out.push(Solid::boxed(
                &format!("{}/shelf-{}", self.id, k),
                Vec3::new(
                    self.center.x,
                    self.center.y,
                    z0 + SHELF_THICKNESS_M / 2.0,
                ),
                Vec3::new(self.size.x, self.size.y, SHELF_THICKNESS_M),
                &self.frame_material,
            ));
        }

        // Stored boxes in the filled slots. Slot index = (level * rows +
        // row) * cols + col.
        let cell = Vec3::new(
            self.size.x / self.cols as f64,
            self.size.y / self.rows as f64,
            pitch,
        );
        let clear_h = pitch - SHELF_THICKNESS_M;
        for slot in self.filled_slots(seed) {
            let col = slot % self.cols as usize;
            let row = (slot / self.cols as usize) % self.rows as usize;
            let level = slot / (self.cols as usize * self.rows as usize);
            let base = Vec3::new(
                min.x + col as f64 * cell.x,
                min.y + row as f64 * cell.y,
                min.z + level as f64 * pitch + SHELF_THICKNESS_M,
            );
            let size = Vec3::new(
                cell.x * SLOT_FILL_FRACTION,
                cell.y * SLOT_FILL_FRACTION,
                clear_h * SLOT_FILL_FRACTION,
            );
            out.push(Solid::boxed(
                &format!("{}/box-{}", self.id, slot),
                base + Vec3::new(cell.x / 2.0, cell.y / 2.0, clear_h / 2.0),
                size,
                &self.box_material,
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Tx,
    Rx,
    CandidateSite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub position: Vec3,
    #[serde(default)]
    pub antenna: AntennaPattern,
    pub role: NodeRole,
    /// Transmit power for tx/candidate nodes, dBm.
    #[serde(default)]
    pub tx_power_dbm: Option<f64>,
}

/// The full scenario: geometry, materials, radio nodes, and model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bounds: Aabb,
    pub frequency_ghz: f64,
    #[serde(default)]
    pub materials: Vec<Material>,
    #[serde(default)]
    pub solids: Vec<Solid>,
    #[serde(default)]
    pub racks: Vec<Rack>,
    #[serde(default)]
    pub nodes: Vec<Node>,
    /// Planning/coverage mask polygon in the xy plane; defaults to the
    /// full bounds footprint.
    #[serde(default)]
    pub target_area: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub propagation: PropagationSection,
    #[serde(default)]
    pub plan: Option<PlanSection>,
}

impl Scene {
    /// Load and validate a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Scene> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_json(&text)
    }

    /// Parse and validate scenario JSON.
    pub fn from_json(text: &str) -> Result<Scene> {
        let mut scene: Scene = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("scenario JSON: {e}")))?;
        scene.resolve_catalog_materials();
        scene.validate()?;
        Ok(scene)
    }

    /// Pull referenced-but-undeclared materials in from the built-in catalog.
    fn resolve_catalog_materials(&mut self) {
        let declared: HashSet<String> =
            self.materials.iter().map(|m| m.name.clone()).collect();
        let mut referenced: Vec<&str> = self
            .solids
            .iter()
            .map(|s| s.material.as_str())
            .chain(self.racks.iter().flat_map(|r| {
                [r.box_material.as_str(), r.frame_material.as_str()]
            }))
            .collect();
        referenced.sort_unstable();
        referenced.dedup();
        for name in referenced {
            if !declared.contains(name) {
                if let Some(m) = default_catalog().into_iter().find(|m| m.name == name) {
                    self.materials.push(m);
                }
            }
        }
    }

    pub fn material(&self, name: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.name == name)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequency_ghz <= 0.0 {
            return Err(Error::Validation(format!(
                "frequency_ghz must be > 0, got {}",
                self.frequency_ghz
            )));
        }
        let b = self.bounds;
        if b.min.x >= b.max.x || b.min.y >= b.max.y || b.min.z >= b.max.z {
            return Err(Error::Validation("bounds must have positive extent".into()));
        }

        let mut names = HashSet::new();
        for m in &self.materials {
            m.validate()?;
            if !names.insert(m.name.clone()) {
                return Err(Error::Validation(format!("duplicate material '{}'", m.name)));
            }
        }

        let mut ids = HashSet::new();
        for s in &self.solids {
            s.validate()?;
            if self.material(&s.material).is_none() {
                return Err(Error::Validation(format!(
                    "solid '{}' references unknown material '{}'",
                    s.id, s.material
                )));
            }
            if !ids.insert(s.id.clone()) {
                return Err(Error::Validation(format!("duplicate solid id '{}'", s.id)));
            }
        }
        for r in &self.racks {
            r.validate()?;
            for mat in [&r.box_material, &r.frame_material] {
                if self.material(mat).is_none() {
                    return Err(Error::Validation(format!(
                        "rack '{}' references unknown material '{}'",
                        r.id, mat
                    )));
                }
            }
            if !ids.insert(r.id.clone()) {
                return Err(Error::Validation(format!("duplicate rack id '{}'", r.id)));
            }
        }
        let mut node_ids = HashSet::new();
        for n in &self.nodes {
            n.antenna.validate().map_err(|e| {
                Error::Validation(format!("node '{}': {e}", n.id))
            })?;
            if !self.bounds.contains(n.position, 1e-9) {
                return Err(Error::Validation(format!(
                    "node '{}' lies outside the scene bounds",
                    n.id
                )));
            }
            if !node_ids.insert(n.id.clone()) {
                return Err(Error::Validation(format!("duplicate node id '{}'", n.id)));
            }
        }
        if let Some(poly) = &self.target_area {
            if poly.len() < 3 {
                return Err(Error::Validation(
                    "target_area polygon needs at least 3 vertices".into(),
                ));
            }
        }
        self.propagation.validate()?;
        Ok(())
    }

    /// Total facet count after rack expansion.
    pub fn facet_count_expanded(&self) -> usize {
        let solids: usize = self.solids.iter().map(Solid::facet_count).sum();
        let racks: usize = self.racks.iter().map(|r| r.expanded_solid_count() * 6).sum();
        solids + racks
    }

    /// Replace every rack by its frame solids plus one box solid per filled
    /// slot. Pure: same scene and seeds give an identical result.
    ///
    /// `run_seed` only fills in rack seeds that the scenario leaves unset
    /// (as `run_seed + rack index`); explicit `fill_seed`s win.
    pub fn expand_racks_seeded(&self, run_seed: u64) -> Scene {
        let mut out = self.clone();
        out.racks.clear();
        for (i, rack) in self.racks.iter().enumerate() {
            let seed = rack.fill_seed.unwrap_or(run_seed.wrapping_add(i as u64));
            out.solids.extend(rack.expand(seed));
        }
        out
    }

    /// [`Scene::expand_racks_seeded`] with the default run seed (42).
    pub fn expand_racks(&self) -> Scene {
        self.expand_racks_seeded(42)
    }

    /// Scene with all rack occupancies forced to `occupancy` (e.g. 1.0 for
    /// worst-case planning).
    pub fn with_rack_occupancy(&self, occupancy: f64) -> Scene {
        let mut out = self.clone();
        for r in &mut out.racks {
            r.occupancy = occupancy;
        }
        out
    }

    /// New scene whose solids matching `selector` carry `new_material`.
    /// The material is added to the catalog when missing. Errors when the
    /// selector matches nothing.
    pub fn swap_material<F>(&self, selector: F, new_material: &Material) -> Result<Scene>
    where
        F: Fn(&Solid) -> bool,
    {
        let matched: Vec<usize> = self
            .solids
            .iter()
            .enumerate()
            .filter(|(_, s)| selector(s))
            .map(|(i, _)| i)
            .collect();
        if matched.is_empty() {
            return Err(Error::Validation(format!(
                "material swap to '{}' matched no solid",
                new_material.name
            )));
        }
        new_material.validate()?;
        let mut out = self.clone();
        if out.material(&new_material.name).is_none() {
            out.materials.push(new_material.clone());
        } else if out.material(&new_material.name) != Some(new_material) {
            return Err(Error::Validation(format!(
                "material '{}' already exists with different properties",
                new_material.name
            )));
        }
        for i in matched {
            out.solids[i].material = new_material.name.clone();
        }
        Ok(out)
    }
}
