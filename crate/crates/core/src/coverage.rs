//! Rasterized prediction grids shared by the RT, InF, and planning layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

/// Horizontal pixel grid at a fixed receiver height. Pixel centers are at
/// `origin + (i + 0.5) * resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub resolution_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub height_m: f64,
}

impl GridSpec {
    /// Grid covering the xy footprint of `bounds` at the given resolution.
    pub fn from_bounds(bounds: &Aabb, resolution_m: f64, height_m: f64) -> Result<GridSpec> {
        if resolution_m <= 0.0 {
            return Err(Error::InvalidInput("grid resolution must be > 0".into()));
        }
        let nx = ((bounds.max.x - bounds.min.x) / resolution_m).ceil() as usize;
        let ny = ((bounds.max.y - bounds.min.y) / resolution_m).ceil() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        Ok(GridSpec {
            origin: [bounds.min.x, bounds.min.y],
            resolution_m,
            nx,
            ny,
            height_m,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of pixel `(ix, iy)` in 3D.
    pub fn point(&self, ix: usize, iy: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + (ix as f64 + 0.5) * self.resolution_m,
            self.origin[1] + (iy as f64 + 0.5) * self.resolution_m,
            self.height_m,
        )
    }

    pub fn point_of_index(&self, idx: usize) -> Vec3 {
        self.point(idx % self.nx, idx / self.nx)
    }

    /// All pixel centers in row-major order.
    pub fn points(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.point_of_index(i)).collect()
    }
}

/// Scalar raster (dB or dBm) over a [`GridSpec`], with a mask marking
/// target-area pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageGrid {
    pub spec: GridSpec,
    /// Row-major values; `-inf` marks pixels with no signal.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl CoverageGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>, mask: Vec<bool>) -> Result<CoverageGrid> {
        if values.len() != spec.len() || mask.len() != spec.len() {
            return Err(Error::InvalidInput(
                "values/mask shape does not match the grid spec".into(),
            ));
        }
        Ok(CoverageGrid { spec, values, mask })
    }

    /// Full-mask grid.
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<CoverageGrid> {
        let mask = vec![true; spec.len()];
        CoverageGrid::new(spec, values, mask)
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.nx + ix]
    }

    /// Same grid with `offset` added to every value.
    pub fn offset(&self, offset: f64) -> CoverageGrid {
        CoverageGrid {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| v + offset).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Pixelwise maximum of several grids over a common spec.
    pub fn best_server(grids: &[&CoverageGrid]) -> Result<CoverageGrid> {
        let first = grids
            .first()
            .ok_or_else(|| Error::InvalidInput("best_server needs at least one grid".into()))?;
        let mut values = vec![f64::NEG_INFINITY; first.spec.len()];
        for g in grids {
            if g.spec != first.spec {
                return Err(Error::InvalidInput("grids have mismatched specs".into()));
            }
            for (v, gv) in values.iter_mut().zip(&g.values) {
                if *gv > *v {
                    *v = *gv;
                }
            }
        }
        Ok(CoverageGrid { spec: first.spec.clone(), values, mask: first.mask.clone() })
    }

    /// Mask from a target-area polygon in the xy plane (pixel centers
    /// inside the polygon). `None` keeps the full mask.
    pub fn polygon_mask(spec: &GridSpec, polygon: Option<&[[f64; 2]]>) -> Vec<bool> {
        match polygon {
            None => vec![true; spec.len()],
            Some(poly) => (0..spec.len())
                .map(|i| {
                    let p = spec.point_of_index(i);
                    point_in_polygon_2d(p.x, p.y, poly)
                })
                .collect(),
        }
    }
}

/// Even-odd containment test in 2D.
pub fn point_in_polygon_2d(x: f64, y: f64, poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let [ax, ay] = poly[i];
        let [bx, by] = poly[(i + 1) % n];
        if (ay > y) != (by > y) {
            let xc = ax + (y - ay) / (by - ay) * (bx - ax);
            if x < xc {
                inside = !inside;
            }
        }
    }
    inside
}
