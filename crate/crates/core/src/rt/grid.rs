//! Channel-gain grid prediction with the RT backend.

use crate::coverage::{CoverageGrid, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::rt::{aggregate_channel_gain, apply_tuning, trace_to_points, RtConfig, TuningParams};
use crate::scene::Node;

/// Channel gain (dB, antennas excluded) at every pixel: incoherent sum of
/// traced path gains with the (A, B) tuning applied per pixel distance.
pub fn predict_grid(
    geo: &Geometry,
    tx: &Node,
    spec: &GridSpec,
    cfg: &RtConfig,
    tuning: &TuningParams,
    mask: Option<&[[f64; 2]]>,
) -> Result<CoverageGrid> {
    validate_grid_in_bounds(geo, spec)?;
    let points = spec.points();
    let paths = trace_to_points(geo, tx.position, &points, cfg)?;
    let mut values = Vec::with_capacity(points.len());
    for (p, rx) in paths.iter().zip(&points) {
        let untuned = aggregate_channel_gain(p);
        let d3d = (*rx - tx.position).norm();
        let tuned = if untuned.is_finite() {
            apply_tuning(untuned, d3d, tuning)?
        } else {
            untuned
        };
        values.push(tuned);
    }
    let mask = CoverageGrid::polygon_mask(spec, mask);
    CoverageGrid::new(spec.clone(), values, mask)
}

pub(crate) fn validate_grid_in_bounds(geo: &Geometry, spec: &GridSpec) -> Result<()> {
    if spec.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let b = geo.bounds;
    let first = spec.point(0, 0);
    let last = spec.point(spec.nx - 1, spec.ny - 1);
    let tol = spec.resolution_m;
    if first.x < b.min.x - tol
        || first.y < b.min.y - tol
        || last.x > b.max.x + tol
        || last.y > b.max.y + tol
        || spec.height_m < b.min.z
        || spec.height_m > b.max.z
    {
        return Err(Error::InvalidInput(
            "grid extends outside the scene bounds".into(),
        ));
    }
    Ok(())
}
