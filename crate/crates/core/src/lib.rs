//! Deterministic indoor radio propagation and 5G coverage planning.
//!
//! The crate models a factory-scale indoor scenario as a 3D scene of
//! facet-decomposed solids, predicts received power with a
//! shooting-and-bouncing-rays engine (Fresnel reflections, UTD edge
//! diffraction, per-meter transmission loss), offers the 3GPP TR 38.901
//! Indoor Factory SH path-loss model as an alternative backend, calibrates
//! the ray-tracing output against power measurements, and selects access
//! points to meet an SS-RSRP coverage target.
//!
//! Main entry points:
//!
//! - [`scene::Scene::load`] — read and validate a scenario JSON file.
//! - [`geometry::Geometry::build`] — facet/wedge kernel for ray queries.
//! - [`rt`] — path tracing, per-path gains, and channel-gain grids.
//! - [`tr38901`] — InF-SH path loss with deterministic LoS and shadow fading.
//! - [`calibration`] — measurement ingestion, error statistics, (A, B) fit.
//! - [`planner`] — link budget, RSRP grids, coverage rates, AP selection.

pub mod calibration;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod io;
pub mod math;
pub mod planner;
pub mod rt;
pub mod scene;
pub mod tr38901;

pub use error::{Error, Result};
pub use math::Vec3;
