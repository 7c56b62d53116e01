//! File formats: measurement CSV, raster CSV, PGM heatmaps with sidecar
//! metadata, path dumps, and report structures.
//!
//! All writers format numbers deterministically so reruns produce
//! byte-identical outputs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{ErrorStats, ProcessedSample, RawTrace, TraceValidity};
use crate::coverage::CoverageGrid;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rt::{InteractionKind, PropagationPath, TuningParams};
use crate::scene::Scene;

/// Floor applied to `-inf` (no signal) values in rasters; sidecars record
/// it as `no_data_value`.
pub const NO_DATA_DB: f64 = -250.0;

/// Raw measurement CSV: header `tx_id,rx_id,x_m,y_m,z_m,sample_dbm`, one
/// row per instantaneous sample. Rows of one trace share `tx_id`/`rx_id`.
pub fn read_measurements_csv(path: impl AsRef<Path>) -> Result<Vec<RawTrace>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    {
        let headers = rdr.headers().map_err(|e| csv_error(path, e))?;
        let expect = ["tx_id", "rx_id", "x_m", "y_m", "z_m", "sample_dbm"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expect {
            return Err(Error::Parse(format!(
                "{}: expected header {expect:?}, got {got:?}",
                path.display()
            )));
        }
    }
    let mut traces: BTreeMap<(String, String), RawTrace> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = i + 2; // header is line 1
        let field = |idx: usize| -> Result<&str> {
            row.get(idx).ok_or_else(|| {
                Error::Parse(format!("{}: row {line}: missing column {idx}", path.display()))
            })
        };
        let num = |idx: usize, name: &str| -> Result<f64> {
            field(idx)?.parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {line}: bad {name} '{}'",
                    path.display(),
                    row.get(idx).unwrap_or("")
                ))
            })
        };
        let tx_id = field(0)?.to_string();
        let rx_id = field(1)?.to_string();
        let pos = Vec3::new(num(2, "x_m")?, num(3, "y_m")?, num(4, "z_m")?);
        let sample = num(5, "sample_dbm")?;
        let key = (tx_id.clone(), rx_id.clone());
        let trace = traces.entry(key).or_insert_with(|| RawTrace {
            tx_id,
            rx_id,
            position: pos,
            samples: Vec::new(),
            trajectory_length_m: 0.0,
        });
        if (trace.position - pos).norm() > 1e-6 {
            return Err(Error::Parse(format!(
                "{}: row {line}: rx '{}' position changed within a trace",
                path.display(),
                trace.rx_id
            )));
        }
        trace.samples.push(sample);
    }
    Ok(traces.into_values().collect())
}

/// Processed samples with `d3d` filled from the per-tx node positions.
/// Unknown `tx_id`s are an error naming the row's trace.
pub fn process_measurements(
    traces: &[RawTrace],
    scene: &Scene,
    rules: &TraceValidity,
) -> Result<Vec<ProcessedSample>> {
    traces
        .iter()
        .map(|t| {
            let tx = scene.node(&t.tx_id).ok_or_else(|| {
                Error::Validation(format!(
                    "measurement trace '{}/{}' references unknown tx node '{}'",
                    t.tx_id, t.rx_id, t.tx_id
                ))
            })?;
            let mut s = crate::calibration::filter_fast_fading_with(t, rules);
            s.d3d_m = (t.position - tx.position).norm();
            Ok(s)
        })
        .collect()
}

/// Processed-sample CSV:
/// `tx_id,rx_id,x_m,y_m,z_m,rxp_avg_dbm,valid`.
pub fn write_processed_csv(path: impl AsRef<Path>, samples: &[ProcessedSample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("tx_id,rx_id,x_m,y_m,z_m,rxp_avg_dbm,valid\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
            s.tx_id, s.rx_id, s.position.x, s.position.y, s.position.z, s.rxp_avg_dbm, s.valid
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Raster CSV: `x_m,y_m,value` per pixel center, row-major.
pub fn write_raster_csv(path: impl AsRef<Path>, grid: &CoverageGrid) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("x_m,y_m,value\n");
    for i in 0..grid.spec.len() {
        let p = grid.spec.point_of_index(i);
        let v = clamp_no_data(grid.values[i]);
        out.push_str(&format!("{:.6},{:.6},{:.6}\n", p.x, p.y, v));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn clamp_no_data(v: f64) -> f64 {
    if v.is_finite() {
        v.max(NO_DATA_DB)
    } else {
        NO_DATA_DB
    }
}

/// Sidecar describing the dB-to-gray mapping of a PGM heatmap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PgmSidecar {
    pub format: String,
    pub db_min: f64,
    pub db_max: f64,
    pub no_data_value: f64,
    pub no_data_gray: u8,
    pub width: usize,
    pub height: usize,
}

/// 8-bit binary PGM (P5) heatmap plus a JSON sidecar recording the
/// dB-to-gray mapping. Gray 0 marks no-data; 1..=255 span
/// `[db_min, db_max]` from the finite values.
pub fn write_pgm_with_sidecar(path: impl AsRef<Path>, grid: &CoverageGrid) -> Result<()> {
    let path = path.as_ref();
    let finite: Vec<f64> = grid
        .values
        .iter()
        .filter(|v| v.is_finite())
        .cloned()
        .collect();
    let (db_min, db_max) = if finite.is_empty() {
        (NO_DATA_DB, NO_DATA_DB + 1.0)
    } else {
        let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            (lo, lo + 1.0)
        } else {
            (lo, hi)
        }
    };
    let (w, h) = (grid.spec.nx, grid.spec.ny);
    let mut data = Vec::with_capacity(w * h);
    // PGM rows go top-down; grid rows go bottom-up (y increasing).
    for row in (0..h).rev() {
        for col in 0..w {
            let v = grid.values[row * w + col];
            let gray = if !v.is_finite() {
                0u8
            } else {
                let t = ((v - db_min) / (db_max - db_min)).clamp(0.0, 1.0);
                1 + (t * 254.0).round() as u8
            };
            data.push(gray);
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write!(file, "P5\n{w} {h}\n255\n").map_err(|e| Error::io(path, e))?;
    file.write_all(&data).map_err(|e| Error::io(path, e))?;

    let sidecar = PgmSidecar {
        format: "P5".to_string(),
        db_min,
        db_max,
        no_data_value: NO_DATA_DB,
        no_data_gray: 0,
        width: w,
        height: h,
    };
    let sidecar_path = path.with_extension("pgm.json");
    write_json(&sidecar_path, &sidecar)
}

/// Deterministic pretty-printed JSON writer.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// One path in the `trace` dump.
#[derive(Debug, Clone, Serialize)]
pub struct PathDumpEntry {
    pub interactions: Vec<PathDumpInteraction>,
    pub length_m: f64,
    pub gain_db: f64,
    pub departure: [f64; 3],
    pub arrival: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct PathDumpInteraction {
    pub kind: InteractionKind,
    pub target: String,
    pub point: [f64; 3],
    pub loss_db: f64,
}

/// Path dump for the `trace` command; targets are resolved to names.
pub fn path_dump(
    paths: &[PropagationPath],
    geo: &crate::geometry::Geometry,
) -> Vec<PathDumpEntry> {
    paths
        .iter()
        .map(|p| PathDumpEntry {
            interactions: p
                .interactions
                .iter()
                .map(|i| PathDumpInteraction {
                    kind: i.kind,
                    target: match i.kind {
                        InteractionKind::Reflection => format!(
                            "facet {} ({})",
                            i.target,
                            geo.solid_name(geo.facet(i.target).solid)
                        ),
                        InteractionKind::Transmission => {
                            format!("solid {} ({})", i.target, geo.solid_name(i.target))
                        }
                        InteractionKind::Diffraction => format!("wedge {}", i.target),
                    },
                    point: [i.point.x, i.point.y, i.point.z],
                    loss_db: i.loss_db,
                })
                .collect(),
            length_m: p.length_m,
            gain_db: p.gain_db,
            departure: [p.departure.x, p.departure.y, p.departure.z],
            arrival: [p.arrival.x, p.arrival.y, p.arrival.z],
        })
        .collect()
}

/// Stats report: per-AP and global error statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsReport {
    pub per_ap: BTreeMap<String, ErrorStats>,
    pub global: ErrorStats,
}

/// Calibration output: the fitted correction plus before/after stats.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub tuning: TuningParams,
    pub samples_total: usize,
    pub samples_valid: usize,
    pub before: StatsReport,
    pub after: StatsReport,
}

/// Plan report mirroring the coverage-rate table layout.
#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub selected: Vec<String>,
    pub achieved_coverage: f64,
    pub feasible: bool,
    pub margin_db: f64,
    pub rsrp_threshold_dbm: f64,
    pub coverage_target: f64,
    /// backend -> list of (threshold_dbm, coverage rate).
    pub coverage_rates: BTreeMap<String, Vec<(f64, f64)>>,
    pub observations: Vec<String>,
}

/// Reproducibility manifest written next to every command's outputs.
/// Thread count is deliberately excluded: it must not affect outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario_path: String,
    pub seed: u64,
    pub overrides: BTreeMap<String, String>,
    pub tool_version: String,
    pub timestamp: String,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::GridSpec;

    #[test]
    fn measurement_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(
            &path,
            "tx_id,rx_id,x_m,y_m,z_m,sample_dbm\n\
             AP1,r1,1.0,2.0,0.8,-61.0\n\
             AP1,r1,1.0,2.0,0.8,-59.0\n\
             AP1,r2,4.0,2.0,0.8,-70.0\n",
        )
        .unwrap();
        let traces = read_measurements_csv(&path).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].samples.len(), 2);
        assert_eq!(traces[1].rx_id, "r2");
    }

    #[test]
    fn bad_header_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "tx,rx,x,y,z,p\nAP1,r1,0,0,0,-60\n").unwrap();
        assert!(read_measurements_csv(&path).is_err());
    }

    #[test]
    fn bad_number_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(
            &path,
            "tx_id,rx_id,x_m,y_m,z_m,sample_dbm\nAP1,r1,1.0,2.0,0.8,oops\n",
        )
        .unwrap();
        let err = read_measurements_csv(&path).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn pgm_is_deterministic() {
        let spec = GridSpec {
            origin: [0.0, 0.0],
            resolution_m: 1.0,
            nx: 4,
            ny: 3,
            height_m: 1.5,
        };
        let values: Vec<f64> = (0..12)
            .map(|i| if i == 5 { f64::NEG_INFINITY } else { -100.0 + i as f64 })
            .collect();
        let grid = CoverageGrid::from_values(spec, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.pgm");
        let p2 = dir.path().join("b.pgm");
        write_pgm_with_sidecar(&p1, &grid).unwrap();
        write_pgm_with_sidecar(&p2, &grid).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let sidecar: PgmSidecar = read_json(p1.with_extension("pgm.json")).unwrap();
        assert_eq!(sidecar.no_data_gray, 0);
        assert_eq!((sidecar.width, sidecar.height), (4, 3));
    }

    #[test]
    fn raster_csv_headers_and_rows() {
        let spec = GridSpec {
            origin: [0.0, 0.0],
            resolution_m: 2.0,
            nx: 2,
            ny: 1,
            height_m: 1.0,
        };
        let grid = CoverageGrid::from_values(spec, vec![-60.0, f64::NEG_INFINITY]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_raster_csv(&path, &grid).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_m,y_m,value");
        assert!(lines[1].starts_with("1.000000,1.000000,-60.000000"));
        assert!(lines[2].contains("-250.000000"));
    }
}
