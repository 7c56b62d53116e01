//! Command implementations.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use rfplan_core::calibration::{
    self, compute_error_stats, fit_tuning, ProcessedSample, TraceValidity, TuningSample,
    DEFAULT_B_STEP, DEFAULT_B_STOP,
};
use rfplan_core::coverage::{CoverageGrid, GridSpec};
use rfplan_core::geometry::Geometry;
use rfplan_core::io::{self, CalibrationReport, PlanReport, RunManifest, StatsReport};
use rfplan_core::planner::{self, LinkBudget, PlanConfig, RsrpBackend};
use rfplan_core::rt::{self, TuningParams};
use rfplan_core::scene::{Node, NodeRole, PlanSection, Scene};
use rfplan_core::tr38901::{self, SfSampler};

use crate::{Backend, CommonArgs};

/// Coverage-rate report thresholds, dBm.
const RATE_THRESHOLDS: [f64; 4] = [-100.0, -90.0, -80.0, -70.0];

/// Scene loaded, occupancy-adjusted, expanded, and indexed.
pub struct Prepared {
    pub scene: Scene,
    pub geo: Geometry,
}

fn prepare(common: &CommonArgs, occupancy: Option<f64>) -> anyhow::Result<Prepared> {
    let mut scene = Scene::load(&common.scenario)?;
    if let Some(o) = occupancy {
        if !(0.0..=1.0).contains(&o) {
            bail!("--occupancy must be in [0, 1], got {o}");
        }
        scene = scene.with_rack_occupancy(o);
    }
    let expanded = scene.expand_racks_seeded(common.seed);
    let geo = Geometry::build(&expanded)?;
    Ok(Prepared { scene: expanded, geo })
}

fn manifest(
    command: &str,
    common: &CommonArgs,
    overrides: &[(&str, String)],
) -> RunManifest {
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    RunManifest {
        command: command.to_string(),
        scenario_path: common.scenario.display().to_string(),
        seed: common.seed,
        overrides: overrides
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect::<BTreeMap<_, _>>(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: ts.to_string(),
    }
}

fn ensure_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn find_node<'a>(scene: &'a Scene, id: &str) -> anyhow::Result<&'a Node> {
    scene
        .node(id)
        .ok_or_else(|| rfplan_core::Error::Validation(format!("unknown node id '{id}'")).into())
}

fn plan_section(scene: &Scene) -> PlanSection {
    scene.plan.clone().unwrap_or_default()
}

fn grid_spec(
    scene: &Scene,
    grid_res: Option<f64>,
    rx_height: Option<f64>,
) -> anyhow::Result<GridSpec> {
    let plan = plan_section(scene);
    let res = grid_res.unwrap_or(plan.grid_resolution_m);
    let height = rx_height.unwrap_or(plan.rx_height_m);
    Ok(GridSpec::from_bounds(&scene.bounds, res, height)?)
}

fn tuning_of(scene: &Scene, tuning_json: Option<&Path>) -> anyhow::Result<TuningParams> {
    match tuning_json {
        Some(path) => Ok(io::read_json(path)?),
        None => Ok(scene.propagation.tuning),
    }
}

pub fn validate(common: &CommonArgs) -> anyhow::Result<()> {
    let prepared = prepare(common, common.occupancy)?;
    let scene = &prepared.scene;
    println!("scenario: {}", common.scenario.display());
    println!("frequency: {} GHz", scene.frequency_ghz);
    println!("materials: {}", scene.materials.len());
    println!("solids (expanded): {}", scene.solids.len());
    println!("facets: {}", prepared.geo.facets().len());
    println!("wedges: {}", prepared.geo.wedges().len());
    println!("nodes: {}", scene.nodes.len());
    let candidates = scene
        .nodes
        .iter()
        .filter(|n| n.role == NodeRole::CandidateSite)
        .count();
    println!("candidate sites: {candidates}");
    println!("ok");
    Ok(())
}

pub fn trace(common: &CommonArgs, tx: &str, rx: &str, out: &Path) -> anyhow::Result<()> {
    let prepared = prepare(common, common.occupancy)?;
    let tx_node = find_node(&prepared.scene, tx)?.clone();
    let rx_node = find_node(&prepared.scene, rx)?.clone();
    let cfg = prepared
        .scene
        .propagation
        .rt_config(prepared.scene.frequency_ghz);
    let paths = rt::trace_paths(&prepared.geo, &tx_node, &rx_node, &cfg)?;
    ensure_out(out)?;
    io::write_json(out.join("paths.json"), &io::path_dump(&paths, &prepared.geo))?;
    io::write_json(
        out.join("manifest.json"),
        &manifest("trace", common, &[("tx", tx.into()), ("rx", rx.into())]),
    )?;
    println!("{} paths written to {}", paths.len(), out.join("paths.json").display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn coverage(
    common: &CommonArgs,
    tx: &str,
    backend: Backend,
    out: &Path,
    grid_res: Option<f64>,
    rx_height: Option<f64>,
    tuning_json: Option<&Path>,
) -> anyhow::Result<()> {
    let prepared = prepare(common, common.occupancy)?;
    let scene = &prepared.scene;
    let tx_node = find_node(scene, tx)?.clone();
    let spec = grid_spec(scene, grid_res, rx_height)?;
    let mask = scene.target_area.as_deref();
    let grid = match backend {
        Backend::Rt => {
            let cfg = scene.propagation.rt_config(scene.frequency_ghz);
            let tuning = tuning_of(scene, tuning_json)?;
            rt::predict_grid(&prepared.geo, &tx_node, &spec, &cfg, &tuning, mask)?
        }
        Backend::InfSh => {
            let params = scene.propagation.inf_params();
            tr38901::predict_grid_with_visibility(&prepared.geo, &tx_node, &spec, &params, mask)?
        }
    };
    ensure_out(out)?;
    io::write_raster_csv(out.join("channel_gain.csv"), &grid)?;
    io::write_pgm_with_sidecar(out.join("channel_gain.pgm"), &grid)?;
    let backend_name = match backend {
        Backend::Rt => "rt",
        Backend::InfSh => "inf-sh",
    };
    io::write_json(
        out.join("manifest.json"),
        &manifest(
            "coverage",
            common,
            &[
                ("tx", tx.into()),
                ("backend", backend_name.into()),
                ("grid_res", format!("{}", spec.resolution_m)),
                ("rx_height", format!("{}", spec.height_m)),
            ],
        ),
    )?;
    println!(
        "channel-gain raster ({}x{}) written to {}",
        spec.nx,
        spec.ny,
        out.display()
    );
    Ok(())
}

pub fn calibrate(
    common: &CommonArgs,
    measurements: &Path,
    out: &Path,
    rx_gain_dbi: f64,
) -> anyhow::Result<()> {
    let prepared = prepare(common, common.occupancy)?;
    let scene = &prepared.scene;
    let traces = io::read_measurements_csv(measurements)?;
    let samples = io::process_measurements(&traces, scene, &TraceValidity::default())?;
    let cfg = scene.propagation.rt_config(scene.frequency_ghz);

    // Untuned RT predictions at every valid sample, grouped per AP.
    let mut tx_ids: Vec<String> = samples.iter().map(|s| s.tx_id.clone()).collect();
    tx_ids.sort();
    tx_ids.dedup();
    let mut per_ap: BTreeMap<String, Vec<(ProcessedSample, f64)>> = BTreeMap::new();
    for tx_id in &tx_ids {
        let tx_node = find_node(scene, tx_id)?.clone();
        let tx_power = tx_node.tx_power_dbm.unwrap_or(0.0);
        let group: Vec<&ProcessedSample> = samples
            .iter()
            .filter(|s| &s.tx_id == tx_id && s.valid)
            .collect();
        if group.is_empty() {
            continue;
        }
        let points: Vec<_> = group.iter().map(|s| s.position).collect();
        let paths = rt::trace_to_points(&prepared.geo, tx_node.position, &points, &cfg)?;
        let rx_pattern = rfplan_core::scene::AntennaPattern {
            peak_gain_dbi: Some(rx_gain_dbi),
            ..rfplan_core::scene::AntennaPattern::isotropic()
        };
        let entry = per_ap.entry(tx_id.clone()).or_default();
        for (s, plist) in group.iter().zip(&paths) {
            let untuned =
                rt::aggregate_rx_power(plist, &tx_node.antenna, &rx_pattern, tx_power)?;
            entry.push(((*s).clone(), untuned));
        }
    }

    let tuning_samples: Vec<TuningSample> = per_ap
        .values()
        .flatten()
        .map(|(s, untuned)| TuningSample {
            d3d_m: s.d3d_m,
            rxp_measured_dbm: s.rxp_avg_dbm,
            rxp_untuned_dbm: *untuned,
        })
        .collect();
    let tuning = fit_tuning(&tuning_samples, DEFAULT_B_STEP, DEFAULT_B_STOP)?;

    let stats_of = |tuned: bool| -> anyhow::Result<StatsReport> {
        let mut per = BTreeMap::new();
        let mut all_pred = Vec::new();
        let mut all_meas = Vec::new();
        for (ap, rows) in &per_ap {
            let mut pred = Vec::new();
            let mut meas = Vec::new();
            for (s, untuned) in rows {
                let p = if tuned {
                    rt::apply_tuning(*untuned, s.d3d_m, &tuning)?
                } else {
                    *untuned
                };
                pred.push(p);
                meas.push(s.rxp_avg_dbm);
            }
            if pred.len() >= 2 {
                per.insert(ap.clone(), compute_error_stats(&pred, &meas)?);
            }
            all_pred.extend(pred);
            all_meas.extend(meas);
        }
        Ok(StatsReport { per_ap: per, global: compute_error_stats(&all_pred, &all_meas)? })
    };

    let report = CalibrationReport {
        tuning,
        samples_total: samples.len(),
        samples_valid: samples.iter().filter(|s| s.valid).count(),
        before: stats_of(false)?,
        after: stats_of(true)?,
    };

    ensure_out(out)?;
    io::write_json(out.join("tuning.json"), &tuning)?;
    io::write_json(out.join("calibration_report.json"), &report)?;
    io::write_processed_csv(out.join("processed.csv"), &samples)?;
    io::write_json(
        out.join("manifest.json"),
        &manifest(
            "calibrate",
            common,
            &[("measurements", measurements.display().to_string())],
        ),
    )?;
    println!(
        "fitted A = {:.2} dB, B = {:.1} dB/decade; global RMSE {:.2} -> {:.2} dB",
        tuning.a_db,
        tuning.b_db_per_decade,
        report.before.global.rmse_db,
        report.after.global.rmse_db
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn plan(
    common: &CommonArgs,
    backend: Backend,
    out: &Path,
    grid_res: Option<f64>,
    rx_height: Option<f64>,
    threshold: Option<f64>,
    target: Option<f64>,
    tuning_json: Option<&Path>,
) -> anyhow::Result<bool> {
    // Worst-case rack occupancy for planning unless overridden.
    let base = Scene::load(&common.scenario)?;
    let plan = plan_section(&base);
    let occupancy = common.occupancy.unwrap_or(plan.rack_occupancy);
    let prepared = prepare(common, Some(occupancy))?;
    let scene = &prepared.scene;

    let candidates: Vec<Node> = scene
        .nodes
        .iter()
        .filter(|n| n.role == NodeRole::CandidateSite)
        .cloned()
        .collect();
    if candidates.is_empty() {
        bail!(rfplan_core::Error::Validation(
            "scenario has no candidate-site nodes".into()
        ));
    }

    let cfg = PlanConfig {
        rsrp_threshold_dbm: threshold.unwrap_or(plan.rsrp_threshold_dbm),
        coverage_target: target.unwrap_or(plan.coverage_target),
        confidence_level: plan.confidence_level,
        model_std_dev_db: plan.model_std_dev_db,
        rx_antenna: plan.rx_antenna,
    };
    let budget = LinkBudget::new(plan.total_tx_power_dbm, plan.n_prb, plan.scs_khz);
    let spec = grid_spec(scene, grid_res, rx_height)?;
    let mask = scene.target_area.as_deref();

    let rt_backend = RsrpBackend::Rt {
        cfg: scene.propagation.rt_config(scene.frequency_ghz),
        tuning: tuning_of(scene, tuning_json)?,
    };
    let inf_backend = RsrpBackend::InfSh { params: scene.propagation.inf_params() };
    let (primary, secondary, primary_name, secondary_name) = match backend {
        Backend::Rt => (&rt_backend, &inf_backend, "rt", "inf-sh"),
        Backend::InfSh => (&inf_backend, &rt_backend, "inf-sh", "rt"),
    };

    let deployment = planner::select_aps(
        &prepared.geo,
        &candidates,
        &budget,
        &cfg,
        primary,
        &spec,
        mask,
    )?;

    // The same selected deployment under the comparison backend.
    let selected_nodes: Vec<Node> = deployment
        .selected
        .iter()
        .map(|id| find_node(scene, id).cloned())
        .collect::<anyhow::Result<_>>()?;
    let secondary_grids = planner::candidate_grids(
        &prepared.geo,
        &selected_nodes,
        &budget,
        secondary,
        &spec,
        &cfg,
        mask,
    )?;
    let secondary_refs: Vec<&CoverageGrid> =
        secondary_grids.iter().map(|(_, g)| g).collect();
    let secondary_best = CoverageGrid::best_server(&secondary_refs)?;

    let margin = deployment.margin_db;
    let primary_map = deployment.best_server_with_margin();
    let secondary_map = secondary_best.offset(-margin);

    let mut coverage_rates = BTreeMap::new();
    coverage_rates.insert(
        primary_name.to_string(),
        planner::coverage_rate_table(&primary_map, &RATE_THRESHOLDS)?,
    );
    coverage_rates.insert(
        secondary_name.to_string(),
        planner::coverage_rate_table(&secondary_map, &RATE_THRESHOLDS)?,
    );

    let mut observations = Vec::new();
    {
        let a = &coverage_rates[primary_name];
        let b = &coverage_rates[secondary_name];
        let gaps: Vec<String> = a
            .iter()
            .zip(b)
            .map(|((t, ra), (_, rb))| format!("{t} dBm: {:.2} pp", (ra - rb).abs() * 100.0))
            .collect();
        observations.push(format!(
            "coverage-rate divergence {primary_name} vs {secondary_name}: {}",
            gaps.join(", ")
        ));
    }

    let report = PlanReport {
        selected: deployment.selected.clone(),
        achieved_coverage: deployment.achieved_coverage,
        feasible: deployment.feasible,
        margin_db: margin,
        rsrp_threshold_dbm: cfg.rsrp_threshold_dbm,
        coverage_target: cfg.coverage_target,
        coverage_rates,
        observations,
    };

    ensure_out(out)?;
    io::write_json(out.join("plan.json"), &report)?;
    io::write_raster_csv(out.join(format!("rsrp_{primary_name}.csv")), &primary_map)?;
    io::write_pgm_with_sidecar(out.join(format!("rsrp_{primary_name}.pgm")), &primary_map)?;
    io::write_raster_csv(out.join(format!("rsrp_{secondary_name}.csv")), &secondary_map)?;
    io::write_pgm_with_sidecar(
        out.join(format!("rsrp_{secondary_name}.pgm")),
        &secondary_map,
    )?;
    io::write_json(
        out.join("manifest.json"),
        &manifest(
            "plan",
            common,
            &[
                ("backend", primary_name.into()),
                ("threshold", format!("{}", cfg.rsrp_threshold_dbm)),
                ("target", format!("{}", cfg.coverage_target)),
                ("occupancy", format!("{occupancy}")),
            ],
        ),
    )?;
    println!(
        "selected {} of {} sites; coverage {:.2}% (target {:.0}%, margin {:.2} dB): {}",
        deployment.selected.len(),
        candidates.len(),
        deployment.achieved_coverage * 100.0,
        cfg.coverage_target * 100.0,
        margin,
        if deployment.feasible { "feasible" } else { "INFEASIBLE" }
    );
    Ok(deployment.feasible)
}

pub fn montecarlo(
    common: &CommonArgs,
    tx: &str,
    out: &Path,
    grid_res: Option<f64>,
    rx_height: Option<f64>,
    duplicates: u32,
) -> anyhow::Result<()> {
    let prepared = prepare(common, common.occupancy)?;
    let scene = &prepared.scene;
    let tx_node = find_node(scene, tx)?.clone();
    let spec = grid_spec(scene, grid_res, rx_height)?;
    let mask = CoverageGrid::polygon_mask(&spec, scene.target_area.as_deref());
    let params = scene.propagation.inf_params();

    let points: Vec<(f64, bool)> = (0..spec.len())
        .filter(|i| mask[*i])
        .map(|i| {
            let p = spec.point_of_index(i);
            let d = (p - tx_node.position).norm().max(1.0);
            let los = prepared.geo.is_los(tx_node.position, p).unwrap_or(false);
            (d, los)
        })
        .collect();
    let sampler = SfSampler::new(common.seed, duplicates);
    let samples = tr38901::sample_shadow_fading(&points, &params, &sampler, scene.frequency_ghz)?;
    let flat: Vec<f64> = samples.into_iter().flatten().collect();
    let (cdf, fit) = calibration::empirical_cdf(&flat)?;

    ensure_out(out)?;
    let mut text = String::from("pl_db,cumulative_probability\n");
    for (v, p) in &cdf {
        text.push_str(&format!("{v:.6},{p:.8}\n"));
    }
    std::fs::write(out.join("pl_cdf.csv"), text)
        .map_err(|e| rfplan_core::Error::io(out.join("pl_cdf.csv"), e))?;
    io::write_json(out.join("normal_fit.json"), &fit)?;
    io::write_json(
        out.join("manifest.json"),
        &manifest(
            "montecarlo",
            common,
            &[("tx", tx.into()), ("duplicates", duplicates.to_string())],
        ),
    )?;
    println!(
        "{} PL samples over {} points; normal fit mu = {:.2} dB, sigma = {:.2} dB",
        flat.len(),
        points.len(),
        fit.mu,
        fit.sigma
    );
    Ok(())
}
