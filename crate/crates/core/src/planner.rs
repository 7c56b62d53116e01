//! Link budget, SS-RSRP grids, confidence margin, coverage rates, and
//! minimum-cost access-point selection.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::coverage::CoverageGrid;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::math::{db_to_lin, lin_to_db};
use crate::rt::{self, RtConfig, TuningParams};
use crate::scene::{AntennaPattern, Node};
use crate::tr38901::{self, InfModelParams};
use crate::coverage::GridSpec;

/// Downlink power budget; EPRE is power per OFDM resource element
/// (12 subcarriers per PRB).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub total_tx_power_dbm: f64,
    pub n_prb: u32,
    pub scs_khz: u32,
}

impl LinkBudget {
    pub fn new(total_tx_power_dbm: f64, n_prb: u32, scs_khz: u32) -> Self {
        LinkBudget { total_tx_power_dbm, n_prb, scs_khz }
    }

    /// `EPRE = TxP - 10 log10(12 * n_prb)` dBm.
    pub fn epre_dbm(&self) -> Result<f64> {
        compute_epre(self)
    }
}

pub fn compute_epre(budget: &LinkBudget) -> Result<f64> {
    if budget.n_prb < 1 {
        return Err(Error::InvalidInput("n_prb must be >= 1".into()));
    }
    Ok(budget.total_tx_power_dbm - 10.0 * (12.0 * budget.n_prb as f64).log10())
}

/// Planning parameters (see the scenario `plan` section for file-level
/// defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub rsrp_threshold_dbm: f64,
    /// Required covered fraction of the masked area, in (0, 1).
    pub coverage_target: f64,
    /// One-sided confidence level for the margin, in (0.5, 1).
    pub confidence_level: f64,
    /// Std dev of the propagation-model error, dB.
    pub model_std_dev_db: f64,
    pub rx_antenna: AntennaPattern,
}

impl PlanConfig {
    pub fn margin_db(&self) -> Result<f64> {
        confidence_margin(self.model_std_dev_db, self.confidence_level)
    }
}

/// One-sided Gaussian margin: `z(confidence) * std_dev` dB.
pub fn confidence_margin(std_dev_db: f64, confidence: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&confidence) || confidence == 0.5 {
        return Err(Error::InvalidInput(format!(
            "confidence must be in (0.5, 1), got {confidence}"
        )));
    }
    if std_dev_db < 0.0 {
        return Err(Error::InvalidInput("std dev must be >= 0".into()));
    }
    let z = Normal::standard().inverse_cdf(confidence);
    Ok(z * std_dev_db)
}

/// Fraction of masked pixels with value >= threshold.
pub fn coverage_rate(grid: &CoverageGrid, threshold_dbm: f64) -> Result<f64> {
    let mut masked = 0usize;
    let mut covered = 0usize;
    for (v, m) in grid.values.iter().zip(&grid.mask) {
        if *m {
            masked += 1;
            if *v >= threshold_dbm {
                covered += 1;
            }
        }
    }
    if masked == 0 {
        return Err(Error::InvalidInput("coverage over an empty mask".into()));
    }
    Ok(covered as f64 / masked as f64)
}

/// Propagation backend for RSRP prediction.
#[derive(Debug, Clone)]
pub enum RsrpBackend {
    Rt { cfg: RtConfig, tuning: TuningParams },
    InfSh { params: InfModelParams },
}

/// SS-RSRP grid for one site: per pixel,
/// `RSRP = EPRE + G_tx(departure) + channel gain + G_rx(arrival)`.
///
/// The RT backend weights every path by the antenna gains in its own
/// departure/arrival directions and applies the (A, B) tuning to the
/// aggregate; the InF backend uses the straight-line direction.
pub fn rsrp_grid(
    geo: &Geometry,
    site: &Node,
    budget: &LinkBudget,
    backend: &RsrpBackend,
    spec: &GridSpec,
    rx_antenna: &AntennaPattern,
    mask: Option<&[[f64; 2]]>,
) -> Result<CoverageGrid> {
    let epre = compute_epre(budget)?;
    match backend {
        RsrpBackend::Rt { cfg, tuning } => {
            let points = spec.points();
            let paths = rt::trace_to_points(geo, site.position, &points, cfg)?;
            let mut values = Vec::with_capacity(points.len());
            for (plist, rx) in paths.iter().zip(&points) {
                let untuned = rt::aggregate_rx_power(plist, &site.antenna, rx_antenna, epre)?;
                let d3d = (*rx - site.position).norm();
                let v = if untuned.is_finite() {
                    rt::apply_tuning(untuned, d3d, tuning)?
                } else {
                    untuned
                };
                values.push(v);
            }
            let mask = CoverageGrid::polygon_mask(spec, mask);
            CoverageGrid::new(spec.clone(), values, mask)
        }
        RsrpBackend::InfSh { params } => {
            let cg = tr38901::predict_grid_with_visibility(geo, site, spec, params, mask)?;
            let mut values = Vec::with_capacity(cg.values.len());
            for (i, cg_v) in cg.values.iter().enumerate() {
                let p = spec.point_of_index(i);
                let d = (p - site.position).norm();
                if d < 1e-9 {
                    values.push(f64::NEG_INFINITY);
                    continue;
                }
                let dep = (p - site.position) / d;
                let arr = (site.position - p) / d;
                let g_tx = site.antenna.gain_dbi(dep)?;
                let g_rx = rx_antenna.gain_dbi(arr)?;
                values.push(epre + g_tx + cg_v + g_rx);
            }
            CoverageGrid::new(spec.clone(), values, cg.mask)
        }
    }
}

/// Result of an AP selection run. `feasible` is false when even the full
/// candidate set misses the coverage target; `achieved_coverage` then
/// reports the best attainable rate.
#[derive(Debug, Clone, Serialize)]
pub struct Deployment {
    /// Selected site ids, in selection order.
    pub selected: Vec<String>,
    pub achieved_coverage: f64,
    pub feasible: bool,
    pub margin_db: f64,
    /// Best-server RSRP over the selected sites (no margin subtracted).
    pub best_server_grid: CoverageGrid,
    /// Per-site RSRP grids for the selected sites.
    pub per_site_grids: Vec<(String, CoverageGrid)>,
}

impl Deployment {
    /// Best-server grid with the confidence margin subtracted (the map
    /// coverage decisions are made on).
    pub fn best_server_with_margin(&self) -> CoverageGrid {
        self.best_server_grid.offset(-self.margin_db)
    }
}

/// Per-candidate RSRP grids, computed once and shared by the selection
/// strategies.
pub fn candidate_grids(
    geo: &Geometry,
    candidates: &[Node],
    budget: &LinkBudget,
    backend: &RsrpBackend,
    spec: &GridSpec,
    cfg: &PlanConfig,
    mask: Option<&[[f64; 2]]>,
) -> Result<Vec<(String, CoverageGrid)>> {
    candidates
        .iter()
        .map(|site| {
            let g = rsrp_grid(geo, site, budget, backend, spec, &cfg.rx_antenna, mask)?;
            Ok((site.id.clone(), g))
        })
        .collect()
}

fn covered_mask(grid: &CoverageGrid, threshold: f64, margin: f64) -> Vec<bool> {
    grid.values
        .iter()
        .zip(&grid.mask)
        .map(|(v, m)| *m && *v - margin >= threshold)
        .collect()
}

fn masked_count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

fn deployment_from_selection(
    selection: Vec<String>,
    grids: &[(String, CoverageGrid)],
    cfg: &PlanConfig,
    margin: f64,
    target_pixels: usize,
) -> Result<Deployment> {
    let picked: Vec<&CoverageGrid> = selection
        .iter()
        .map(|id| &grids.iter().find(|(gid, _)| gid == id).unwrap().1)
        .collect();
    let best = CoverageGrid::best_server(&picked)?;
    let covered = masked_count(&covered_mask(&best, cfg.rsrp_threshold_dbm, margin));
    let achieved = covered as f64 / target_pixels as f64;
    Ok(Deployment {
        feasible: achieved >= cfg.coverage_target,
        achieved_coverage: achieved,
        margin_db: margin,
        per_site_grids: selection
            .iter()
            .map(|id| grids.iter().find(|(gid, _)| gid == id).unwrap().clone())
            .collect(),
        selected: selection,
        best_server_grid: best,
    })
}

/// Greedy minimum-cost selection: repeatedly add the candidate covering
/// the most additional pixels (RSRP - margin >= threshold under
/// best-server combining) until the target is met. When no remaining
/// candidate adds coverage, the full-set rate has been reached and the
/// run is reported infeasible.
pub fn select_aps(
    geo: &Geometry,
    candidates: &[Node],
    budget: &LinkBudget,
    cfg: &PlanConfig,
    backend: &RsrpBackend,
    spec: &GridSpec,
    mask: Option<&[[f64; 2]]>,
) -> Result<Deployment> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate sites".into()));
    }
    let grids = candidate_grids(geo, candidates, budget, backend, spec, cfg, mask)?;
    select_aps_from_grids(&grids, cfg)
}

/// Greedy selection over precomputed per-candidate grids.
pub fn select_aps_from_grids(
    grids: &[(String, CoverageGrid)],
    cfg: &PlanConfig,
) -> Result<Deployment> {
    if grids.is_empty() {
        return Err(Error::InvalidInput("no candidate sites".into()));
    }
    let margin = cfg.margin_db()?;
    let target_pixels = masked_count(&grids[0].1.mask);
    if target_pixels == 0 {
        return Err(Error::InvalidInput("empty target-area mask".into()));
    }
    let per_candidate: Vec<(String, Vec<bool>)> = grids
        .iter()
        .map(|(id, g)| (id.clone(), covered_mask(g, cfg.rsrp_threshold_dbm, margin)))
        .collect();

    let mut covered = vec![false; grids[0].1.values.len()];
    let mut selected: Vec<String> = Vec::new();
    let mut remaining: Vec<usize> = (0..per_candidate.len()).collect();
    loop {
        let rate = masked_count(&covered) as f64 / target_pixels as f64;
        if rate >= cfg.coverage_target {
            break;
        }
        // Most new pixels; ties by lowest site id.
        let best = remaining
            .iter()
            .map(|&ci| {
                let gain = per_candidate[ci]
                    .1
                    .iter()
                    .zip(&covered)
                    .filter(|(c, done)| **c && !**done)
                    .count();
                (gain, &per_candidate[ci].0, ci)
            })
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)));
        match best {
            Some((gain, _, ci)) if gain > 0 => {
                for (done, c) in covered.iter_mut().zip(&per_candidate[ci].1) {
                    *done |= *c;
                }
                selected.push(per_candidate[ci].0.clone());
                remaining.retain(|&r| r != ci);
            }
            _ => break, // no candidate adds coverage: full-set rate reached
        }
        if remaining.is_empty() {
            break;
        }
    }
    if selected.is_empty() {
        // Nothing covers anything; report the (infeasible) empty state
        // against the first candidate to keep grid shapes available.
        selected.push(grids[0].0.clone());
    }
    deployment_from_selection(selected, grids, cfg, margin, target_pixels)
}

/// Exhaustive minimum-cardinality selection (test oracle for the greedy
/// strategy). Subsets are scanned in (size, lexicographic id) order, so
/// ties break toward lexicographically smaller id sets. Limited to 12
/// candidates.
pub fn brute_force_select(
    grids: &[(String, CoverageGrid)],
    cfg: &PlanConfig,
) -> Result<Deployment> {
    if grids.is_empty() {
        return Err(Error::InvalidInput("no candidate sites".into()));
    }
    if grids.len() > 12 {
        return Err(Error::InvalidInput(format!(
            "brute force limited to 12 candidates, got {}",
            grids.len()
        )));
    }
    let margin = cfg.margin_db()?;
    let target_pixels = masked_count(&grids[0].1.mask);
    if target_pixels == 0 {
        return Err(Error::InvalidInput("empty target-area mask".into()));
    }
    // Candidate order: lexicographic by id, so the first feasible subset
    // of a given size is the lexicographic tie-break winner.
    let mut order: Vec<usize> = (0..grids.len()).collect();
    order.sort_by(|&a, &b| grids[a].0.cmp(&grids[b].0));
    let masks: Vec<Vec<bool>> = grids
        .iter()
        .map(|(_, g)| covered_mask(g, cfg.rsrp_threshold_dbm, margin))
        .collect();

    let rate_of = |subset: &[usize]| {
        let mut covered = vec![false; masks[0].len()];
        for &ci in subset {
            for (done, c) in covered.iter_mut().zip(&masks[ci]) {
                *done |= *c;
            }
        }
        masked_count(&covered) as f64 / target_pixels as f64
    };

    for size in 1..=order.len() {
        let mut best: Option<Vec<usize>> = None;
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<usize> = combo.iter().map(|&i| order[i]).collect();
            if rate_of(&subset) >= cfg.coverage_target {
                best = Some(subset);
                break;
            }
            // Next combination in lexicographic order.
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] != i + order.len() - size {
                    combo[i] += 1;
                    for j in i + 1..size {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() {
                break;
            }
        }
        if let Some(subset) = best {
            let ids: Vec<String> = subset.iter().map(|&i| grids[i].0.clone()).collect();
            return deployment_from_selection(ids, grids, cfg, margin, target_pixels);
        }
    }
    // Infeasible: report the full set.
    let ids: Vec<String> = order.iter().map(|&i| grids[i].0.clone()).collect();
    deployment_from_selection(ids, grids, cfg, margin, target_pixels)
}

/// Coverage-rate table over a set of thresholds (dBm), mirroring the
/// standard -100/-90/-80/-70 report layout.
pub fn coverage_rate_table(
    grid: &CoverageGrid,
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    thresholds
        .iter()
        .map(|&t| Ok((t, coverage_rate(grid, t)?)))
        .collect()
}

/// Linear-domain mean of masked pixel powers, handy for report summaries.
pub fn masked_mean_dbm(grid: &CoverageGrid) -> Option<f64> {
    let mut lin = 0.0;
    let mut n = 0usize;
    for (v, m) in grid.values.iter().zip(&grid.mask) {
        if *m && v.is_finite() {
            lin += db_to_lin(*v);
            n += 1;
        }
    }
    if n == 0 {
        None
    } else {
        Some(lin_to_db(lin / n as f64))
    }
}
