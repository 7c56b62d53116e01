//! Measurement ingestion, prediction-vs-measurement statistics, and the
//! (A, B) tuning fit.
//!
//! Statistics use the population convention (divide by n), which makes
//! `rmse^2 = mean^2 + std^2` an exact identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{db_to_lin, lin_to_db, Vec3};
use crate::rt::TuningParams;

/// Raw fast-fading trace recorded while moving the receiver over a short
/// (~2 wavelength) trajectory around one measurement point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrace {
    pub tx_id: String,
    pub rx_id: String,
    pub position: Vec3,
    /// Instantaneous received powers, dBm.
    pub samples: Vec<f64>,
    #[serde(default)]
    pub trajectory_length_m: f64,
}

/// Fast-fading-filtered measurement point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedSample {
    pub tx_id: String,
    pub rx_id: String,
    pub position: Vec3,
    /// Linear-domain average RxP, dBm; meaningful only when `valid`.
    pub rxp_avg_dbm: f64,
    pub valid: bool,
    /// 3D Tx-Rx distance, meters.
    pub d3d_m: f64,
}

/// Trace plausibility rules beyond the bare sample-count minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceValidity {
    pub min_samples: usize,
    /// Acceptable peak-to-peak fading span, dB. Spans outside this window
    /// indicate the fading was not captured properly.
    pub span_db: (f64, f64),
}

impl Default for TraceValidity {
    fn default() -> Self {
        TraceValidity { min_samples: 20, span_db: (3.0, 40.0) }
    }
}

/// Linear-power mean of the trace: `10 log10(mean(10^(s/10)))`, flagged
/// invalid when fewer than `min_samples` samples were recorded.
pub fn filter_fast_fading(trace: &RawTrace, min_samples: usize) -> ProcessedSample {
    let n = trace.samples.len();
    let rxp_avg = if n == 0 {
        f64::NEG_INFINITY
    } else {
        lin_to_db(trace.samples.iter().map(|&s| db_to_lin(s)).sum::<f64>() / n as f64)
    };
    ProcessedSample {
        tx_id: trace.tx_id.clone(),
        rx_id: trace.rx_id.clone(),
        position: trace.position,
        rxp_avg_dbm: rxp_avg,
        valid: n >= min_samples.max(1),
        d3d_m: 0.0,
    }
}

/// [`filter_fast_fading`] plus the peak-to-peak span plausibility window
/// (the full ingestion rule).
pub fn filter_fast_fading_with(trace: &RawTrace, rules: &TraceValidity) -> ProcessedSample {
    let mut out = filter_fast_fading(trace, rules.min_samples);
    if out.valid {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &s in &trace.samples {
            lo = lo.min(s);
            hi = hi.max(s);
        }
        let span = hi - lo;
        if span < rules.span_db.0 || span > rules.span_db.1 {
            out.valid = false;
        }
    }
    out
}

/// Path loss from a link-budget inversion:
/// `PL = TxP + G_tx + G_rx - RxP`. Errors on invalid samples.
pub fn pl_from_measurement(
    sample: &ProcessedSample,
    tx_power_dbm: f64,
    tx_gain_dbi: f64,
    rx_gain_dbi: f64,
) -> Result<f64> {
    if !sample.valid {
        return Err(Error::InvalidInput(format!(
            "sample '{}/{}' is invalid",
            sample.tx_id, sample.rx_id
        )));
    }
    Ok(tx_power_dbm + tx_gain_dbi + rx_gain_dbi - sample.rxp_avg_dbm)
}

/// Prediction-error statistics (errors are `predicted - measured`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub rmse_db: f64,
    pub mean_error_db: f64,
    pub std_dev_db: f64,
    /// Pearson correlation between predicted and measured values.
    pub correlation: f64,
    pub n: usize,
}

/// RMSE, mean error, population std dev, and Pearson correlation of the
/// prediction errors. Requires two equal-length lists with n >= 2.
pub fn compute_error_stats(predicted: &[f64], measured: &[f64]) -> Result<ErrorStats> {
    if predicted.len() != measured.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} predicted vs {} measured",
            predicted.len(),
            measured.len()
        )));
    }
    let n = predicted.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 points".into()));
    }
    let nf = n as f64;
    let mut sum_e = 0.0;
    let mut sum_e2 = 0.0;
    for (p, m) in predicted.iter().zip(measured) {
        let e = p - m;
        sum_e += e;
        sum_e2 += e * e;
    }
    let mean_sq = sum_e2 / nf;
    let mean = sum_e / nf;
    // Population variance written so that rmse^2 = mean^2 + std^2 is exact.
    let var = (mean_sq - mean * mean).max(0.0);
    let mp = predicted.iter().sum::<f64>() / nf;
    let mm = measured.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut vp = 0.0;
    let mut vm = 0.0;
    for (p, m) in predicted.iter().zip(measured) {
        cov += (p - mp) * (m - mm);
        vp += (p - mp) * (p - mp);
        vm += (m - mm) * (m - mm);
    }
    let correlation = if vp > 0.0 && vm > 0.0 {
        cov / (vp.sqrt() * vm.sqrt())
    } else {
        // A constant series has no defined correlation; report 1 for
        // identical constants (zero error spread), 0 otherwise.
        if var == 0.0 {
            1.0
        } else {
            0.0
        }
    };
    Ok(ErrorStats {
        rmse_db: mean_sq.sqrt(),
        mean_error_db: mean,
        std_dev_db: var.sqrt(),
        correlation,
        n,
    })
}

/// One calibration observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningSample {
    pub d3d_m: f64,
    pub rxp_measured_dbm: f64,
    pub rxp_untuned_dbm: f64,
}

/// Fit defaults: slope step, stop criterion on the std-dev improvement,
/// and the search ceiling.
pub const DEFAULT_B_STEP: f64 = 0.5;
pub const DEFAULT_B_STOP: f64 = 0.05;
const B_CEILING: f64 = 60.0;
const B_FLOOR: f64 = -20.0;

/// Fit the (A, B) correction: step `B` away from 20 dB/decade while each
/// step improves the error std dev by at least `b_stop` (direction
/// auto-detected from the first probe), then set `A` to zero the mean
/// error.
pub fn fit_tuning(samples: &[TuningSample], b_step: f64, b_stop: f64) -> Result<TuningParams> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no calibration samples".into()));
    }
    if b_step <= 0.0 || b_stop < 0.0 {
        return Err(Error::InvalidInput("b_step must be > 0 and b_stop >= 0".into()));
    }
    let log_d: Vec<f64> = samples.iter().map(|s| s.d3d_m.log10()).collect();
    let span = log_d.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - log_d.iter().cloned().fold(f64::INFINITY, f64::min);
    if samples.len() < 10 || span < 1.0 {
        log::warn!(
            "tuning fit on {} samples spanning {:.2} distance decades; \
             recommend >= 10 samples over >= 1 decade",
            samples.len(),
            span
        );
    }

    // Error std dev as a function of B (A shifts only the mean).
    let std_at = |b: f64| -> f64 {
        let n = samples.len() as f64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for (s, ld) in samples.iter().zip(&log_d) {
            let tuned = s.rxp_untuned_dbm - (b - 20.0) * ld;
            let e = tuned - s.rxp_measured_dbm;
            sum += e;
            sum2 += e * e;
        }
        ((sum2 / n) - (sum / n).powi(2)).max(0.0).sqrt()
    };

    let mut b = 20.0;
    let mut best = std_at(b);
    // Probe both directions for the descent direction.
    let up = std_at(b + b_step);
    let down = std_at(b - b_step);
    let dir = if up <= down { b_step } else { -b_step };
    loop {
        let next = b + dir;
        if !(B_FLOOR..=B_CEILING).contains(&next) {
            break;
        }
        let s = std_at(next);
        if best - s >= b_stop {
            b = next;
            best = s;
        } else {
            break;
        }
    }

    // A zeroes the post-fit mean error exactly.
    let n = samples.len() as f64;
    let a = samples
        .iter()
        .zip(&log_d)
        .map(|(s, ld)| s.rxp_untuned_dbm - (b - 20.0) * ld - s.rxp_measured_dbm)
        .sum::<f64>()
        / n;
    Ok(TuningParams::new(a, b))
}

/// Right-continuous empirical CDF plus a normal fit of the values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mu: f64,
    pub sigma: f64,
}

pub fn empirical_cdf(values: &[f64]) -> Result<(Vec<(f64, f64)>, NormalFit)> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empirical CDF of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut cdf: Vec<(f64, f64)> = Vec::with_capacity(n);
    for (i, v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n as f64;
        // Collapse duplicate values onto the final (rightmost) step.
        if let Some(last) = cdf.last_mut() {
            if last.0 == *v {
                last.1 = p;
                continue;
            }
        }
        cdf.push((*v, p));
    }
    let mu = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64;
    Ok((cdf, NormalFit { mu, sigma: var.sqrt() }))
}
