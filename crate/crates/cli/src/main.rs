//! `rfplan`: batch indoor radio prediction, calibration, and planning.
//!
//! Exit codes: 0 success, 2 validation/parse error, 3 infeasible plan,
//! 4 I/O error. Log level comes from the `RFPLAN_LOG` environment
//! variable.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use rfplan_core::Error;

#[derive(Debug, Parser)]
#[command(name = "rfplan", version, about = "Indoor radio planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Rt,
    InfSh,
}

#[derive(Debug, Clone, Parser)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: std::path::PathBuf,
    /// Seed for all randomness (rack fill defaults, shadow fading).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker thread cap (0 = all cores). Never changes results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Override the rack occupancy fraction in [0, 1].
    #[arg(long)]
    occupancy: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate a scenario; print facet and wedge counts.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Dump multipath between two nodes as JSON.
    Trace {
        #[command(flatten)]
        common: CommonArgs,
        /// Transmitter node id.
        #[arg(long)]
        tx: String,
        /// Receiver node id.
        #[arg(long)]
        rx: String,
        /// Output directory.
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Channel-gain coverage raster for one transmitter.
    Coverage {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tx: String,
        #[arg(long, value_enum, default_value_t = Backend::Rt)]
        backend: Backend,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Grid resolution in meters (default from the scenario).
        #[arg(long)]
        grid_res: Option<f64>,
        /// Receiver height in meters (default from the scenario).
        #[arg(long)]
        rx_height: Option<f64>,
        /// Tuning JSON (output of `calibrate`) overriding the scenario.
        #[arg(long)]
        tuning_json: Option<std::path::PathBuf>,
    },
    /// Fit the (A, B) correction from a measurement CSV.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Measurement CSV (`tx_id,rx_id,x_m,y_m,z_m,sample_dbm`).
        #[arg(long)]
        measurements: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Scalar receive antenna gain used in predictions, dBi.
        #[arg(long, default_value_t = 0.0)]
        rx_gain_dbi: f64,
    },
    /// Select APs to meet the coverage target; write maps and rates.
    Plan {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = Backend::Rt)]
        backend: Backend,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        grid_res: Option<f64>,
        #[arg(long)]
        rx_height: Option<f64>,
        /// SS-RSRP threshold in dBm (default from the scenario).
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        /// Coverage target fraction (default from the scenario).
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        tuning_json: Option<std::path::PathBuf>,
    },
    /// Shadow-fading Monte Carlo: empirical CDF of PL with SF.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tx: String,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        grid_res: Option<f64>,
        #[arg(long)]
        rx_height: Option<f64>,
        /// Shadow-fading draws per point.
        #[arg(long, default_value_t = 100)]
        duplicates: u32,
    },
}

const EXIT_VALIDATION: i32 = 2;
const EXIT_INFEASIBLE: i32 = 3;
const EXIT_IO: i32 = 4;

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("RFPLAN_LOG", "warn"),
    )
    .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err.downcast_ref::<Error>() {
                Some(Error::Io { .. }) => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
            std::process::exit(code);
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let threads = match &cli.command {
        Command::Validate { common }
        | Command::Trace { common, .. }
        | Command::Coverage { common, .. }
        | Command::Calibrate { common, .. }
        | Command::Plan { common, .. }
        | Command::Montecarlo { common, .. } => common.threads,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| match cli.command {
        Command::Validate { common } => commands::validate(&common).map(|_| 0),
        Command::Trace { common, tx, rx, out } => {
            commands::trace(&common, &tx, &rx, &out).map(|_| 0)
        }
        Command::Coverage { common, tx, backend, out, grid_res, rx_height, tuning_json } => {
            commands::coverage(
                &common,
                &tx,
                backend,
                &out,
                grid_res,
                rx_height,
                tuning_json.as_deref(),
            )
            .map(|_| 0)
        }
        Command::Calibrate { common, measurements, out, rx_gain_dbi } => {
            commands::calibrate(&common, &measurements, &out, rx_gain_dbi).map(|_| 0)
        }
        Command::Plan {
            common,
            backend,
            out,
            grid_res,
            rx_height,
            threshold,
            target,
            tuning_json,
        } => {
            let feasible = commands::plan(
                &common,
                backend,
                &out,
                grid_res,
                rx_height,
                threshold,
                target,
                tuning_json.as_deref(),
            )?;
            Ok(if feasible { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Montecarlo { common, tx, out, grid_res, rx_height, duplicates } => {
            commands::montecarlo(&common, &tx, &out, grid_res, rx_height, duplicates)
                .map(|_| 0)
        }
    })
}
