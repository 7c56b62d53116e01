//! Regenerates `scenarios/demo_measurements.csv`: synthetic CW traces for
//! the demo factory, produced by transforming the untuned RT prediction
//! with a known (A, B) correction plus seeded measurement noise, then
//! wrapping each point in a plausible fast-fading sample set.
//!
//! ```sh
//! cargo run -p rfplan-cli --example make_demo_measurements
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rfplan_core::geometry::Geometry;
use rfplan_core::rt::{self, TuningParams};
use rfplan_core::scene::{AntennaPattern, NodeRole, Scene};
use rfplan_core::Vec3;

const TRUTH_A_DB: f64 = -7.7;
const TRUTH_B_DB_PER_DEC: f64 = 26.0;
const NOISE_STD_DB: f64 = 1.0;
const SEED: u64 = 42;

fn main() {
    let scene = Scene::load("scenarios/demo_factory.json").expect("load scenario");
    let expanded = scene.expand_racks_seeded(SEED);
    let geo = Geometry::build(&expanded).expect("geometry");
    let cfg = expanded.propagation.rt_config(expanded.frequency_ghz);
    let truth = TuningParams::new(TRUTH_A_DB, TRUTH_B_DB_PER_DEC);

    // Walking route through the hall at trolley height, 1.5 m steps.
    let mut route: Vec<Vec3> = Vec::new();
    let push_line = |from: [f64; 2], to: [f64; 2], route: &mut Vec<Vec3>| {
        let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
        let len = (dx * dx + dy * dy).sqrt();
        let steps = (len / 1.5).floor() as usize;
        for k in 0..=steps {
            let t = k as f64 * 1.5 / len;
            route.push(Vec3::new(from[0] + t * dx, from[1] + t * dy, 0.8));
        }
    };
    push_line([2.0, 2.0], [38.0, 2.0], &mut route);
    push_line([38.0, 5.5], [2.0, 5.5], &mut route);
    push_line([2.0, 12.0], [38.0, 12.0], &mut route);
    push_line([38.0, 18.0], [2.0, 18.0], &mut route);
    push_line([2.0, 23.0], [38.0, 23.0], &mut route);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let noise = Normal::new(0.0, NOISE_STD_DB).unwrap();
    let rx_antenna = AntennaPattern::isotropic();

    let mut csv = String::from("tx_id,rx_id,x_m,y_m,z_m,sample_dbm\n");
    let mut n_points = 0usize;
    for node in expanded.nodes.iter().filter(|n| n.role == NodeRole::Tx) {
        let tx_power = node.tx_power_dbm.unwrap_or(0.0);
        let paths = rt::trace_to_points(&geo, node.position, &route, &cfg).expect("trace");
        for (ri, (plist, pos)) in paths.iter().zip(&route).enumerate() {
            let untuned = rt::aggregate_rx_power(plist, &node.antenna, &rx_antenna, tx_power)
                .expect("aggregate");
            if !untuned.is_finite() || untuned < -140.0 {
                continue;
            }
            let d3d = (*pos - node.position).norm();
            let tuned = rt::apply_tuning(untuned, d3d, &truth).expect("tuning");
            let target = tuned + noise.sample(&mut rng);
            // Fast-fading wrapper: 25 dB offsets with ~10 dB span whose
            // linear mean is re-centered on the target level.
            let offsets: Vec<f64> = (0..25)
                .map(|_| {
                    // Two-ray style fading: 20 log10 |1 + a e^{j phi}|.
                    let a: f64 = rng.random_range(0.3..0.9);
                    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let mag = ((1.0 + a * phi.cos()).powi(2) + (a * phi.sin()).powi(2)).sqrt();
                    20.0 * mag.log10()
                })
                .collect();
            let lin_mean =
                offsets.iter().map(|o| 10f64.powf(o / 10.0)).sum::<f64>() / offsets.len() as f64;
            let recenter = 10.0 * lin_mean.log10();
            for o in &offsets {
                csv.push_str(&format!(
                    "{},{}-{:03},{:.3},{:.3},{:.3},{:.4}\n",
                    node.id,
                    node.id.to_lowercase(),
                    ri,
                    pos.x,
                    pos.y,
                    pos.z,
                    target + o - recenter
                ));
            }
            n_points += 1;
        }
    }
    std::fs::write("scenarios/demo_measurements.csv", csv).expect("write csv");
    eprintln!(
        "wrote scenarios/demo_measurements.csv: {n_points} measurement points, \
         truth A = {TRUTH_A_DB} dB, B = {TRUTH_B_DB_PER_DEC} dB/decade, \
         noise {NOISE_STD_DB} dB, seed {SEED}"
    );
}
