//! LeakIDT against Prime+Probe on the same victim and the same noisy
//! neighbour, scored against ground truth.
//!
//! ```bash
//! cargo run --release --example compare
//! ```

use idtsim::experiments::{run_compare, ExperimentName, ExperimentSpec};
use idtsim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = SimConfig::default();
    config.compare.victim_accesses = 10_000;
    let (r, _files) = run_compare(&ExperimentSpec::new(ExperimentName::Compare, config, 3))?;
    for (name, m) in [("LeakIDT", &r.leakidt), ("Prime+Probe", &r.prime_probe)] {
        println!(
            "{name:<12} precision {:.3} recall {:.3} F {:.4}  ({} detections, {} measurements)",
            m.score.precision, m.score.recall, m.score.f_score, m.score.detections, m.measurements
        );
    }
    Ok(())
}
