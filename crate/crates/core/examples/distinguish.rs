//! Tell a cached IDT entry from an evicted one with the transient-read
//! oracle, with and without oracle noise.
//!
//! ```bash
//! cargo run --release --example distinguish
//! ```

use idtsim::experiments::{run_distinguish, ExperimentName, ExperimentSpec};
use idtsim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for noise_p in [0.0, 0.004, 0.05] {
        let config = SimConfig { noise_p, ..SimConfig::default() };
        let r = run_distinguish(&ExperimentSpec::new(ExperimentName::Distinguish, config, 1))?;
        println!(
            "noise {noise_p:<5}: cached seen {:.4}, evicted reported cached {:.4} ({} trials)",
            r.cached_rate, r.uncached_false_positive_rate, r.trials
        );
    }
    Ok(())
}
