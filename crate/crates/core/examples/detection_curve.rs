//! Missed interrupts as a function of their spacing, for LeakIDT and
//! Prime+Probe. Prints the curve as CSV.
//!
//! ```bash
//! cargo run --release --example detection_curve > curve.csv
//! ```

use idtsim::experiments::{run_curve, ExperimentName, ExperimentSpec};
use idtsim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = SimConfig::default();
    config.curve.spacings = (1..=24).map(|i| i * 1_000).collect();
    config.curve.n_interrupts = 2_000;
    let report = run_curve(&ExperimentSpec::new(ExperimentName::Curve, config, 7))?;
    print!("{}", String::from_utf8(report.to_csv())?);
    eprintln!("knee at {:?} cycles", report.knee_spacing);
    Ok(())
}
