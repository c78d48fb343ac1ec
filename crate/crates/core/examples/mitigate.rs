//! Marking the IDT page uncachable with one range register closes the
//! channel: the same interrupt train, with and without it.
//!
//! ```bash
//! cargo run --release --example mitigate
//! ```

use idtsim::experiments::{run_mitigate, ExperimentName, ExperimentSpec};
use idtsim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = run_mitigate(&ExperimentSpec::new(ExperimentName::Mitigate, SimConfig::default(), 2))?;
    println!("control:   {} of {} interrupts detected", r.control_matched, r.n_interrupts);
    println!("mitigated: {} detections", r.mitigated_detections);
    println!(
        "uncachable range at {} ({} bytes, {} lines)",
        r.uncachable_start.as_deref().unwrap_or("-"),
        r.uncachable_len,
        r.suppressed_lines
    );
    Ok(())
}
