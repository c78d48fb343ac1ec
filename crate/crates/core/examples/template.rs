//! Find which IDT block an unknown device interrupt uses by inducing it and
//! diffing per-line detection counts against a quiet window.
//!
//! ```bash
//! cargo run --release --example template
//! ```

use idtsim::attacks::template_idt;
use idtsim::core_sim::{Core, Cycle};
use idtsim::workloads::{BackgroundConfig, InterruptSource};
use idtsim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig::default();
    let mut core = Core::new(&config, 11)?;
    // the "unknown" device: vector 83 at about 800 Hz
    let induce = InterruptSource::poisson(83, 800.0);
    let window = Cycle(config.us(100_000.0));
    let t = template_idt(&mut core, &BackgroundConfig::quiet(), &induce, window, 11)?;
    for (line, d) in t.differentials().iter().enumerate().filter(|(_, d)| **d != 0) {
        println!("IDT line {line:2} (vectors {:3}..={:3}): {d:+}", line * 4, line * 4 + 3);
    }
    println!("block starts at vector {} (exact: {}), guess {}", t.block_start, t.exact, t.vector);
    Ok(())
}
