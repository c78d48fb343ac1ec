//! Keystroke timing from xHCI interrupts: one typing session, detections
//! matched back to the keys.
//!
//! ```bash
//! cargo run --release --example keystrokes
//! ```

use idtsim::analysis::match_keystrokes;
use idtsim::attacks::monitor;
use idtsim::core_sim::{Core, Cycle, EventQueue};
use idtsim::workloads::{gen_keystrokes, install_background, BackgroundConfig, KeystrokeTiming};
use idtsim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig::default();
    let cpu = config.cycles_per_us;
    let typed = gen_keystrokes(40, &KeystrokeTiming::default(), cpu, 21);

    let mut core = Core::new(&config, 21)?;
    let mut queue = EventQueue::new();
    queue.push_interrupts(35, typed.interrupts.iter().copied());
    let end = *typed.interrupts.last().unwrap() + Cycle::from_us(50_000.0, cpu);
    install_background(&mut core, &mut queue, &BackgroundConfig::realistic(), Cycle::ZERO, end, 21)?;
    let trace = monitor(&mut core, &mut queue, 35, end)?;

    let r = match_keystrokes(&trace.times, &typed.script, Cycle::from_us(2_000.0, cpu), cpu)?;
    println!(
        "{} keys, {} detections: F {:.3}, median lead {:.0} µs",
        typed.script.key_times.len(),
        r.detections,
        r.f_score,
        -r.delay_median_us
    );
    for w in trace.times.windows(2).take(8) {
        println!("  gap {:7.1} ms", (w[1] - w[0]) as f64 / cpu as f64 / 1e3);
    }
    Ok(())
}
