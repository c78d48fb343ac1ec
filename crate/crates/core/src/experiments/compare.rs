use rand::Rng;
use serde::Serialize;

use super::{ExperimentError, ExperimentSpec, OutputFiles};
use crate::analysis::{match_events, MatchReport};
use crate::attacks::{monitor, prime_probe_monitor, DetectionTrace};
use crate::core_sim::{Cycle, EventQueue};
use crate::seed;
use crate::workloads::install_background;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorScore {
    pub measurements: u64,
    #[serde(flatten)]
    pub score: MatchReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub victim_accesses: u64,
    pub vector: u8,
    pub leakidt: MonitorScore,
    pub prime_probe: MonitorScore,
}

/// LeakIDT and Prime+Probe against the same victim interrupt schedule and
/// the same background, each on its own core.
pub fn run_compare(spec: &ExperimentSpec) -> Result<(CompareReport, OutputFiles), ExperimentError> {
    let p = &spec.config.compare;
    let mut rng = seed::rng(seed::sub_seed(spec.seed, &["compare", "victim"]));
    let lead = 10 * spec.config.costs.probe_cost;
    let mut t = lead;
    let victim: Vec<Cycle> = (0..p.victim_accesses)
        .map(|_| {
            let jitter = if p.victim_jitter > 0 { rng.random_range(0..=2 * p.victim_jitter) } else { 0 };
            t += (p.victim_period + jitter).saturating_sub(p.victim_jitter).max(1);
            Cycle(t)
        })
        .collect();
    let duration = Cycle(t + 2 * p.victim_period.max(1) + lead);

    let run = |prime_probe: bool| -> Result<DetectionTrace, ExperimentError> {
        let mut core = spec.core(seed::sub_seed(spec.seed, &["compare", "core"]))?;
        let mut queue = EventQueue::new();
        queue.push_interrupts(p.vector, victim.iter().copied());
        let bg_seed = seed::sub_seed(spec.seed, &["compare", "background"]);
        install_background(&mut core, &mut queue, &p.background, Cycle::ZERO, duration, bg_seed)?;
        Ok(if prime_probe {
            prime_probe_monitor(&mut core, &mut queue, p.vector, duration)?
        } else {
            monitor(&mut core, &mut queue, p.vector, duration)?
        })
    };
    let (leak, pp) = rayon::join(|| run(false), || run(true));
    let (leak, pp) = (leak?, pp?);
    let cpu = spec.config.cycles_per_us;
    let score = |trace: &DetectionTrace| MonitorScore {
        measurements: trace.measurements,
        score: match_events(&trace.times, &victim, Cycle(p.match_window), cpu),
    };
    let report = CompareReport {
        victim_accesses: p.victim_accesses,
        vector: p.vector,
        leakidt: score(&leak),
        prime_probe: score(&pp),
    };
    let csv = |trace: &DetectionTrace| {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).expect("in-memory write");
        buf
    };
    let files =
        vec![("detections_leakidt.csv".to_string(), csv(&leak)), ("detections_prime_probe.csv".to_string(), csv(&pp))];
    Ok((report, files))
}
