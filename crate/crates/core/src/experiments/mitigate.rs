use serde::Serialize;

use super::{ExperimentError, ExperimentSpec};
use crate::analysis::match_events;
use crate::attacks::monitor;
use crate::core_sim::{Core, Cycle, EventQueue};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigateReport {
    pub n_interrupts: u64,
    pub spacing: u64,
    pub vector: u8,
    pub noise_p: f64,
    /// Detections with the IDT page marked uncachable.
    pub mitigated_detections: u64,
    pub mitigated_matched: u64,
    pub control_detections: u64,
    pub control_matched: u64,
    pub control_recall: f64,
    /// The range register the mitigation programmed.
    pub uncachable_start: Option<String>,
    pub uncachable_len: u64,
    pub suppressed_lines: u64,
}

/// The same interrupt train watched by LeakIDT on an unprotected core and
/// on one whose IDT page is uncachable.
pub fn run_mitigate(spec: &ExperimentSpec) -> Result<MitigateReport, ExperimentError> {
    let p = &spec.config.mitigate;
    let core_seed = seed::sub_seed(spec.seed, &["mitigate", "core"]);
    let lead = 10 * spec.config.costs.probe_cost;
    let times: Vec<Cycle> = (0..p.n_interrupts).map(|i| Cycle(lead + p.spacing * (i + 1))).collect();
    let end = Cycle(lead + p.spacing * (p.n_interrupts + 1));
    let run = |core: &mut Core| -> Result<Vec<Cycle>, ExperimentError> {
        let mut queue = EventQueue::new();
        queue.push_interrupts(p.vector, times.iter().copied());
        Ok(monitor(core, &mut queue, p.vector, end)?.times)
    };
    let mut control = Core::new(&spec.config, core_seed)?;
    let mut mitigated = Core::new(&spec.config, core_seed)?;
    let delta = mitigated.install_uncachable_idt()?;
    let (c, m) = rayon::join(|| run(&mut control), || run(&mut mitigated));
    let (c, m) = (c?, m?);
    let cpu = spec.config.cycles_per_us;
    let window = Cycle(p.spacing);
    let cr = match_events(&c, &times, window, cpu);
    let mr = match_events(&m, &times, window, cpu);
    Ok(MitigateReport {
        n_interrupts: p.n_interrupts,
        spacing: p.spacing,
        vector: p.vector,
        noise_p: spec.config.noise_p,
        mitigated_detections: m.len() as u64,
        mitigated_matched: mr.matched,
        control_detections: c.len() as u64,
        control_matched: cr.matched,
        control_recall: cr.recall,
        uncachable_start: delta.installed.map(|r| format!("{:#x}", r.start.as_u64())),
        uncachable_len: delta.installed.map_or(0, |r| r.len),
        suppressed_lines: delta.suppressed_lines,
    })
}
