use serde::Serialize;

use super::{ExperimentError, ExperimentSpec};
use crate::attacks::{build_eviction_set, evict, leakidt_probe, ProbePages};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinguishReport {
    pub trials: u64,
    pub vector: u8,
    pub noise_p: f64,
    /// Probes that saw the entry right after its interrupt.
    pub cached_detected: u64,
    pub cached_rate: f64,
    /// Probes that claimed the entry was cached right after evicting it.
    pub uncached_detected: u64,
    pub uncached_false_positive_rate: f64,
    pub uncached_rate: f64,
}

/// Alternates an interrupt (entry cached) and an eviction (entry uncached),
/// probing after each.
pub fn run_distinguish(spec: &ExperimentSpec) -> Result<DistinguishReport, ExperimentError> {
    let p = &spec.config.distinguish;
    if p.trials == 0 {
        return Err(ExperimentError::Usage("distinguish needs at least one trial".into()));
    }
    let mut core = spec.core(seed::sub_seed(spec.seed, &["distinguish"]))?;
    let target = core.idt().entry_addr(p.vector);
    let probes = ProbePages::for_target(&core, target)?;
    let set = build_eviction_set(&core, target)?;
    let (mut cached, mut uncached) = (0, 0);
    for _ in 0..p.trials {
        core.deliver_interrupt(p.vector);
        cached += leakidt_probe(&mut core, target, &probes)?.cached as u64;
        evict(&mut core, &set)?;
        uncached += leakidt_probe(&mut core, target, &probes)?.cached as u64;
    }
    let n = p.trials as f64;
    Ok(DistinguishReport {
        trials: p.trials,
        vector: p.vector,
        noise_p: spec.config.noise_p,
        cached_detected: cached,
        cached_rate: cached as f64 / n,
        uncached_detected: uncached,
        uncached_false_positive_rate: uncached as f64 / n,
        uncached_rate: 1.0 - uncached as f64 / n,
    })
}
