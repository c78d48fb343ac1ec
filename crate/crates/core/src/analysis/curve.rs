use rayon::prelude::*;
use serde::Serialize;

use super::match_events;
use crate::attacks::{monitor, prime_probe_monitor, AttackError};
use crate::core_sim::{Core, Cycle, EventQueue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurvePoint {
    pub spacing: u64,
    pub missed_leakidt: u64,
    pub missed_pp: u64,
}

/// For each spacing, fires `n_interrupts` on `vector` that far apart at two
/// fresh cores from `make_core`, one watched by LeakIDT and one by
/// Prime+Probe. An interrupt counts as missed unless some detection can be
/// attributed to it alone (each detection explains at most the latest
/// interrupt before it).
pub fn detection_curve<F>(
    make_core: F,
    spacings: &[u64],
    n_interrupts: u64,
    vector: u8,
) -> Result<Vec<CurvePoint>, AttackError>
where
    F: Fn(u64) -> Result<Core, AttackError> + Sync,
{
    let run = |spacing: u64, prime_probe: bool| -> Result<u64, AttackError> {
        if n_interrupts == 0 {
            return Ok(0);
        }
        let mut core = make_core(spacing)?;
        // leave room for the monitor's own setup before the first interrupt
        let lead = 10 * core.costs().probe_cost;
        let times: Vec<Cycle> = (0..n_interrupts).map(|i| Cycle(lead + spacing * (i + 1))).collect();
        let mut queue = EventQueue::new();
        queue.push_interrupts(vector, times.iter().copied());
        let tail = 10 * (core.costs().isr_cost + core.costs().probe_cost + core.costs().evict_cost);
        let duration = Cycle(times[times.len() - 1].0 + spacing + tail);
        let trace = if prime_probe {
            prime_probe_monitor(&mut core, &mut queue, vector, duration)?
        } else {
            monitor(&mut core, &mut queue, vector, duration)?
        };
        let report = match_events(&trace.times, &times, Cycle::MAX, core.cycles_per_us());
        Ok(n_interrupts - report.matched)
    };
    spacings
        .par_iter()
        .map(|&spacing| {
            let (l, p) = rayon::join(|| run(spacing, false), || run(spacing, true));
            Ok(CurvePoint { spacing, missed_leakidt: l?, missed_pp: p? })
        })
        .collect()
}
