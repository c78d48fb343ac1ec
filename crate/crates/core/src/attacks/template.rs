use serde::Serialize;

use crate::core_sim::{Core, Cycle, EventKind, EventQueue, Subject};
use crate::mem_model::{block_start, ENTRIES_PER_BLOCK, ENTRIES_PER_LINE, IDT_VECTORS};
use crate::seed;
use crate::workloads::{install_background, BackgroundConfig, InterruptSource};

use super::{AttackError, LeakIdtMonitor};

/// A line's differential must exceed this many standard deviations of the
/// quiet counts across lines.
const THRESHOLD_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemplateOutcome {
    /// First vector of the 8-entry prefetch block that reacted.
    pub block_start: u8,
    /// The induced vector when it is the only active one in the block,
    /// otherwise the block representative.
    pub vector: u8,
    pub exact: bool,
    /// Detections per IDT line without and with the induced source.
    pub quiet_counts: Vec<u64>,
    pub induced_counts: Vec<u64>,
}

impl TemplateOutcome {
    pub fn differentials(&self) -> Vec<i64> {
        self.induced_counts.iter().zip(&self.quiet_counts).map(|(i, q)| *i as i64 - *q as i64).collect()
    }
}

/// Monitors every IDT line for `window` cycles, once with only `background`
/// and once with `induce` added, and picks the line whose count grows most.
///
/// The prefetcher caches lines in pairs, so the answer is only as fine as an
/// 8-entry block unless nothing else in the block fires.
pub fn template_idt(
    core: &mut Core,
    background: &BackgroundConfig,
    induce: &InterruptSource,
    window: Cycle,
    seed: u64,
) -> Result<TemplateOutcome, AttackError> {
    let lines = IDT_VECTORS / ENTRIES_PER_LINE as usize;
    let mut quiet = vec![0u64; lines];
    let mut induced = vec![0u64; lines];
    for line in 0..lines {
        let vector = (line * ENTRIES_PER_LINE as usize) as u8;
        for (pass, counts) in [(0u64, &mut quiet), (1, &mut induced)] {
            let pass_seed = seed::indexed_seed(seed, "template-window", 2 * line as u64 + pass);
            let start = core.clock();
            let end = start + window;
            let mut queue = EventQueue::new();
            install_background(core, &mut queue, background, start, end, pass_seed)?;
            if pass == 1 {
                let times = induce.times(start, end, core.cycles_per_us(), seed::sub_seed(pass_seed, &["induce"]));
                queue.push_interrupts(induce.vector, times);
            }
            let mut agent =
                LeakIdtMonitor::for_entry(core, core.idt().entry_addr(vector), Subject::Vector(vector), end)?;
            agent.prepare(core)?;
            queue.push(core.clock(), EventKind::AttackerStep);
            core.run(&mut queue, &mut agent, end);
            core.advance_to(end);
            counts[line] = agent.trace().len() as u64;
        }
    }

    let n = lines as f64;
    let mean = quiet.iter().sum::<u64>() as f64 / n;
    let sigma = (quiet.iter().map(|c| (*c as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (best, diff) = induced
        .iter()
        .zip(&quiet)
        .map(|(i, q)| *i as i64 - *q as i64)
        .enumerate()
        .fold((0, i64::MIN), |acc, (l, d)| if d > acc.1 { (l, d) } else { acc });
    if diff <= 0 || diff as f64 <= THRESHOLD_SIGMAS * sigma {
        return Err(AttackError::NoDistinctEntry);
    }

    let block = block_start((best * ENTRIES_PER_LINE as usize) as u8);
    let first_line = block as usize / ENTRIES_PER_LINE as usize;
    let lines_per_block = (ENTRIES_PER_BLOCK / ENTRIES_PER_LINE) as usize;
    let block_quiet = quiet[first_line..first_line + lines_per_block].iter().all(|c| *c == 0);
    let in_block = block_start(induce.vector) == block;
    let exact = in_block && block_quiet;
    Ok(TemplateOutcome {
        block_start: block,
        vector: if exact { induce.vector } else { block },
        exact,
        quiet_counts: quiet,
        induced_counts: induced,
    })
}
