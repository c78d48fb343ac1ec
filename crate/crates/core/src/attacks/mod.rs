//! Unprivileged attacker programs.
//!
//! [`leakidt_probe`] is one measurement: a transient read of an IDT entry
//! whose value steers a dependent load into one of two probe lines, decoded
//! with Flush+Reload. [`LeakIdtMonitor`] repeats it, evicting the entry after
//! every hit. [`PrimeProbeMonitor`] is the classic baseline that watches the
//! entry's cache set, and [`template_idt`] locates an unknown vector.

mod leakidt;
mod prime_probe;
mod template;

pub use leakidt::{monitor, LeakIdtMonitor};
pub use prime_probe::{prime_probe_monitor, PrimeProbeMonitor};
pub use template::{template_idt, TemplateOutcome};

use std::io::Write;

use thiserror::Error;

use crate::core_sim::{Core, Cycle, Latency, LogError, LogKind, SimError, SimLog, Subject};
use crate::mem_model::VirtAddr;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("target byte at {0} is zero; the transient read cannot tell cached from uncached")]
    ZeroTargetByte(VirtAddr),
    #[error("eviction set needs {needed} user pages, only {available} mapped")]
    InsufficientUserMemory { needed: u64, available: u64 },
    #[error("no IDT line reacts to the induced interrupt")]
    NoDistinctEntry,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The two Flush+Reload lines of the covert channel. `zero` is loaded when
/// the transient read returns 0x00, `nonzero` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbePages {
    pub zero: VirtAddr,
    pub nonzero: VirtAddr,
}

impl ProbePages {
    /// Two heap lines in sets a quarter of the cache away from `target`'s,
    /// clear of its set, its prefetch partner and any ISR footprint.
    pub fn for_target(core: &Core, target: VirtAddr) -> Result<Self, AttackError> {
        let heap = core.space().user_heap;
        if heap.pages < 2 {
            return Err(AttackError::InsufficientUserMemory { needed: 2, available: heap.pages });
        }
        let g = core.cache().geometry();
        let set = g.set_index(target);
        let at = |page, quarter| {
            let s = (set + quarter * g.sets / 4) % g.sets;
            heap.page(page).offset(s as u64 * g.line_bytes)
        };
        Ok(Self { zero: at(0, 1), nonzero: at(1, 3) })
    }
}

/// User lines congruent with `target`: same page offset, so the same L1D
/// set. One more than the associativity (unless direct-mapped): with exactly
/// `ways` lines, invalid ways left by flushes can let the members evict each
/// other while the target survives both passes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvictionSet {
    pub target: VirtAddr,
    pub members: Vec<VirtAddr>,
}

pub fn build_eviction_set(core: &Core, target: VirtAddr) -> Result<EvictionSet, AttackError> {
    let ways = core.cache().geometry().ways as u64;
    let needed = if ways > 1 { ways + 1 } else { 1 };
    let heap = core.space().user_heap;
    if heap.pages < needed {
        return Err(AttackError::InsufficientUserMemory { needed, available: heap.pages });
    }
    let offset = target.line_base().page_offset();
    let members = (0..needed).map(|p| heap.page(p).offset(offset)).collect();
    Ok(EvictionSet { target: target.line_base(), members })
}

/// Two passes over the eviction set. Under tree-PLRU one pass is not always
/// enough: a member that hits does not move the victim pointer off the target.
pub fn evict(core: &mut Core, set: &EvictionSet) -> Result<(), AttackError> {
    let start = core.clock();
    for _ in 0..2 {
        for m in &set.members {
            core.user_access(*m)?;
        }
    }
    core.finish_op(start, core.costs().evict_cost);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeOutcome {
    /// The target line was in L1D (the transient read saw its nonzero byte).
    pub cached: bool,
}

/// One measurement of `target`; takes `probe_cost` cycles.
pub fn leakidt_probe(core: &mut Core, target: VirtAddr, probes: &ProbePages) -> Result<ProbeOutcome, AttackError> {
    if core.peek(target)? == 0 {
        return Err(AttackError::ZeroTargetByte(target));
    }
    let start = core.clock();
    core.user_flush(probes.zero)?;
    core.user_flush(probes.nonzero)?;
    // cmp [rax],0 ; cmovne rcx,rbx ; mov rax,[rcx]
    let read = core.transient_read(target);
    core.user_access(if read.value != 0 { probes.nonzero } else { probes.zero })?;
    core.user_access(probes.zero)?;
    let cached = core.user_access(probes.nonzero)? == Latency::Hit;
    core.user_flush(probes.zero)?;
    core.user_flush(probes.nonzero)?;
    core.finish_op(start, core.costs().probe_cost);
    Ok(ProbeOutcome { cached })
}

/// Times at which a monitor saw its target become cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionTrace {
    pub subject: Subject,
    /// Strictly increasing.
    pub times: Vec<Cycle>,
    /// Number of measurements taken, detections included.
    pub measurements: u64,
}

impl DetectionTrace {
    pub fn new(subject: Subject) -> Self {
        Self { subject, times: Vec::new(), measurements: 0 }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_log(&self) -> SimLog {
        let mut log = SimLog::default();
        for t in &self.times {
            log.push(*t, LogKind::Detect, self.subject, "");
        }
        log
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LogError> {
        self.to_log().write_csv(out)
    }
}
