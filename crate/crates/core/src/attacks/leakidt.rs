use crate::core_sim::{Agent, Core, Cycle, EventKind, EventQueue, LogKind, SimLog, Subject};
use crate::mem_model::VirtAddr;

use super::{build_eviction_set, evict, leakidt_probe, AttackError, DetectionTrace, EvictionSet, ProbePages};

/// Polls one IDT entry until `end`, evicting it after each detection.
#[derive(Debug, Clone)]
pub struct LeakIdtMonitor {
    target: VirtAddr,
    probes: ProbePages,
    eviction: EvictionSet,
    end: Cycle,
    fast_forward: bool,
    trace: DetectionTrace,
}

impl LeakIdtMonitor {
    pub fn new(core: &Core, vector: u8, end: Cycle) -> Result<Self, AttackError> {
        Self::for_entry(core, core.idt().entry_addr(vector), Subject::Vector(vector), end)
    }

    /// Watches the byte at `target`, reporting detections under `subject`.
    pub fn for_entry(core: &Core, target: VirtAddr, subject: Subject, end: Cycle) -> Result<Self, AttackError> {
        if core.peek(target)? == 0 {
            return Err(AttackError::ZeroTargetByte(target));
        }
        Ok(Self {
            target,
            probes: ProbePages::for_target(core, target)?,
            eviction: build_eviction_set(core, target)?,
            end,
            fast_forward: true,
            trace: DetectionTrace::new(subject),
        })
    }

    /// Turns off collapsing of idle measurements (for checking it is exact).
    pub fn without_fast_forward(mut self) -> Self {
        self.fast_forward = false;
        self
    }

    /// Flushes the entry so monitoring starts from a known state.
    pub fn prepare(&self, core: &mut Core) -> Result<(), AttackError> {
        evict(core, &self.eviction)
    }

    pub fn trace(&self) -> &DetectionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> DetectionTrace {
        self.trace
    }

    fn measure(&mut self, core: &mut Core, horizon: Cycle, log: &mut SimLog) -> Result<(), AttackError> {
        let t = core.clock();
        let outcome = leakidt_probe(core, self.target, &self.probes)?;
        self.trace.measurements += 1;
        if outcome.cached {
            self.trace.times.push(t);
            log.push(t, LogKind::Detect, self.trace.subject, "leakidt");
            return evict(core, &self.eviction);
        }
        // With the target absent, a measurement leaves the cache exactly as it
        // found it: each probe line refills the way its flush freed. Until the
        // next event every further measurement is a copy. (A noisy miss on a
        // resident target is not idle, hence the simulator-side check.)
        if self.fast_forward && !core.cache().contains(self.target) {
            let cost = core.clock() - t;
            let limit = horizon.min(self.end);
            let now = core.clock();
            if cost > 0 && limit > now {
                let k = (limit - now).div_ceil(cost);
                core.advance(k * cost);
                self.trace.measurements += k;
            }
        }
        Ok(())
    }
}

impl Agent for LeakIdtMonitor {
    fn step(&mut self, core: &mut Core, horizon: Cycle, log: &mut SimLog) -> Option<Cycle> {
        if core.clock() >= self.end {
            return None;
        }
        // targets and probe lines were validated at construction
        self.measure(core, horizon, log).expect("monitor lines are mapped");
        Some(core.clock())
    }
}

/// Watches `vector` for `duration` cycles from the current clock while the
/// queued events play out.
pub fn monitor(
    core: &mut Core,
    queue: &mut EventQueue,
    vector: u8,
    duration: Cycle,
) -> Result<DetectionTrace, AttackError> {
    let end = core.clock() + duration;
    let mut agent = LeakIdtMonitor::new(core, vector, end)?;
    agent.prepare(core)?;
    queue.push(core.clock(), EventKind::AttackerStep);
    core.run(queue, &mut agent, end);
    Ok(agent.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn core(noise_p: f64) -> Core {
        Core::new(&SimConfig { noise_p, ..SimConfig::default() }, 3).unwrap()
    }

    #[test]
    fn idle_monitor_sees_nothing() {
        let mut c = core(0.0);
        let trace = monitor(&mut c, &mut EventQueue::new(), 35, Cycle(1_000_000)).unwrap();
        assert!(trace.is_empty());
        assert!(trace.measurements >= 1_000_000 / 2_000 - 1);
    }

    #[test]
    fn detects_spaced_interrupts() {
        let mut c = core(0.0);
        let mut q = EventQueue::new();
        q.push_interrupts(35, (1..=10).map(|i| Cycle(i * 50_000)));
        let trace = monitor(&mut c, &mut q, 35, Cycle(600_000)).unwrap();
        assert_eq!(trace.len(), 10);
        for (i, t) in trace.times.iter().enumerate() {
            let irq = (i as u64 + 1) * 50_000;
            assert!(t.0 > irq && t.0 - irq < 10_000, "{t:?} vs {irq}");
        }
    }

    #[test]
    fn other_blocks_are_invisible() {
        let mut c = core(0.0);
        let mut q = EventQueue::new();
        q.push_interrupts(236, (1..=10).map(|i| Cycle(i * 50_000)));
        assert!(monitor(&mut c, &mut q, 35, Cycle(600_000)).unwrap().is_empty());
    }

    #[test]
    fn same_block_is_indistinguishable() {
        // 33 and 35 share a line; 36 is on the prefetched partner
        for v in [33u8, 36] {
            let mut c = core(0.0);
            let mut q = EventQueue::new();
            q.push_interrupts(v, [Cycle(50_000)]);
            assert_eq!(monitor(&mut c, &mut q, 35, Cycle(100_000)).unwrap().len(), 1);
        }
    }

    #[test]
    fn fast_forward_is_exact() {
        let run = |ff: bool| {
            let mut c = core(0.05);
            let mut q = EventQueue::new();
            q.push_interrupts(35, (1..=40).map(|i| Cycle(i * 23_000 + (i * i) % 7_000)));
            q.push_interrupts(236, (1..=10).map(|i| Cycle(i * 97_000)));
            let end = Cycle(1_200_000);
            let mut agent = LeakIdtMonitor::new(&c, 35, end).unwrap();
            if !ff {
                agent = agent.without_fast_forward();
            }
            agent.prepare(&mut c).unwrap();
            q.push(c.clock(), EventKind::AttackerStep);
            let log = c.run(&mut q, &mut agent, end);
            (agent.into_trace(), log, c.cache().snapshot(), c.stats().interrupts, c.stats().window_misses)
        };
        let (a, b) = (run(true), run(false));
        assert_eq!(a.0.times, b.0.times, "times");
        assert_eq!(a.0.measurements, b.0.measurements, "measurements");
        assert_eq!(a.1, b.1, "log");
        assert_eq!(a.2, b.2, "cache");
        assert_eq!((a.3, a.4), (b.3, b.4));
    }
}
