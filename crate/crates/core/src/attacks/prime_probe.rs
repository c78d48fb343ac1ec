use crate::core_sim::{Agent, Core, Cycle, EventKind, EventQueue, Latency, LogKind, SimLog, Subject};

use super::{build_eviction_set, AttackError, DetectionTrace};

/// Prime+Probe on the L1D set of an IDT entry.
///
/// Each round reloads the `ways` congruent lines, alternating direction so
/// the probe does not evict its own lines. A round that misses suggests a
/// foreign line entered the set. One miss round is too weak (the set also
/// self-evicts after any disturbance), so a detection requires two
/// consecutive miss rounds; it is timestamped at the second and the counter
/// restarts.
#[derive(Debug, Clone)]
pub struct PrimeProbeMonitor {
    lines: Vec<crate::mem_model::VirtAddr>,
    forward: bool,
    prev_missed: bool,
    end: Cycle,
    fast_forward: bool,
    trace: DetectionTrace,
}

impl PrimeProbeMonitor {
    pub fn new(core: &Core, vector: u8, end: Cycle) -> Result<Self, AttackError> {
        let mut set = build_eviction_set(core, core.idt().entry_addr(vector))?;
        // exactly fill the set, or priming evicts its own lines
        set.members.truncate(core.cache().geometry().ways);
        Ok(Self {
            lines: set.members,
            forward: true,
            prev_missed: false,
            end,
            fast_forward: true,
            trace: DetectionTrace::new(Subject::Vector(vector)),
        })
    }

    pub fn without_fast_forward(mut self) -> Self {
        self.fast_forward = false;
        self
    }

    /// Fills the set with the probe lines; not counted as measurements.
    pub fn prepare(&mut self, core: &mut Core) -> Result<(), AttackError> {
        for _ in 0..2 {
            self.round(core)?;
        }
        self.prev_missed = false;
        Ok(())
    }

    pub fn trace(&self) -> &DetectionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> DetectionTrace {
        self.trace
    }

    fn round(&mut self, core: &mut Core) -> Result<usize, AttackError> {
        let start = core.clock();
        let mut misses = 0;
        let n = self.lines.len();
        for i in 0..n {
            let line = self.lines[if self.forward { i } else { n - 1 - i }];
            if core.user_access(line)? == Latency::Miss {
                misses += 1;
            }
        }
        self.forward = !self.forward;
        core.finish_op(start, core.costs().probe_cost);
        Ok(misses)
    }

    fn measure(&mut self, core: &mut Core, horizon: Cycle, log: &mut SimLog) -> Result<(), AttackError> {
        let t = core.clock();
        let misses = self.round(core)?;
        self.trace.measurements += 1;
        if misses > 0 {
            if self.prev_missed {
                self.trace.times.push(t);
                log.push(t, LogKind::Detect, self.trace.subject, "prime+probe");
                self.prev_missed = false;
            } else {
                self.prev_missed = true;
            }
            return Ok(());
        }
        self.prev_missed = false;
        // All lines hit, so the set holds exactly the probe lines and the next
        // two rounds (one per direction) restore the current state. Skip pairs.
        if self.fast_forward {
            let cost = core.clock() - t;
            let limit = horizon.min(self.end);
            let now = core.clock();
            if cost > 0 && limit > now {
                let k = (limit - now).div_ceil(cost) / 2 * 2;
                core.advance(k * cost);
                self.trace.measurements += k;
            }
        }
        Ok(())
    }
}

impl Agent for PrimeProbeMonitor {
    fn step(&mut self, core: &mut Core, horizon: Cycle, log: &mut SimLog) -> Option<Cycle> {
        if core.clock() >= self.end {
            return None;
        }
        self.measure(core, horizon, log).expect("probe lines are mapped");
        Some(core.clock())
    }
}

/// Prime+Probe counterpart of [`super::monitor`].
pub fn prime_probe_monitor(
    core: &mut Core,
    queue: &mut EventQueue,
    vector: u8,
    duration: Cycle,
) -> Result<DetectionTrace, AttackError> {
    let end = core.clock() + duration;
    let mut agent = PrimeProbeMonitor::new(core, vector, end)?;
    agent.prepare(core)?;
    queue.push(core.clock(), EventKind::AttackerStep);
    core.run(queue, &mut agent, end);
    Ok(agent.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn core() -> Core {
        Core::new(&SimConfig { noise_p: 0.0, ..SimConfig::default() }, 3).unwrap()
    }

    #[test]
    fn quiet_set_gives_nothing() {
        let mut c = core();
        let trace = prime_probe_monitor(&mut c, &mut EventQueue::new(), 35, Cycle(2_000_000)).unwrap();
        assert!(trace.is_empty());
        assert!(trace.measurements >= 990);
    }

    #[test]
    fn fast_forward_is_exact() {
        let run = |ff: bool| {
            let mut c = core();
            let mut q = EventQueue::new();
            q.push_interrupts(35, (1..=30).map(|i| Cycle(i * 31_000 + (i * i) % 5_000)));
            q.push_interrupts(24, (1..=10).map(|i| Cycle(i * 87_000)));
            let end = Cycle(1_000_000);
            let mut agent = PrimeProbeMonitor::new(&c, 35, end).unwrap();
            if !ff {
                agent = agent.without_fast_forward();
            }
            agent.prepare(&mut c).unwrap();
            q.push(c.clock(), EventKind::AttackerStep);
            let log = c.run(&mut q, &mut agent, end);
            (agent.into_trace(), log, c.cache().snapshot())
        };
        assert_eq!(run(true), run(false));
    }
}
