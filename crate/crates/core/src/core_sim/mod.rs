//! Single-core discrete-event machine.
//!
//! The core owns the cache, the address space and the IDT. Interrupts,
//! background workload ticks and attacker steps are events on one queue;
//! each is atomic with respect to the others, and the clock only moves
//! forward.

mod event;
mod log;
mod time;

pub use event::{Event, EventKind, EventQueue};
pub use log::{LogError, LogKind, LogRecord, SimLog, Subject, LOG_HEADER};
pub use time::Cycle;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cache::{CacheGeometry, GeometryError, L1dCache};
use crate::config::{CostTable, SimConfig};
use crate::mem_model::{
    build_kpti_space, AddressSpace, IdtLayout, MachineConfigDelta, MemError, PhysAddr, PhysMemory, UncachableRegion,
    View, VirtAddr, ENTRIES_PER_LINE, IDT_VECTORS, PAGE_SIZE,
};
use crate::seed;

/// Set offsets (from the first set of a vector's prefetch pair) of the
/// kernel-text lines each ISR touches. None of them lands in the pair itself.
const ISR_FOOTPRINT_SET_OFFSETS: [usize; 4] = [2, 18, 34, 50];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("protection fault: {0} is not user accessible")]
    ProtectionFault(VirtAddr),
    #[error("{0} is not mapped in the kernel view")]
    Unmapped(VirtAddr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// No user-view mapping; nothing can leak.
    Unmapped,
    /// Supervisor page read from user mode; suppressed, value observed transiently.
    Suppressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransientRead {
    pub value: u8,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Latency {
    Hit,
    Miss,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoreStats {
    pub interrupts: u64,
    pub transient_reads: u64,
    pub suppressed_faults: u64,
    pub unmapped_faults: u64,
    pub window_misses: u64,
    pub workload_ticks: u64,
}

/// An attacker program driven by `AttackerStep` events.
pub trait Agent {
    /// Runs one atomic step at `core.clock()` and returns when to run next,
    /// or `None` to stop. No event is pending before `horizon`; an agent may
    /// use that to collapse steps it can prove are identical.
    fn step(&mut self, core: &mut Core, horizon: Cycle, log: &mut SimLog) -> Option<Cycle>;
}

/// An agent that never does anything.
pub struct Passive;

impl Agent for Passive {
    fn step(&mut self, _: &mut Core, _: Cycle, _: &mut SimLog) -> Option<Cycle> {
        None
    }
}

#[derive(Debug, Clone)]
struct Workload {
    lines: Vec<(VirtAddr, PhysAddr)>,
    per_tick: usize,
    cursor: usize,
}

#[derive(Debug, Clone)]
pub struct Core {
    clock: Cycle,
    cache: L1dCache,
    space: AddressSpace,
    idt: IdtLayout,
    memory: PhysMemory,
    isr_footprint: Vec<Vec<(VirtAddr, PhysAddr)>>,
    /// Per IDT line: the counter line its handlers' tails update.
    tail_lines: Vec<(VirtAddr, PhysAddr)>,
    costs: CostTable,
    cycles_per_us: u64,
    noise_p: f64,
    noise: ChaCha8Rng,
    workloads: Vec<Workload>,
    /// Sorted, non-overlapping windows during which attacker steps wait.
    blocked: Vec<(Cycle, Cycle)>,
    stats: CoreStats,
}

impl Core {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self, SimError> {
        let geometry = CacheGeometry::new(config.l1d_sets, config.l1d_ways)?;
        let space = build_kpti_space(config)?;
        let idt = IdtLayout::generate(space.idt_page);

        let mut memory = PhysMemory::default();
        let idt_phys = space.translate(View::Kernel, idt.base).ok_or(SimError::Unmapped(idt.base))?;
        memory.write_slice(idt_phys, &idt.to_bytes());
        for page in 0..space.secret.pages {
            let phys = space.translate(View::Kernel, space.secret.page(page)).expect("secret mapped");
            let pattern: Vec<u8> = (0..PAGE_SIZE).map(|i| 0x5a ^ (i as u8)).collect();
            memory.write_slice(phys, &pattern);
        }

        let mut core = Self {
            clock: Cycle::ZERO,
            cache: L1dCache::new(geometry, config.mtrr_budget),
            isr_footprint: Vec::new(),
            tail_lines: Vec::new(),
            space,
            idt,
            memory,
            costs: config.costs.clone(),
            cycles_per_us: config.cycles_per_us,
            noise_p: config.noise_p,
            noise: seed::rng(seed::sub_seed(seed, &["core", "oracle-noise"])),
            workloads: Vec::new(),
            blocked: Vec::new(),
            stats: CoreStats::default(),
        };
        core.isr_footprint = (0..IDT_VECTORS as u16).map(|v| core.footprint_for(v as u8)).collect();
        core.tail_lines = (0..IDT_VECTORS as u16)
            .step_by(ENTRIES_PER_LINE as usize)
            .filter_map(|v| core.tail_line_for(v as u8))
            .collect();
        Ok(core)
    }

    /// Per-vector statistics live in a kernel data array laid out like the
    /// IDT, so the line a tail updates is congruent with the IDT line.
    fn tail_line_for(&self, vector: u8) -> Option<(VirtAddr, PhysAddr)> {
        let text = self.space.kernel_text;
        if text.pages == 0 {
            return None;
        }
        let line = text.page(text.pages - 1).offset(self.idt_line(vector).page_offset());
        Some((line, self.space.translate(View::Kernel, line).expect("kernel text mapped")))
    }

    fn footprint_for(&self, vector: u8) -> Vec<(VirtAddr, PhysAddr)> {
        let text = self.space.kernel_text;
        if text.pages == 0 {
            return Vec::new();
        }
        let geometry = self.cache.geometry();
        let pair_line = VirtAddr::new(self.idt_line(vector).as_u64() & !(2 * geometry.line_bytes - 1));
        let pair_set = geometry.set_index(pair_line);
        ISR_FOOTPRINT_SET_OFFSETS
            .iter()
            .enumerate()
            .map(|(k, off)| {
                let page = ((vector as u64 % 16) * 4 + k as u64) % text.pages;
                let set = (pair_set + off) % geometry.sets;
                let line = text.page(page).offset(set as u64 * geometry.line_bytes);
                (line, self.space.translate(View::Kernel, line).expect("kernel text mapped"))
            })
            .collect()
    }

    pub fn clock(&self) -> Cycle {
        self.clock
    }

    pub fn advance(&mut self, cycles: u64) {
        self.clock += cycles;
    }

    pub fn advance_to(&mut self, t: Cycle) {
        self.clock = self.clock.max(t);
    }

    /// Ends an attacker operation that began at `start` and costs `cost`
    /// cycles in the cost table, whatever its individual loads added up to.
    /// Only valid inside one atomic step (no event can land in between).
    pub fn finish_op(&mut self, start: Cycle, cost: u64) {
        self.clock = start + cost;
    }

    pub fn costs(&self) -> &CostTable {
        &self.costs
    }

    pub fn cycles_per_us(&self) -> u64 {
        self.cycles_per_us
    }

    pub fn noise_p(&self) -> f64 {
        self.noise_p
    }

    pub fn set_noise_p(&mut self, p: f64) {
        assert!((0.0..=1.0).contains(&p));
        self.noise_p = p;
    }

    pub fn cache(&self) -> &L1dCache {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut L1dCache {
        &mut self.cache
    }

    pub fn space(&self) -> &AddressSpace {
        &self.space
    }

    pub fn idt(&self) -> &IdtLayout {
        &self.idt
    }

    pub fn stats(&self) -> CoreStats {
        self.stats
    }

    /// Line holding the IDT entry of `vector`.
    pub fn idt_line(&self, vector: u8) -> VirtAddr {
        self.idt.entry_addr(vector).line_base()
    }

    pub fn isr_footprint(&self, vector: u8) -> impl Iterator<Item = VirtAddr> + '_ {
        self.isr_footprint[vector as usize].iter().map(|(v, _)| *v)
    }

    fn kernel_phys(&self, addr: VirtAddr) -> Result<PhysAddr, SimError> {
        self.space.translate(View::Kernel, addr).ok_or(SimError::Unmapped(addr))
    }

    /// Writes a byte through the kernel view (test and setup helper).
    pub fn poke(&mut self, addr: VirtAddr, byte: u8) -> Result<(), SimError> {
        let phys = self.kernel_phys(addr)?;
        self.memory.write(phys, byte);
        Ok(())
    }

    pub fn peek(&self, addr: VirtAddr) -> Result<u8, SimError> {
        Ok(self.memory.read(self.kernel_phys(addr)?))
    }

    /// A kernel-mode demand access (no prefetch), e.g. a victim syscall.
    pub fn kernel_access(&mut self, addr: VirtAddr) -> Result<bool, SimError> {
        let phys = self.kernel_phys(addr)?;
        Ok(self.cache.access(addr.line_base(), phys.line_base()).hit)
    }

    /// Marks the physical IDT page uncachable with one MTRR.
    pub fn install_uncachable_idt(&mut self) -> Result<MachineConfigDelta, SimError> {
        let phys = self.kernel_phys(self.idt.base)?;
        Ok(self.cache.install_uncachable(UncachableRegion { start: phys, len: PAGE_SIZE })?)
    }

    pub fn install_uncachable(&mut self, region: UncachableRegion) -> Result<MachineConfigDelta, SimError> {
        Ok(self.cache.install_uncachable(region)?)
    }

    /// CPU interrupt entry: the IDT entry is read (with its prefetch partner),
    /// the handler touches its footprint, and the core is busy for `isr_cost`.
    pub fn deliver_interrupt(&mut self, vector: u8) {
        let line = self.idt_line(vector);
        let phys = self.kernel_phys(line).expect("IDT is mapped");
        self.cache.demand_fill_with_prefetch(line, phys);
        for i in 0..self.isr_footprint[vector as usize].len() {
            let (line, phys) = self.isr_footprint[vector as usize][i];
            self.cache.access(line, phys);
        }
        self.clock += self.costs.isr_cost;
        self.stats.interrupts += 1;
    }

    /// The deferred tail of `vector`'s handler: updates the vector's
    /// statistics line. Runs `tail_delay` after the ISR when driven by
    /// [`Core::run`].
    pub fn deliver_isr_tail(&mut self, vector: u8) {
        if let Some((line, phys)) = self.tail_lines.get(vector as usize / ENTRIES_PER_LINE as usize).copied() {
            self.cache.access(line, phys);
        }
        self.clock += self.costs.tail_cost;
    }

    /// Faulting user-mode load of `addr`, observed transiently.
    ///
    /// Leaks the byte only when its line is resident in L1D (and the
    /// transient window does not miss with probability `noise_p`);
    /// otherwise 0x00 is seen. Never changes cache state.
    pub fn transient_read(&mut self, addr: VirtAddr) -> TransientRead {
        self.stats.transient_reads += 1;
        let Some(mapping) = self.space.lookup(View::User, addr).copied() else {
            self.stats.unmapped_faults += 1;
            return TransientRead { value: 0, fault: Some(Fault::Unmapped) };
        };
        let fault = if mapping.user_accessible {
            None
        } else {
            self.stats.suppressed_faults += 1;
            Some(Fault::Suppressed)
        };
        let mut value = 0;
        if self.cache.contains(addr.line_base()) {
            if self.noise_p > 0.0 && self.noise.random_bool(self.noise_p) {
                self.stats.window_misses += 1;
            } else {
                value = self.memory.read(mapping.translate(addr));
            }
        }
        TransientRead { value, fault }
    }

    /// Timed user-mode load.
    pub fn user_access(&mut self, addr: VirtAddr) -> Result<Latency, SimError> {
        let mapping = self
            .space
            .lookup(View::User, addr)
            .filter(|m| m.user_accessible)
            .copied()
            .ok_or(SimError::ProtectionFault(addr))?;
        let hit = self.cache.access(addr.line_base(), mapping.translate(addr).line_base()).hit;
        if hit {
            self.clock += self.costs.hit_latency;
            Ok(Latency::Hit)
        } else {
            self.clock += self.costs.miss_latency;
            Ok(Latency::Miss)
        }
    }

    /// `clflush` of a user line.
    pub fn user_flush(&mut self, addr: VirtAddr) -> Result<(), SimError> {
        self.space.lookup(View::User, addr).filter(|m| m.user_accessible).ok_or(SimError::ProtectionFault(addr))?;
        self.cache.flush(addr.line_base());
        Ok(())
    }

    /// Registers a workload that touches `per_tick` consecutive lines of
    /// `lines` (cyclically) on every tick. Returns its id.
    pub fn add_workload(&mut self, lines: &[VirtAddr], per_tick: usize) -> Result<u16, SimError> {
        let lines = lines
            .iter()
            .map(|l| Ok((l.line_base(), self.kernel_phys(*l)?.line_base())))
            .collect::<Result<Vec<_>, SimError>>()?;
        self.workloads.push(Workload { lines, per_tick, cursor: 0 });
        Ok((self.workloads.len() - 1) as u16)
    }

    fn run_workload_tick(&mut self, id: u16) {
        let w = &mut self.workloads[id as usize];
        if !w.lines.is_empty() {
            for _ in 0..w.per_tick {
                let (line, phys) = w.lines[w.cursor];
                w.cursor = (w.cursor + 1) % w.lines.len();
                self.cache.access(line, phys);
            }
        }
        self.clock += self.costs.tick_cost;
        self.stats.workload_ticks += 1;
    }

    /// Keeps the attacker off the core during `[start, end)`.
    pub fn block_attacker(&mut self, start: Cycle, end: Cycle) {
        if end <= start {
            return;
        }
        let pos = self.blocked.partition_point(|w| w.0 < start);
        self.blocked.insert(pos, (start, end));
        // merge overlaps
        let mut merged: Vec<(Cycle, Cycle)> = Vec::with_capacity(self.blocked.len());
        for w in self.blocked.drain(..) {
            match merged.last_mut() {
                Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
                _ => merged.push(w),
            }
        }
        self.blocked = merged;
    }

    /// End of the blocked window containing `t`, if any.
    fn blocked_until(&self, t: Cycle) -> Option<Cycle> {
        let i = self.blocked.partition_point(|w| w.1 <= t);
        self.blocked.get(i).filter(|w| w.0 <= t).map(|w| w.1)
    }

    fn next_block_start(&self, t: Cycle) -> Option<Cycle> {
        let i = self.blocked.partition_point(|w| w.0 <= t);
        self.blocked.get(i).map(|w| w.0)
    }

    /// Processes queued events with time `< until` in order and returns the log.
    pub fn run(&mut self, queue: &mut EventQueue, agent: &mut dyn Agent, until: Cycle) -> SimLog {
        let mut log = SimLog::default();
        self.run_into(queue, agent, until, &mut log);
        log
    }

    pub fn run_into(&mut self, queue: &mut EventQueue, agent: &mut dyn Agent, until: Cycle, log: &mut SimLog) {
        while let Some(t) = queue.peek_time() {
            if t >= until {
                break;
            }
            let ev = queue.pop().expect("peeked");
            self.clock = self.clock.max(ev.time);
            match ev.kind {
                EventKind::Interrupt(v) => {
                    log.push(ev.time, LogKind::Irq, Subject::Vector(v), "");
                    self.deliver_interrupt(v);
                    queue.push(self.clock + self.costs.tail_delay, EventKind::IsrTail(v));
                }
                EventKind::IsrTail(v) => self.deliver_isr_tail(v),
                EventKind::WorkloadTick(id) => {
                    self.run_workload_tick(id);
                }
                EventKind::AttackerStep => {
                    if let Some(end) = self.blocked_until(self.clock) {
                        queue.push(end, EventKind::AttackerStep);
                        continue;
                    }
                    let mut horizon = until;
                    if let Some(next) = queue.peek_time() {
                        horizon = horizon.min(next);
                    }
                    if let Some(b) = self.next_block_start(self.clock) {
                        horizon = horizon.min(b);
                    }
                    if let Some(next) = agent.step(self, horizon, log) {
                        queue.push(next.max(self.clock), EventKind::AttackerStep);
                    }
                }
            }
        }
    }
}
