//! Virtually indexed, set-associative L1D with Tree-PLRU replacement, an
//! adjacent-line prefetcher and MTRR-style fill suppression.

mod plru;

pub use plru::TreePlru;

use thiserror::Error;

use crate::mem_model::{
    MachineConfigDelta, MemError, MemoryTypeRanges, PhysAddr, UncachableRegion, VirtAddr, LINE_BYTES,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("ways {0} must be a power of two in 1..=64")]
    Ways(usize),
    #[error("sets {0} must be a power of two in 1..=64")]
    Sets(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheGeometry {
    pub sets: usize,
    pub ways: usize,
    pub line_bytes: u64,
}

impl Default for CacheGeometry {
    fn default() -> Self {
        Self { sets: 64, ways: 8, line_bytes: LINE_BYTES }
    }
}

impl CacheGeometry {
    pub fn new(sets: usize, ways: usize) -> Result<Self, GeometryError> {
        if !ways.is_power_of_two() || ways > 64 {
            return Err(GeometryError::Ways(ways));
        }
        // index bits must stay inside the page offset
        if !sets.is_power_of_two() || sets > 64 {
            return Err(GeometryError::Sets(sets));
        }
        Ok(Self { sets, ways, line_bytes: LINE_BYTES })
    }

    pub fn set_index(&self, addr: VirtAddr) -> usize {
        ((addr.as_u64() / self.line_bytes) as usize) & (self.sets - 1)
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.sets as u64 * self.ways as u64 * self.line_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessOutcome {
    pub hit: bool,
    pub evicted: Option<VirtAddr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Resident {
    line: VirtAddr,
    phys: PhysAddr,
}

#[derive(Debug, Clone)]
pub struct L1dCache {
    geometry: CacheGeometry,
    plru: TreePlru,
    ways: Vec<Option<Resident>>,
    bits: Vec<u64>,
    mtrr: MemoryTypeRanges,
}

impl L1dCache {
    pub fn new(geometry: CacheGeometry, mtrr_budget: usize) -> Self {
        Self {
            geometry,
            plru: TreePlru::new(geometry.ways),
            ways: vec![None; geometry.sets * geometry.ways],
            bits: vec![0; geometry.sets],
            mtrr: MemoryTypeRanges::new(mtrr_budget),
        }
    }

    pub fn geometry(&self) -> CacheGeometry {
        self.geometry
    }

    fn set_slots(&self, set: usize) -> &[Option<Resident>] {
        let w = self.geometry.ways;
        &self.ways[set * w..(set + 1) * w]
    }

    fn find(&self, set: usize, line: VirtAddr) -> Option<usize> {
        self.set_slots(set).iter().position(|slot| matches!(slot, Some(r) if r.line == line))
    }

    /// Demand access to one line. Suppressed fills leave the cache untouched.
    pub fn access(&mut self, line: VirtAddr, phys: PhysAddr) -> AccessOutcome {
        debug_assert_eq!(line.as_u64() % self.geometry.line_bytes, 0, "unaligned line {line}");
        let set = self.geometry.set_index(line);
        if let Some(way) = self.find(set, line) {
            self.bits[set] = self.plru.touch(self.bits[set], way);
            return AccessOutcome { hit: true, evicted: None };
        }
        if self.mtrr.is_uncachable(phys) {
            return AccessOutcome { hit: false, evicted: None };
        }
        let way =
            self.set_slots(set).iter().position(Option::is_none).unwrap_or_else(|| self.plru.victim(self.bits[set]));
        let slot = &mut self.ways[set * self.geometry.ways + way];
        let evicted = slot.map(|r| r.line);
        *slot = Some(Resident { line, phys: phys.line_base() });
        self.bits[set] = self.plru.touch(self.bits[set], way);
        AccessOutcome { hit: false, evicted }
    }

    /// Demand access plus the spatial prefetch of the other line in the
    /// 128-byte-aligned pair. A partner that is already resident or
    /// fill-suppressed is left alone.
    pub fn demand_fill_with_prefetch(&mut self, line: VirtAddr, phys: PhysAddr) -> AccessOutcome {
        let outcome = self.access(line, phys);
        let partner = VirtAddr::new(line.as_u64() ^ self.geometry.line_bytes);
        let partner_phys = PhysAddr::new(phys.line_base().as_u64() ^ self.geometry.line_bytes);
        if !self.contains(partner) && !self.mtrr.is_uncachable(partner_phys) {
            self.access(partner, partner_phys);
        }
        outcome
    }

    /// Invalidates `line` if present; replacement bits are not touched.
    pub fn flush(&mut self, line: VirtAddr) {
        let set = self.geometry.set_index(line);
        if let Some(way) = self.find(set, line) {
            self.ways[set * self.geometry.ways + way] = None;
        }
    }

    pub fn contains(&self, line: VirtAddr) -> bool {
        self.find(self.geometry.set_index(line), line.line_base()).is_some()
    }

    /// Lines resident in `set`, by way (`None` for invalid ways).
    pub fn set_contents(&self, set: usize) -> Vec<Option<VirtAddr>> {
        self.set_slots(set).iter().map(|s| s.map(|r| r.line)).collect()
    }

    pub fn plru_bits(&self, set: usize) -> u64 {
        self.bits[set]
    }

    /// Every resident line, in (set, way) order.
    pub fn snapshot(&self) -> Vec<Option<VirtAddr>> {
        self.ways.iter().map(|s| s.map(|r| r.line)).collect()
    }

    pub fn is_fill_suppressed(&self, phys: PhysAddr) -> bool {
        self.mtrr.is_uncachable(phys)
    }

    /// Marks a physical range uncachable and drops any lines already cached
    /// from it, as the write-back-and-invalidate after an MTRR update would.
    pub fn install_uncachable(&mut self, region: UncachableRegion) -> Result<MachineConfigDelta, MemError> {
        let delta = self.mtrr.install(region)?;
        if delta.installed.is_some() {
            for slot in &mut self.ways {
                if matches!(slot, Some(r) if region.contains(r.phys)) {
                    *slot = None;
                }
            }
        }
        Ok(delta)
    }

    pub fn clear(&mut self) {
        self.ways.iter_mut().for_each(|s| *s = None);
        self.bits.iter_mut().for_each(|b| *b = 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mem_model::PAGE_SIZE;

    fn cache() -> L1dCache {
        L1dCache::new(CacheGeometry::default(), 8)
    }

    // user line in `set`, page `page`; phys mirrors virt for convenience
    fn line(page: u64, set: u64) -> (VirtAddr, PhysAddr) {
        let v = 0x1000_0000 + page * PAGE_SIZE + set * 64;
        (VirtAddr::new(v), PhysAddr::new(v))
    }

    #[test]
    fn geometry_checks() {
        assert!(CacheGeometry::new(64, 8).is_ok());
        assert_eq!(CacheGeometry::new(64, 6), Err(GeometryError::Ways(6)));
        assert_eq!(CacheGeometry::new(128, 8), Err(GeometryError::Sets(128)));
        assert_eq!(CacheGeometry::default().capacity_bytes(), 32 * 1024);
    }

    #[test]
    fn cold_miss_then_hit() {
        let mut c = cache();
        let (v, p) = line(0, 3);
        assert_eq!(c.access(v, p), AccessOutcome { hit: false, evicted: None });
        assert_eq!(c.access(v, p), AccessOutcome { hit: true, evicted: None });
        assert!(c.contains(v));
    }

    #[test]
    fn ninth_line_evicts_plru_victim() {
        let mut c = cache();
        for page in 0..8 {
            let (v, p) = line(page, 5);
            c.access(v, p);
        }
        // fills went to ways 0..7 in order; bits after touching 0..7 in order
        // point at way 0, whose line is page 0
        let (v, p) = line(8, 5);
        let out = c.access(v, p);
        assert!(!out.hit);
        assert_eq!(out.evicted, Some(line(0, 5).0));
    }

    #[test]
    fn uncachable_line_never_fills() {
        let mut c = cache();
        c.install_uncachable(UncachableRegion { start: PhysAddr::new(0x1000_0000), len: PAGE_SIZE }).unwrap();
        let (v, p) = line(0, 9);
        let before = c.snapshot();
        assert!(!c.access(v, p).hit);
        assert!(!c.access(v, p).hit);
        assert_eq!(c.snapshot(), before);
        assert_eq!(c.plru_bits(9), 0);
    }

    #[test]
    fn install_drops_resident_lines_in_region() {
        let mut c = cache();
        let (v, p) = line(0, 9);
        c.access(v, p);
        c.install_uncachable(UncachableRegion { start: PhysAddr::new(0x1000_0000), len: PAGE_SIZE }).unwrap();
        assert!(!c.contains(v));
    }

    #[test]
    fn prefetch_pairs() {
        let mut c = cache();
        let base = 0xffff_fe00_0000_0000u64;
        c.demand_fill_with_prefetch(VirtAddr::new(base + 0x980), PhysAddr::new(0x2000_0980));
        assert!(c.contains(VirtAddr::new(base + 0x980)));
        assert!(c.contains(VirtAddr::new(base + 0x9c0)));

        let mut c = cache();
        c.demand_fill_with_prefetch(VirtAddr::new(base + 0x9c0), PhysAddr::new(0x2000_09c0));
        assert!(c.contains(VirtAddr::new(base + 0x980)));
        assert!(c.contains(VirtAddr::new(base + 0x9c0)));
        assert!(!c.contains(VirtAddr::new(base + 0x940)));
        assert!(!c.contains(VirtAddr::new(base + 0xa00)));
    }

    #[test]
    fn prefetch_respects_suppression() {
        let mut c = cache();
        c.install_uncachable(UncachableRegion { start: PhysAddr::new(0x2000_0000), len: PAGE_SIZE }).unwrap();
        let base = 0xffff_fe00_0000_0000u64;
        c.demand_fill_with_prefetch(VirtAddr::new(base + 0x980), PhysAddr::new(0x2000_0980));
        assert!(!c.contains(VirtAddr::new(base + 0x980)));
        assert!(!c.contains(VirtAddr::new(base + 0x9c0)));
    }

    #[test]
    fn flush_keeps_neighbours_and_bits() {
        let mut c = cache();
        let lines: Vec<_> = (0..8).map(|p| line(p, 12)).collect();
        for (v, p) in &lines {
            c.access(*v, *p);
        }
        let bits = c.plru_bits(12);
        c.flush(lines[3].0);
        assert!(!c.contains(lines[3].0));
        for (i, (v, _)) in lines.iter().enumerate() {
            assert_eq!(c.contains(*v), i != 3);
        }
        assert_eq!(c.plru_bits(12), bits);
        // absent line: no-op
        let snap = c.snapshot();
        c.flush(line(40, 12).0);
        assert_eq!(c.snapshot(), snap);
    }

    #[test]
    fn refill_after_flush_uses_the_freed_way() {
        let mut c = cache();
        let lines: Vec<_> = (0..8).map(|p| line(p, 1)).collect();
        for (v, p) in &lines {
            c.access(*v, *p);
        }
        c.flush(lines[5].0);
        let (v, p) = line(20, 1);
        assert_eq!(c.access(v, p).evicted, None);
        assert_eq!(c.set_contents(1)[5], Some(v));
    }
}
