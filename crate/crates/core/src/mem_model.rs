//! Address space, page mappings, IDT layout and cache-line arithmetic.
//!
//! The model keeps two views of the same address space, as KPTI does: the
//! kernel view maps everything, the user view maps user memory plus the small
//! residue of kernel pages x86 needs while running in ring 3. The IDT page is
//! always part of that residue.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;

pub const PAGE_SIZE: u64 = 4096;
pub const LINE_BYTES: u64 = 64;
pub const IDT_VECTORS: usize = 256;
pub const IDT_ENTRY_BYTES: u64 = 16;
/// Vectors sharing one 64-byte line.
pub const ENTRIES_PER_LINE: u8 = (LINE_BYTES / IDT_ENTRY_BYTES) as u8;
/// Vectors sharing one 128-byte adjacent-line prefetch block.
pub const ENTRIES_PER_BLOCK: u8 = 2 * ENTRIES_PER_LINE;

const USER_HEAP_BASE: u64 = 0x0000_5555_0000_0000;
const WORKLOAD_BASE: u64 = 0x0000_7f00_0000_0000;
const KERNEL_TEXT_BASE: u64 = 0xffff_ffff_8100_0000;
const KERNEL_SECRET_BASE: u64 = 0xffff_ffff_8200_0000;
/// Physical frames for user memory grow up from here.
const USER_PHYS_BASE: u64 = 0x10_0000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemError {
    #[error("address {0:#x} is not canonical")]
    NonCanonical(u64),
    #[error("config error: {0}")]
    Config(String),
    #[error("uncachable region overlaps an installed region")]
    RegionOverlap,
    #[error("no MTRR left (budget {budget})")]
    BudgetExceeded { budget: usize },
    #[error("uncachable region {start:#x}+{len:#x} does not cover whole pages")]
    UnalignedRegion { start: u64, len: u64 },
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct VirtAddr(u64);

impl VirtAddr {
    /// Panics on a non-canonical address.
    pub const fn new(value: u64) -> Self {
        assert!(Self::is_canonical(value), "non-canonical virtual address");
        Self(value)
    }

    /// Bits 63..48 replicate bit 47.
    pub const fn is_canonical(value: u64) -> bool {
        let upper = value >> 47;
        upper == 0 || upper == 0x1_ffff
    }

    pub const fn try_new(value: u64) -> Result<Self, MemError> {
        if Self::is_canonical(value) {
            Ok(Self(value))
        } else {
            Err(MemError::NonCanonical(value))
        }
    }

    pub const fn as_u64(self) -> u64 {
        self.0
    }

    pub const fn page_base(self) -> VirtAddr {
        VirtAddr(self.0 & !(PAGE_SIZE - 1))
    }

    pub const fn page_offset(self) -> u64 {
        self.0 & (PAGE_SIZE - 1)
    }

    pub const fn line_base(self) -> VirtAddr {
        VirtAddr(self.0 & !(LINE_BYTES - 1))
    }

    /// Wrapping add that keeps the address canonical; panics otherwise.
    pub const fn offset(self, bytes: u64) -> VirtAddr {
        VirtAddr::new(self.0.wrapping_add(bytes))
    }

    pub const fn is_kernel(self) -> bool {
        self.0 >> 63 == 1
    }
}

impl fmt::Debug for VirtAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VirtAddr({:#x})", self.0)
    }
}

impl fmt::Display for VirtAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct PhysAddr(u64);

impl PhysAddr {
    pub const fn new(value: u64) -> Self {
        Self(value)
    }

    pub const fn as_u64(self) -> u64 {
        self.0
    }

    pub const fn line_base(self) -> PhysAddr {
        PhysAddr(self.0 & !(LINE_BYTES - 1))
    }

    pub const fn frame(self) -> u64 {
        self.0 / PAGE_SIZE
    }
}

impl fmt::Debug for PhysAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhysAddr({:#x})", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentTag {
    IdtPage,
    KernelEntry,
    DescriptorTable,
    DirectMap,
    UserData,
    /// ISR bodies; kernel view only.
    KernelText,
    /// Secrets KPTI must hide; kernel view only.
    KernelData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageMapping {
    pub virt_page: VirtAddr,
    pub phys_page: PhysAddr,
    pub user_accessible: bool,
    pub cacheable: bool,
    pub content_tag: ContentTag,
}

impl PageMapping {
    pub fn translate(&self, addr: VirtAddr) -> PhysAddr {
        PhysAddr(self.phys_page.0 + addr.page_offset())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    User,
    Kernel,
}

/// A run of virtual pages handed out by the builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub base: VirtAddr,
    pub pages: u64,
}

impl Region {
    pub fn page(&self, index: u64) -> VirtAddr {
        assert!(index < self.pages, "page {index} outside region of {} pages", self.pages);
        self.base.offset(index * PAGE_SIZE)
    }

    pub fn contains(&self, addr: VirtAddr) -> bool {
        let a = addr.as_u64();
        a >= self.base.as_u64() && a < self.base.as_u64() + self.pages * PAGE_SIZE
    }
}

#[derive(Debug, Clone)]
pub struct AddressSpace {
    user_view: BTreeMap<u64, PageMapping>,
    kernel_view: BTreeMap<u64, PageMapping>,
    pub idt_page: VirtAddr,
    pub user_heap: Region,
    pub workload: Region,
    pub kernel_text: Region,
    pub secret: Region,
}

impl AddressSpace {
    pub fn lookup(&self, view: View, addr: VirtAddr) -> Option<&PageMapping> {
        let key = addr.page_base().as_u64();
        match view {
            View::User => self.user_view.get(&key),
            View::Kernel => self.kernel_view.get(&key),
        }
    }

    pub fn translate(&self, view: View, addr: VirtAddr) -> Option<PhysAddr> {
        self.lookup(view, addr).map(|m| m.translate(addr))
    }

    pub fn user_mappings(&self) -> impl Iterator<Item = &PageMapping> {
        self.user_view.values()
    }

    pub fn kernel_mappings(&self) -> impl Iterator<Item = &PageMapping> {
        self.kernel_view.values()
    }

    /// Kernel pages visible from user mode.
    pub fn user_kernel_page_count(&self) -> usize {
        self.user_view.values().filter(|m| m.virt_page.is_kernel()).count()
    }
}

struct SpaceBuilder {
    user: BTreeMap<u64, PageMapping>,
    kernel: BTreeMap<u64, PageMapping>,
    phys_limit: u64,
    next_user_frame: u64,
    next_kernel_frame: u64,
    kernel_window_base: u64,
}

impl SpaceBuilder {
    fn map(
        &mut self,
        region: Region,
        user_visible: bool,
        user_accessible: bool,
        tag_for: impl Fn(u64) -> ContentTag,
    ) -> Result<(), MemError> {
        for i in 0..region.pages {
            let virt = region
                .base
                .as_u64()
                .checked_add(i * PAGE_SIZE)
                .ok_or_else(|| MemError::Config(format!("range at {} wraps the address space", region.base)))?;
            let virt = VirtAddr::try_new(virt)?;
            if self.kernel.contains_key(&virt.as_u64()) {
                return Err(MemError::Config(format!("page {virt} mapped twice (overlapping ranges)")));
            }
            let phys = if virt.is_kernel() {
                let p = self.next_kernel_frame;
                self.next_kernel_frame += PAGE_SIZE;
                p
            } else {
                let p = self.next_user_frame;
                self.next_user_frame += PAGE_SIZE;
                if self.next_user_frame > self.kernel_window_base {
                    return Err(MemError::Config("physical memory exhausted by user pages".into()));
                }
                p
            };
            if phys + PAGE_SIZE > self.phys_limit {
                return Err(MemError::Config("physical memory exhausted".into()));
            }
            let mapping = PageMapping {
                virt_page: virt,
                phys_page: PhysAddr(phys),
                user_accessible,
                cacheable: true,
                content_tag: tag_for(i),
            };
            self.kernel.insert(virt.as_u64(), mapping);
            if user_visible {
                self.user.insert(virt.as_u64(), mapping);
            }
        }
        Ok(())
    }
}

/// Builds the KPTI split address space described by `config`.
///
/// Kernel pages are packed into a reserved physical window at the top half of
/// physical memory in the order they are mapped; user pages grow from
/// [`USER_PHYS_BASE`].
pub fn build_kpti_space(config: &SimConfig) -> Result<AddressSpace, MemError> {
    let idt_page = VirtAddr::try_new(config.idt_base)?;
    if idt_page.page_offset() != 0 || !idt_page.is_kernel() {
        return Err(MemError::Config(format!("idt_base {idt_page} must be a page-aligned kernel address")));
    }
    let phys_limit = config.phys_mem_bytes;
    let kernel_window_base = (phys_limit / 2) & !(PAGE_SIZE - 1);
    let mut b = SpaceBuilder {
        user: BTreeMap::new(),
        kernel: BTreeMap::new(),
        phys_limit,
        next_user_frame: USER_PHYS_BASE,
        next_kernel_frame: kernel_window_base,
        kernel_window_base,
    };

    let mut idt_covered = false;
    for range in &config.kernel_ranges {
        let base = VirtAddr::try_new(range.start)?;
        if base.page_offset() != 0 || !base.is_kernel() {
            return Err(MemError::Config(format!(
                "kernel range {} must start at a page-aligned kernel address",
                range.name
            )));
        }
        let region = Region { base, pages: range.pages };
        if region.contains(idt_page) {
            idt_covered = true;
        }
        let tag = range.tag;
        b.map(region, true, false, |i| {
            if base.as_u64() + i * PAGE_SIZE == idt_page.as_u64() {
                ContentTag::IdtPage
            } else {
                tag
            }
        })?;
    }
    if !idt_covered {
        // x86 needs the IDT mapped in ring 3, so it is mapped even if no range names it.
        b.map(Region { base: idt_page, pages: 1 }, true, false, |_| ContentTag::IdtPage)?;
    }

    let kernel_text = Region { base: VirtAddr::new(KERNEL_TEXT_BASE), pages: config.kernel_text_pages };
    b.map(kernel_text, false, false, |_| ContentTag::KernelText)?;
    let secret = Region { base: VirtAddr::new(KERNEL_SECRET_BASE), pages: config.secret_pages };
    b.map(secret, false, false, |_| ContentTag::KernelData)?;
    let user_heap = Region { base: VirtAddr::new(USER_HEAP_BASE), pages: config.user_heap_pages };
    b.map(user_heap, true, true, |_| ContentTag::UserData)?;
    let workload = Region { base: VirtAddr::new(WORKLOAD_BASE), pages: config.workload_pages };
    b.map(workload, true, true, |_| ContentTag::UserData)?;

    Ok(AddressSpace { user_view: b.user, kernel_view: b.kernel, idt_page, user_heap, workload, kernel_text, secret })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdtEntry {
    pub isr_pointer: u64,
    pub meta: u64,
}

#[derive(Debug, Clone)]
pub struct IdtLayout {
    pub base: VirtAddr,
    entries: Vec<IdtEntry>,
}

impl IdtLayout {
    /// Generates a table whose ISR pointers look like kernel text addresses.
    /// The low byte of every pointer is odd, hence nonzero.
    pub fn generate(base: VirtAddr) -> Self {
        let entries = (0..IDT_VECTORS as u64)
            .map(|v| IdtEntry {
                isr_pointer: 0xffff_ffff_81c0_0000 + 0x20 * v + 0x5,
                // kernel CS selector, present 64-bit interrupt gate, DPL 0
                meta: 0x10 | (0x8e << 16),
            })
            .collect();
        Self { base, entries }
    }

    pub fn entry(&self, vector: u8) -> IdtEntry {
        self.entries[vector as usize]
    }

    pub fn entry_addr(&self, vector: u8) -> VirtAddr {
        idt_entry_addr(self, vector)
    }

    /// The 4096 bytes of the table, entries little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PAGE_SIZE as usize);
        for e in &self.entries {
            out.extend_from_slice(&e.isr_pointer.to_le_bytes());
            out.extend_from_slice(&e.meta.to_le_bytes());
        }
        out
    }
}

pub fn idt_entry_addr(idt: &IdtLayout, vector: u8) -> VirtAddr {
    idt.base.offset(IDT_ENTRY_BYTES * vector as u64)
}

/// First vector of the 8-entry prefetch block containing `vector`.
pub fn block_start(vector: u8) -> u8 {
    vector - vector % ENTRIES_PER_BLOCK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheLine {
    pub line_addr: VirtAddr,
    pub set_index: usize,
}

/// Line address and L1D set (address bits 6..=11) of `addr`.
pub fn cache_line_of(addr: VirtAddr) -> CacheLine {
    CacheLine { line_addr: addr.line_base(), set_index: ((addr.as_u64() >> 6) & 0x3f) as usize }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncachableRegion {
    pub start: PhysAddr,
    pub len: u64,
}

impl UncachableRegion {
    pub fn contains(&self, addr: PhysAddr) -> bool {
        addr.0 >= self.start.0 && addr.0 - self.start.0 < self.len
    }

    fn overlaps(&self, other: &UncachableRegion) -> bool {
        self.start.0 < other.start.0 + other.len && other.start.0 < self.start.0 + self.len
    }
}

/// What installing a region changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MachineConfigDelta {
    pub installed: Option<UncachableRegion>,
    /// Number of 64-byte physical lines whose fills are now suppressed.
    pub suppressed_lines: u64,
}

/// MTRR-style uncachable ranges. Regions cannot be removed once installed.
#[derive(Debug, Clone)]
pub struct MemoryTypeRanges {
    budget: usize,
    regions: Vec<UncachableRegion>,
}

impl MemoryTypeRanges {
    pub fn new(budget: usize) -> Self {
        Self { budget, regions: Vec::new() }
    }

    pub fn install(&mut self, region: UncachableRegion) -> Result<MachineConfigDelta, MemError> {
        if region.len == 0 {
            return Ok(MachineConfigDelta { installed: None, suppressed_lines: 0 });
        }
        if !region.start.0.is_multiple_of(PAGE_SIZE) || !region.len.is_multiple_of(PAGE_SIZE) {
            return Err(MemError::UnalignedRegion { start: region.start.0, len: region.len });
        }
        if self.regions.iter().any(|r| r.overlaps(&region)) {
            return Err(MemError::RegionOverlap);
        }
        if self.regions.len() >= self.budget {
            return Err(MemError::BudgetExceeded { budget: self.budget });
        }
        self.regions.push(region);
        Ok(MachineConfigDelta { installed: Some(region), suppressed_lines: region.len / LINE_BYTES })
    }

    pub fn is_uncachable(&self, addr: PhysAddr) -> bool {
        self.regions.iter().any(|r| r.contains(addr))
    }

    pub fn regions(&self) -> &[UncachableRegion] {
        &self.regions
    }
}

/// Sparse byte-addressable physical memory; untouched pages read as zero.
#[derive(Debug, Clone, Default)]
pub struct PhysMemory {
    frames: HashMap<u64, Box<[u8]>>,
}

impl PhysMemory {
    pub fn read(&self, addr: PhysAddr) -> u8 {
        self.frames.get(&addr.frame()).map_or(0, |f| f[(addr.0 % PAGE_SIZE) as usize])
    }

    pub fn write(&mut self, addr: PhysAddr, byte: u8) {
        let frame = self.frames.entry(addr.frame()).or_insert_with(|| vec![0u8; PAGE_SIZE as usize].into_boxed_slice());
        frame[(addr.0 % PAGE_SIZE) as usize] = byte;
    }

    pub fn write_slice(&mut self, addr: PhysAddr, bytes: &[u8]) {
        for (i, b) in bytes.iter().enumerate() {
            self.write(PhysAddr(addr.0 + i as u64), *b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{KernelRange, SimConfig};

    fn idt() -> IdtLayout {
        IdtLayout::generate(VirtAddr::new(0xffff_fe00_0000_0000))
    }

    #[test]
    fn canonical_form() {
        assert!(VirtAddr::try_new(0xffff_fe00_0000_0000).is_ok());
        assert!(VirtAddr::try_new(0x0000_7fff_ffff_ffff).is_ok());
        assert_eq!(VirtAddr::try_new(0x0000_8000_0000_0000), Err(MemError::NonCanonical(0x0000_8000_0000_0000)));
        assert!(VirtAddr::try_new(0xfff0_0000_0000_0000).is_err());
    }

    #[test]
    fn default_space_maps_idt_for_users() {
        let space = build_kpti_space(&SimConfig::default()).unwrap();
        let m = space.lookup(View::User, VirtAddr::new(0xffff_fe00_0000_0000)).unwrap();
        assert_eq!(m.content_tag, ContentTag::IdtPage);
        assert!(!m.user_accessible);
    }

    #[test]
    fn secrets_are_kernel_only() {
        let space = build_kpti_space(&SimConfig::default()).unwrap();
        let secret = space.secret.page(0);
        assert!(space.lookup(View::User, secret).is_none());
        assert!(space.lookup(View::Kernel, secret).is_some());
    }

    #[test]
    fn three_ranges_two_one_four() {
        let mut cfg = SimConfig::default();
        cfg.kernel_ranges = vec![
            KernelRange { name: "dt".into(), start: cfg.idt_base, pages: 2, tag: ContentTag::DescriptorTable },
            KernelRange { name: "entry".into(), start: 0xffff_ffff_81e0_0000, pages: 1, tag: ContentTag::KernelEntry },
            KernelRange { name: "dm".into(), start: 0xffff_8880_0010_0000, pages: 4, tag: ContentTag::DirectMap },
        ];
        let space = build_kpti_space(&cfg).unwrap();
        assert_eq!(space.user_kernel_page_count(), 7);
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let mut cfg = SimConfig::default();
        cfg.kernel_ranges.push(KernelRange {
            name: "dup".into(),
            start: cfg.idt_base + PAGE_SIZE,
            pages: 1,
            tag: ContentTag::DirectMap,
        });
        assert!(matches!(build_kpti_space(&cfg), Err(MemError::Config(_))));
    }

    #[test]
    fn user_view_subset_of_kernel_view() {
        let space = build_kpti_space(&SimConfig::default()).unwrap();
        for m in space.user_mappings() {
            assert_eq!(space.lookup(View::Kernel, m.virt_page), Some(m));
        }
        assert!(space.kernel_mappings().count() > space.user_mappings().count());
    }

    #[test]
    fn entry_addresses() {
        let idt = idt();
        assert_eq!(idt_entry_addr(&idt, 0), idt.base);
        assert_eq!(idt_entry_addr(&idt, 1).as_u64(), 0xffff_fe00_0000_0010);
        // 153 * 16 = 2448 = 0x990
        assert_eq!(idt_entry_addr(&idt, 153).as_u64(), idt.base.as_u64() + 0x990);
    }

    #[test]
    fn line_and_set() {
        let a = cache_line_of(VirtAddr::new(0xffff_fe00_0000_0000));
        assert_eq!(a.set_index, 0);
        assert_eq!(cache_line_of(VirtAddr::new(0xffff_fe00_0000_0040)).set_index, 1);
        // 0x990 = 0b1001_1001_0000: bits 6..11 = 0b100110 = 38
        let c = cache_line_of(VirtAddr::new(0xffff_fe00_0000_0990));
        assert_eq!(c.line_addr.as_u64(), 0xffff_fe00_0000_0980);
        assert_eq!(c.set_index, 38);
    }

    #[test]
    fn four_vectors_per_line_and_full_page_image() {
        let idt = idt();
        let mut lines = std::collections::BTreeMap::<u64, Vec<u8>>::new();
        for v in 0..=255u8 {
            lines.entry(cache_line_of(idt.entry_addr(v)).line_addr.as_u64()).or_default().push(v);
        }
        assert_eq!(lines.len(), 64);
        for vs in lines.values() {
            assert_eq!(vs.len(), 4);
            assert!(vs.windows(2).all(|w| w[1] == w[0] + 1));
        }
        let addrs: std::collections::BTreeSet<u64> = (0..=255u8).map(|v| idt.entry_addr(v).as_u64()).collect();
        assert_eq!(addrs.len(), 256);
        assert_eq!(*addrs.first().unwrap(), idt.base.as_u64());
        assert_eq!(*addrs.last().unwrap() + 16, idt.base.as_u64() + 4096);
    }

    #[test]
    fn isr_pointers_nonzero_low_byte() {
        let idt = idt();
        let bytes = idt.to_bytes();
        assert_eq!(bytes.len(), 4096);
        for v in 0..=255u8 {
            assert_ne!(idt.entry(v).isr_pointer, 0);
            assert_ne!(bytes[v as usize * 16], 0);
        }
    }

    #[test]
    fn mtrr_install_rules() {
        let mut mtrr = MemoryTypeRanges::new(8);
        let idt_region = UncachableRegion { start: PhysAddr::new(0x2000_0000), len: PAGE_SIZE };
        let delta = mtrr.install(idt_region).unwrap();
        assert_eq!(delta.suppressed_lines, 64);
        assert!(mtrr.is_uncachable(PhysAddr::new(0x2000_0fc0)));
        assert!(!mtrr.is_uncachable(PhysAddr::new(0x2000_1000)));

        let empty = mtrr.install(UncachableRegion { start: PhysAddr::new(0x5000), len: 0 }).unwrap();
        assert_eq!(empty, MachineConfigDelta { installed: None, suppressed_lines: 0 });
        assert_eq!(mtrr.regions().len(), 1);

        let overlapping = UncachableRegion { start: PhysAddr::new(0x1fff_f000), len: 2 * PAGE_SIZE };
        assert_eq!(mtrr.install(overlapping), Err(MemError::RegionOverlap));
        assert!(matches!(
            mtrr.install(UncachableRegion { start: PhysAddr::new(0x10), len: PAGE_SIZE }),
            Err(MemError::UnalignedRegion { .. })
        ));
    }

    #[test]
    fn mtrr_budget() {
        let mut mtrr = MemoryTypeRanges::new(1);
        mtrr.install(UncachableRegion { start: PhysAddr::new(0), len: PAGE_SIZE }).unwrap();
        assert_eq!(
            mtrr.install(UncachableRegion { start: PhysAddr::new(PAGE_SIZE), len: PAGE_SIZE }),
            Err(MemError::BudgetExceeded { budget: 1 })
        );
    }
}
