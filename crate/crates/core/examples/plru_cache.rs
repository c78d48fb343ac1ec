//! The L1D model on its own: fill one set past its associativity and watch
//! Tree-PLRU pick victims, then the adjacent-line prefetcher at work.
//!
//! ```bash
//! cargo run --example plru_cache
//! ```

use idtsim::cache::{CacheGeometry, L1dCache};
use idtsim::mem_model::{PhysAddr, VirtAddr};

fn main() {
    let mut cache = L1dCache::new(CacheGeometry::default(), 8);
    let line = |page: u64| 0x1000_0000 + page * 4096 + 38 * 64;

    for page in 0..12 {
        let a = line(page);
        let out = cache.access(VirtAddr::new(a), PhysAddr::new(a));
        let evicted = out.evicted.map_or("-".to_string(), |e| format!("{:#x}", e.as_u64()));
        println!(
            "page {page:2}: {} evicted {evicted:>12} plru {:07b}",
            if out.hit { "hit " } else { "miss" },
            cache.plru_bits(38)
        );
    }

    let idt_line = VirtAddr::new(0xffff_fe00_0000_09c0);
    cache.demand_fill_with_prefetch(idt_line, PhysAddr::new(0x4000_09c0));
    println!("prefetch partner of {idt_line} resident: {}", cache.contains(VirtAddr::new(0xffff_fe00_0000_0980)));
}
