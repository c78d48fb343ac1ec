//! Tree-PLRU replacement state.
//!
//! A set with `ways` ways keeps `ways - 1` direction bits laid out as a heap:
//! node `n` has children `2n + 1` and `2n + 2`, and the leaves (ways) follow
//! the internal nodes. A bit of 0 sends the victim search left, 1 sends it
//! right. Touching a way flips every bit on its path to point away from it.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreePlru {
    ways: usize,
}

impl TreePlru {
    /// `ways` must be a power of two no larger than 64.
    pub fn new(ways: usize) -> Self {
        assert!(ways.is_power_of_two() && ways <= 64, "unsupported associativity {ways}");
        Self { ways }
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn victim(&self, bits: u64) -> usize {
        let internal = self.ways - 1;
        let mut node = 0;
        while node < internal {
            node = 2 * node + 1 + ((bits >> node) & 1) as usize;
        }
        node - internal
    }

    pub fn touch(&self, bits: u64, way: usize) -> u64 {
        debug_assert!(way < self.ways);
        let mut bits = bits;
        let mut node = way + self.ways - 1;
        while node > 0 {
            let parent = (node - 1) / 2;
            let came_from_left = node == 2 * parent + 1;
            if came_from_left {
                bits |= 1 << parent;
            } else {
                bits &= !(1 << parent);
            }
            node = parent;
        }
        bits
    }
}
