//! Independent reference models used as test oracles.

#![allow(dead_code)]

use idtsim::config::SimConfig;
use idtsim::core_sim::Cycle;

pub fn quiet_config() -> SimConfig {
    SimConfig { noise_p: 0.0, ..SimConfig::default() }
}

/// Tree-PLRU as an explicit binary tree of boxed nodes. Each node remembers
/// which side the next victim comes from; leaves are ways, left to right.
#[derive(Debug, Clone)]
pub enum Tree {
    Leaf(Option<u64>),
    Node { victim_right: bool, left: Box<Tree>, right: Box<Tree> },
}

impl Tree {
    pub fn new(ways: usize) -> Tree {
        if ways == 1 {
            Tree::Leaf(None)
        } else {
            Tree::Node {
                victim_right: false,
                left: Box::new(Tree::new(ways / 2)),
                right: Box::new(Tree::new(ways / 2)),
            }
        }
    }

    pub fn contains(&self, line: u64) -> bool {
        match self {
            Tree::Leaf(l) => *l == Some(line),
            Tree::Node { left, right, .. } => left.contains(line) || right.contains(line),
        }
    }

    /// Points every node on the way to `line` at the other side.
    fn touch(&mut self, line: u64) {
        if let Tree::Node { victim_right, left, right } = self {
            if left.contains(line) {
                *victim_right = true;
                left.touch(line);
            } else {
                *victim_right = false;
                right.touch(line);
            }
        }
    }

    fn fill_first_empty(&mut self, line: u64) -> bool {
        match self {
            Tree::Leaf(slot @ None) => {
                *slot = Some(line);
                true
            }
            Tree::Leaf(Some(_)) => false,
            Tree::Node { left, right, .. } => left.fill_first_empty(line) || right.fill_first_empty(line),
        }
    }

    fn replace_victim(&mut self, line: u64) -> Option<u64> {
        match self {
            Tree::Leaf(slot) => slot.replace(line),
            Tree::Node { victim_right: true, right, .. } => right.replace_victim(line),
            Tree::Node { left, .. } => left.replace_victim(line),
        }
    }

    fn remove(&mut self, line: u64) {
        match self {
            Tree::Leaf(slot) if *slot == Some(line) => *slot = None,
            Tree::Leaf(_) => {}
            Tree::Node { left, right, .. } => {
                left.remove(line);
                right.remove(line);
            }
        }
    }

    pub fn leaves(&self) -> Vec<Option<u64>> {
        match self {
            Tree::Leaf(l) => vec![*l],
            Tree::Node { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

/// Reference cache: one tree per set, set = address bits 6..=11.
pub struct RefCache {
    pub sets: Vec<Tree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefOutcome {
    pub hit: bool,
    pub evicted: Option<u64>,
}

impl RefCache {
    pub fn new(sets: usize, ways: usize) -> Self {
        Self { sets: (0..sets).map(|_| Tree::new(ways)).collect() }
    }

    fn set_of(&self, line: u64) -> usize {
        ((line >> 6) as usize) % self.sets.len()
    }

    pub fn access(&mut self, line: u64) -> RefOutcome {
        let s = self.set_of(line);
        let tree = &mut self.sets[s];
        if tree.contains(line) {
            tree.touch(line);
            return RefOutcome { hit: true, evicted: None };
        }
        let evicted = if tree.fill_first_empty(line) { None } else { tree.replace_victim(line) };
        tree.touch(line);
        RefOutcome { hit: false, evicted }
    }

    pub fn flush(&mut self, line: u64) {
        let s = self.set_of(line);
        self.sets[s].remove(line);
    }

    pub fn contains(&self, line: u64) -> bool {
        self.sets[self.set_of(line)].contains(line)
    }
}

/// Brute-force keystroke scorer: every detection is compared against every
/// key. Returns (matched, false positives, first-detection delays in cycles).
pub fn hand_score(detected: &[u64], keys: &[u64], hold_max: u64, window: u64) -> (u64, u64, Vec<i64>) {
    let mut per_key: Vec<Vec<u64>> = vec![Vec::new(); keys.len()];
    for &d in detected {
        let mut claims: Vec<(u64, usize)> = Vec::new();
        for (k, &t) in keys.iter().enumerate() {
            let lo = t.saturating_sub(window);
            let hi = t + hold_max + window;
            if d >= lo && d <= hi {
                let dist = if d < t { t - d } else { d.saturating_sub(t + hold_max) };
                claims.push((dist, k));
            }
        }
        claims.sort();
        let unique = match claims.as_slice() {
            [] => None,
            [only] => Some(only.1),
            [a, b, ..] if a.0 < b.0 => Some(a.1),
            _ => None,
        };
        if let Some(k) = unique {
            per_key[k].push(d);
        }
    }
    let matched: u64 = per_key.iter().map(|v| v.len().min(2) as u64).sum();
    let delays = per_key.iter().zip(keys).filter_map(|(v, &t)| v.first().map(|&d| d as i64 - t as i64)).collect();
    (matched, detected.len() as u64 - matched, delays)
}

pub fn cycles(v: &[u64]) -> Vec<Cycle> {
    v.iter().copied().map(Cycle).collect()
}
