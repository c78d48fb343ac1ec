//! Named sub-seed derivation.
//!
//! Every random stream in a run is keyed by the master `--seed` plus a label,
//! so adding a new consumer never perturbs the existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a 64-bit sub-seed from `master` and a path of labels.
pub fn sub_seed(master: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Same as [`sub_seed`] with an extra numeric index (trace number, run number).
pub fn indexed_seed(master: u64, label: &str, index: u64) -> u64 {
    sub_seed(master, &[label, &index.to_string()])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
