//! Named, seed-derived random streams.
//!
//! Every random draw in the toolkit comes from a generator keyed by
//! `(stream name, master seed, device index, step index)`, so results do not
//! depend on the order in which devices or steps are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    master: u64,
    device: u64,
}

impl SeedStream {
    pub fn new(master: u64, device: u64) -> Self {
        Self { master, device }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn device(&self) -> u64 {
        self.device
    }

    pub fn rng(&self, name: &str, step: u64) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update((name.len() as u64).to_le_bytes());
        hasher.update(name.as_bytes());
        hasher.update(self.master.to_le_bytes());
        hasher.update(self.device.to_le_bytes());
        hasher.update(step.to_le_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }
}
