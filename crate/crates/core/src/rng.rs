//! Seeded, labeled random streams.
//!
//! A master seed fans out into independent ChaCha streams keyed by a text
//! label, so each stochastic step ("synth", "knockoff", "edge-0-3", ...) draws
//! from its own stream regardless of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha20Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master: u64,
    pub label: String,
}

impl RngSeed {
    pub fn new(master: u64, label: impl Into<String>) -> Self {
        Self {
            master,
            label: label.into(),
        }
    }

    /// Derives a child seed whose label is `"{self.label}/{suffix}"`.
    pub fn child(&self, suffix: impl AsRef<str>) -> Self {
        let label = if self.label.is_empty() {
            suffix.as_ref().to_string()
        } else {
            format!("{}/{}", self.label, suffix.as_ref())
        };
        Self {
            master: self.master,
            label,
        }
    }

    /// Same master seed, different label.
    pub fn with_label(&self, label: impl Into<String>) -> Self {
        Self {
            master: self.master,
            label: label.into(),
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master);
        rng.set_stream(fnv1a(self.label.as_bytes()));
        rng
    }
}

// FNV-1a, stable across platforms and compiler versions (unlike DefaultHasher).
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
