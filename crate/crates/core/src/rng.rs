//! Named, reproducible random streams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// A root seed from which independent named sub-streams are derived.
///
/// The derivation is stable across platforms and toolchains, so a given
/// `(root, name, index)` always produces the same generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// A nested tree, for handing a module its own namespace.
    pub fn child(&self, name: &str) -> SeedTree {
        SeedTree {
            root: splitmix64(self.root ^ fnv1a(name.as_bytes())),
        }
    }

    pub fn stream(&self, name: &str) -> StreamRng {
        self.indexed(name, 0)
    }

    pub fn indexed(&self, name: &str, index: u64) -> StreamRng {
        let a = splitmix64(self.root ^ fnv1a(name.as_bytes()));
        let b = splitmix64(a ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        ChaCha8Rng::seed_from_u64(b)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
