//! Deterministic RNG sub-stream derivation.
//!
//! Every consumer of randomness derives its own stream from
//! `(seed, purpose label, index)` so that evaluation order and parallel
//! scheduling can never change results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent, reproducible RNG stream.
///
/// The label separates purposes ("prior", "resample", ...) and the index
/// separates iterations within a purpose.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(label.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_stream() {
        let mut a = substream(7, "prior", 3);
        let mut b = substream(7, "prior", 3);
        for _ in 0..16 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn distinct_labels_diverge() {
        let mut a = substream(7, "prior", 0);
        let mut b = substream(7, "resample", 0);
        let mut c = substream(7, "prior", 1);
        let x: u64 = a.random();
        assert_ne!(x, b.random::<u64>());
        assert_ne!(x, c.random::<u64>());
    }
}
