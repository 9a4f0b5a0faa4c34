//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha stream addressed by
//! `(seed, domain, index)`: the key is derived from the seed and a domain tag,
//! and the index selects the ChaCha stream id. A replicate, chain or stratum
//! therefore sees the same numbers whatever order or thread it runs on.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the engine.
pub type StreamRng = ChaCha8Rng;

/// Separates the uses of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Chain = 1,
    Stratum = 2,
    Replicate = 3,
    DrawSelection = 4,
    Fit = 5,
    Synthetic = 6,
    Scenario = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let key = splitmix64(seed ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// A child seed, for components that take a seed rather than a generator.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain as u64)) ^ index)
}

/// `k` distinct indices from `0..n` in random order (all of them when `k >= n`).
pub fn choose_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let (chosen, _) = idx.partial_shuffle(rng, k.min(n));
    chosen.to_vec()
}
