//! Seeded randomness: every stochastic operation in the crate draws from a
//! `ChaCha12` stream keyed by an explicit seed, so identical seeds give
//! bit-identical results on every platform.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha12Rng;

/// Build a deterministic RNG from a 64-bit seed.
pub fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Derive an independent child seed from a master seed and a list of stream
/// tags (stage name, image index, repetition, ...). SplitMix64 finalization
/// over the folded inputs; distinct tag tuples give distinct streams.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = master ^ 0x9e37_79b9_7f4a_7c15;
    for &tag in tags {
        state = splitmix64(state ^ tag.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    }
    splitmix64(state)
}

/// Tag value for string stream names, for use with [`derive_seed`].
pub fn tag(name: &str) -> u64 {
    // FNV-1a over the bytes.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in name.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draw one index from a categorical distribution given by `probs`.
///
/// `probs` must be non-negative; it is treated as unnormalized (the draw uses
/// its running sum), so slightly-off column sums do not bias the tail.
pub fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Multinomial counts: `shots` independent categorical draws, tallied.
pub fn multinomial_counts<R: Rng>(rng: &mut R, probs: &[f64], shots: u64) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        counts[sample_categorical(rng, probs)] += 1;
    }
    counts
}
