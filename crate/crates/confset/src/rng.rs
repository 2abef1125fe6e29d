//! Seeding policy and the normal generator used throughout the crate.
//!
//! Every random stream is a `ChaCha12` generator keyed by a seed derived from
//! `(master_seed, index, purpose_tag)` through SHA-256. Streams with distinct
//! tags or indices never overlap, and a given `(master, index, tag)` triple
//! reproduces the same draws on any platform or crate version.
//!
//! Gaussians come from the plain Box-Muller transform (pinned here rather
//! than taken from `rand_distr` so that seed reproducibility does not depend
//! on a third-party sampling algorithm): with `u1 in (0, 1]`, `u2 in [0, 1)`,
//!
//! ```text
//! z0 = sqrt(-2 ln u1) * cos(2 pi u2)
//! z1 = sqrt(-2 ln u1) * sin(2 pi u2)
//! ```
//!
//! Slice fills consume pairs in order; the scalar helper draws one pair and
//! discards `z1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derive a stream seed from a master seed, a stream index, and a purpose tag.
pub fn derive_seed(master: u64, index: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// The crate-wide RNG, keyed by a derived seed.
pub fn stream(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// One standard-normal draw (Box-Muller, second value of the pair discarded).
pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    box_muller_pair(rng).0
}

/// Fill `out` with standard-normal draws, consuming Box-Muller pairs in order.
pub fn fill_standard_normal(rng: &mut ChaCha12Rng, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (z0, z1) = box_muller_pair(rng);
        pair[0] = z0;
        pair[1] = z1;
    }
    if let [last] = chunks.into_remainder() {
        *last = box_muller_pair(rng).0;
    }
}

fn box_muller_pair(rng: &mut ChaCha12Rng) -> (f64, f64) {
    // gen::<f64>() is uniform on [0, 1); flip to (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}
