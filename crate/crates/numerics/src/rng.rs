//! Reproducible random streams.
//!
//! Every stochastic operation takes an explicit [`Rng`]. Independent streams
//! are derived from a root seed and a path of integers (for example
//! `[epoch, document]`), so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the stream identified by `path` under `seed`.
pub fn rng_stream(seed: u64, path: &[u64]) -> Rng {
    let key = path.iter().fold(splitmix64(seed), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D)))
    });
    ChaCha8Rng::seed_from_u64(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = rng_stream(7, &[1, 2]).random();
        let b: u64 = rng_stream(7, &[1, 2]).random();
        let c: u64 = rng_stream(7, &[2, 1]).random();
        let d: u64 = rng_stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
