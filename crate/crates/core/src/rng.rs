//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags that separate streams derived from one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Data,
    Noise,
    Scale,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x494e_4954,
            Stream::Shuffle => 0x5348_5546,
            Stream::Data => 0x4441_5441,
            Stream::Noise => 0x4e4f_4953,
            Stream::Scale => 0x5343_414c,
        }
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for substream `index` of `stream` under the experiment `seed`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    mix(mix(mix(seed) ^ stream.tag()) ^ index)
}

/// A platform-stable generator for substream `index` of `stream`.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let a: u64 = stream_rng(7, Stream::Init, 0).gen();
        let b: u64 = stream_rng(7, Stream::Init, 0).gen();
        let c: u64 = stream_rng(7, Stream::Shuffle, 0).gen();
        let d: u64 = stream_rng(7, Stream::Init, 1).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
