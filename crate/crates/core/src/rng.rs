//! Seeded substreams. Each unit of work (a lineage, a sampled permutation)
//! gets its own generator derived from `(seed, index)`, so results do not
//! depend on how work is split across threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Name recorded in output metadata.
pub const GENERATOR_NAME: &str = "xoshiro256++ (per-index substreams, splitmix64-derived seeds)";

pub type StreamRng = Xoshiro256PlusPlus;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(
        splitmix64(seed) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)),
    )
}
