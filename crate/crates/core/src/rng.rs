//! Seeded random streams.
//!
//! Every random draw in the crate comes from [`stream`]: a ChaCha8 generator
//! seeded with `seed_from_u64(seed)` and switched to the requested stream
//! number. Distinct consumers use distinct stream numbers, so adding draws in
//! one place never shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier reported alongside results.
pub const ALGORITHM: &str = "chacha8/seed_from_u64/set_stream (rand_chacha 0.9)";

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream numbers of the library's consumers.
pub mod streams {
    pub const TARGET_JETS: u64 = 1;
    pub const BAD_SET: u64 = 2;
    pub const SHIFTS: u64 = 3;
}
