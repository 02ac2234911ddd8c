//! Seeded random streams. Each purpose gets its own ChaCha stream so that
//! changing how much randomness one stage consumes never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod purpose {
    pub const INIT: u64 = 1;
    pub const COLORS: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const GLYPH: u64 = 4;
    pub const TABULAR: u64 = 5;
    pub const BATCHES: u64 = 6;
    pub const AUGMENT: u64 = 7;
    pub const STAGE2_BATCHES: u64 = 8;
}

pub fn stream(seed: u64, purpose: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// Stream for item `index` of a purpose, e.g. one glyph or one epoch.
pub fn substream(seed: u64, purpose: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(purpose);
    rng
}
