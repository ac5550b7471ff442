//! Reproducible random streams.
//!
//! A stream is keyed by `(master seed, domain)` and selected by an index, so
//! replicate `i` always sees the same numbers no matter which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; keep values stable, they are part of the output contract.
pub mod domain {
    pub const EVALUATION: u64 = 1;
    pub const ORACLE: u64 = 2;
    pub const SIMPLEX: u64 = 3;
    pub const TIE_BREAK: u64 = 4;
    pub const SAMPLE: u64 = 5;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Domain tag for a given experiment grid cell.
pub fn cell_domain(base: u64, cell: u64) -> u64 {
    (base << 32) | (cell & 0xFFFF_FFFF)
}

/// Counter-based generator for replicate `index` of `(seed, domain)`.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ splitmix64(&mut domain.clone());
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
