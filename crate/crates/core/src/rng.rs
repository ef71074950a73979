//! The single seeded generator used for every random choice in the crate.
//!
//! It is PCG-XSH-RR 64/32 (`rand_pcg::Pcg32`): a 64-bit linear congruential
//! state advanced as `s' = s * 6364136223846793005 + inc`, with a xorshift
//! and random rotation applied to produce each 32-bit output. Seeding goes
//! through `SeedableRng::seed_from_u64`, so a `u64` seed fully determines
//! the stream on every platform.

use rand::SeedableRng;
pub use rand_pcg::Pcg32 as Prng;

pub fn seeded(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}
