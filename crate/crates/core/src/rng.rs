//! Project-wide pseudo-random generator.
//!
//! Every random draw in the crate goes through [`QclRng`], a PCG-XSH-RR
//! generator with 64 bits of state and 32-bit output (`rand_pcg::Pcg32`).
//! Seeds are plain `u64` values and are recorded in every run artifact.

use rand::SeedableRng;
use rand_pcg::Pcg32;

pub type QclRng = Pcg32;

pub fn seeded(seed: u64) -> QclRng {
    Pcg32::seed_from_u64(seed)
}
