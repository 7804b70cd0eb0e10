//! Seed derivation and the pinned random number generator.
//!
//! Every command takes exactly one master seed. All internal randomness is
//! fanned out from it by hashing the seed together with a role string, so
//! independent components (corpus synthesis, stream shuffling, cell
//! dynamics) never share or race a generator. The generator itself is
//! ChaCha12 (`rand_chacha::ChaCha12Rng`): a portable, version-stable stream
//! cipher RNG that produces identical sequences for identical seeds on all
//! platforms.

use rand::SeedableRng;
use sha2::{Digest, Sha256};

/// The pinned generator used on every stochastic path.
pub type PortableRng = rand_chacha::ChaCha12Rng;

/// Derive a sub-seed from a master seed and a role string.
///
/// The derivation is the first eight little-endian bytes of
/// `SHA-256(master_le_bytes || role)`.
pub fn derive_seed(master: u64, role: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(role.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Construct the pinned generator from a seed.
pub fn rng_from_seed(seed: u64) -> PortableRng {
    PortableRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_deterministic_and_role_separated() {
        assert_eq!(derive_seed(7, "synth"), derive_seed(7, "synth"));
        assert_ne!(derive_seed(7, "synth"), derive_seed(7, "dynamics"));
        assert_ne!(derive_seed(7, "synth"), derive_seed(8, "synth"));
    }

    #[test]
    fn rng_reproduces_sequences() {
        let a: Vec<u64> = (0..8).map({
            let mut r = rng_from_seed(42);
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = rng_from_seed(42);
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
    }
}
