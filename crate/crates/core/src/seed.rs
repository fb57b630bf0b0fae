//! Stable seed derivation from a base seed and string keys.

use sha2::{Digest, Sha256};

/// Hash `base` together with `parts` into a 64-bit seed. Stable across
/// platforms and releases, unlike `std::hash`.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
