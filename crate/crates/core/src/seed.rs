use sha2::{Digest, Sha256};

/// Stable 64-bit seed derived from a base seed and a tag, independent of
/// platform hashing and iteration order.
pub fn derive(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}
