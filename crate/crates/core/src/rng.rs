//! Seed fan-out.
//!
//! Every random quantity in the crate is drawn from its own ChaCha8 stream.
//! A stream is keyed by `(purpose, master seed, index)`; the 32-byte ChaCha
//! key is `SHA-256("sarrm/" ++ purpose ++ "/" ++ master ++ "/" ++ index)` with
//! the integers in little-endian. Streams with different purposes never
//! overlap, so changing e.g. the batch size leaves topology draws untouched,
//! and no stream depends on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Purposes used by the crate. Free-form strings are also accepted by
/// [`stream`], these just keep call sites consistent.
pub mod purpose {
    pub const TOPOLOGY: &str = "topology";
    pub const FADING: &str = "fading";
    pub const INIT: &str = "init";
    pub const MU: &str = "mu";
    pub const SHUFFLE: &str = "shuffle";
    pub const SPLIT: &str = "split";
}

/// 32-byte key for the stream `(purpose, master, index)`.
pub fn derive_key(purpose: &str, master: u64, index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"sarrm/");
    hasher.update(purpose.as_bytes());
    hasher.update(b"/");
    hasher.update(master.to_le_bytes());
    hasher.update(b"/");
    hasher.update(index.to_le_bytes());
    hasher.finalize().into()
}

/// Child seed for the stream `(purpose, master, index)`, for APIs that take a `u64`.
pub fn derive_seed(purpose: &str, master: u64, index: u64) -> u64 {
    let key = derive_key(purpose, master, index);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

pub fn stream(purpose: &str, master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(purpose, master, index))
}
