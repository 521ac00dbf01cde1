//! Seed derivation.
//!
//! Every random stream descends from one master seed. A child seed is the
//! first eight bytes (little endian) of `SHA-256("bcc/<tag>/<master>/<index>")`.
//! Inside a chain each update step draws from its own ChaCha8 stream, keyed by
//! [`Stream`], so adding or removing a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let digest = Sha256::digest(format!("bcc/{tag}/{master}/{index}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 0,
    Local = 1,
    Alpha = 2,
    Global = 3,
    Proportions = 4,
    FixedEffects = 5,
    RandomCovariance = 6,
    RandomEffects = 7,
    Dispersion = 8,
    Predictive = 9,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One generator per update step for a single chain.
#[derive(Debug, Clone)]
pub struct ChainRngs {
    pub local: ChaCha8Rng,
    pub alpha: ChaCha8Rng,
    pub global: ChaCha8Rng,
    pub proportions: ChaCha8Rng,
    pub fixed: ChaCha8Rng,
    pub covariance: ChaCha8Rng,
    pub random: ChaCha8Rng,
    pub dispersion: ChaCha8Rng,
}

impl ChainRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            local: stream_rng(seed, Stream::Local),
            alpha: stream_rng(seed, Stream::Alpha),
            global: stream_rng(seed, Stream::Global),
            proportions: stream_rng(seed, Stream::Proportions),
            fixed: stream_rng(seed, Stream::FixedEffects),
            covariance: stream_rng(seed, Stream::RandomCovariance),
            random: stream_rng(seed, Stream::RandomEffects),
            dispersion: stream_rng(seed, Stream::Dispersion),
        }
    }
}
