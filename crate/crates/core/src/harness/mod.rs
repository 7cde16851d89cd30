//! Experiment drivers: the scripted marketplace scenarios, the batch and
//! oracle latency benchmarks and the NIST campaign over Fortuna output.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fortuna::{Fortuna, FortunaError};
use crate::labsim::LabError;
use crate::sealing::SealError;
use crate::sim::SimError;

pub mod bench;
pub mod campaign;
pub mod config;
pub mod scenario;
pub mod world;

pub use config::ScenarioConfig;
pub use world::World;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    Fortuna(#[from] FortunaError),
    #[error(transparent)]
    Seal(#[from] SealError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("check failed: {0}")]
    Check(String),
}

/// `SHA-256(seed_be || label)`; every random source in a run is keyed this
/// way so runs with the same seed are identical.
pub fn derive_seed(seed: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

pub fn seeded_fortuna(seed: u64, label: &str) -> Fortuna {
    Fortuna::from_seed(&derive_seed(seed, label)).expect("32-byte seed")
}

pub fn seeded_rng(seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(seed, label))
}
