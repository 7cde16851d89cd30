//! Fortuna CSPRNG: counter-mode AES-256 generator, 32-pool entropy
//! accumulator, and the password/challenge character generation built on it.
//!
//! There is no seed file. A process seeds either from the host entropy
//! source ([`Fortuna::from_host_entropy`]) or from an explicit seed
//! ([`Fortuna::from_seed`]) when reproducible streams are needed.

mod accumulator;
mod generator;
mod password;

use std::time::Instant;

use rand::RngCore;
use thiserror::Error;

pub use accumulator::{
    pools_for_reseed, Accumulator, MAX_EVENT_BYTES, MIN_POOL_SIZE, POOL_COUNT, RESEED_INTERVAL_MS,
};
pub use generator::{Generator, MAX_REQUEST_BYTES};
pub use password::{
    char_class, combinations, validate_policy, CharClass, CHALLENGE_LENGTH, CHARSET,
    PASSWORD_LENGTH, SPECIALS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FortunaError {
    #[error("generator has not been seeded")]
    NotSeeded,
    #[error("reseed input is empty")]
    EmptySeed,
    #[error("request of {0} bytes is outside 1..=2^20")]
    RequestSize(usize),
    #[error("pool index {0} is out of range")]
    PoolIndex(usize),
    #[error("event data must be 1..=32 bytes, got {0}")]
    EventSize(usize),
}

/// Source id used for host entropy fed at startup.
const HOST_SOURCE: u8 = 0;

/// Generator plus accumulator. Single writer: share it behind a lock or give
/// each user its own independently seeded instance.
#[derive(Debug, Clone)]
pub struct Fortuna {
    generator: Generator,
    accumulator: Accumulator,
    epoch: Instant,
}

impl Default for Fortuna {
    fn default() -> Self {
        Self::new()
    }
}

impl Fortuna {
    /// Unseeded instance; every output request fails until a reseed happens.
    pub fn new() -> Self {
        Fortuna {
            generator: Generator::new(),
            accumulator: Accumulator::new(),
            epoch: Instant::now(),
        }
    }

    /// Deterministic instance: the generator is reseeded once with `seed`.
    pub fn from_seed(seed: &[u8]) -> Result<Self, FortunaError> {
        let mut f = Self::new();
        f.generator.reseed(seed)?;
        Ok(f)
    }

    /// Fills every pool with host entropy and performs the first reseed.
    pub fn from_host_entropy() -> Self {
        let mut f = Self::new();
        let mut buf = [0u8; MAX_EVENT_BYTES];
        let per_pool = (MIN_POOL_SIZE as usize).div_ceil(MAX_EVENT_BYTES);
        for i in 0..POOL_COUNT * per_pool {
            rand::rngs::OsRng.fill_bytes(&mut buf);
            f.accumulator
                .add_random_event(HOST_SOURCE, i % POOL_COUNT, &buf)
                .expect("event fits the pool limits");
        }
        let reseeded = f.accumulator.maybe_reseed(0, &mut f.generator);
        debug_assert!(reseeded);
        f
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.accumulator
    }

    pub fn is_seeded(&self) -> bool {
        self.generator.is_seeded()
    }

    pub fn reseed(&mut self, seed: &[u8]) -> Result<(), FortunaError> {
        self.generator.reseed(seed)
    }

    pub fn add_random_event(
        &mut self,
        source: u8,
        pool: usize,
        data: &[u8],
    ) -> Result<(), FortunaError> {
        self.accumulator.add_random_event(source, pool, data)
    }

    pub fn maybe_reseed(&mut self, now_ms: u64) -> bool {
        self.accumulator.maybe_reseed(now_ms, &mut self.generator)
    }

    /// Output request at an explicit time (virtual or wall milliseconds).
    pub fn random_data_at(&mut self, n: usize, now_ms: u64) -> Result<Vec<u8>, FortunaError> {
        self.maybe_reseed(now_ms);
        self.generator.pseudo_random_data(n)
    }

    /// Output request timed against the instance's own monotonic clock.
    pub fn random_data(&mut self, n: usize) -> Result<Vec<u8>, FortunaError> {
        let now = self.epoch.elapsed().as_millis() as u64;
        self.random_data_at(n, now)
    }

    /// Fills `out`, splitting into requests of at most 2^20 bytes.
    pub fn fill(&mut self, out: &mut [u8]) -> Result<(), FortunaError> {
        for chunk in out.chunks_mut(MAX_REQUEST_BYTES) {
            chunk.copy_from_slice(&self.random_data(chunk.len())?);
        }
        Ok(())
    }

    pub fn random_array<const N: usize>(&mut self) -> Result<[u8; N], FortunaError> {
        let mut out = [0u8; N];
        self.fill(&mut out)?;
        Ok(out)
    }

    /// `len` characters drawn uniformly from the 70-character set.
    pub fn random_chars(&mut self, len: usize) -> Result<String, FortunaError> {
        let mut out = String::with_capacity(len);
        while out.len() < len {
            let need = len - out.len();
            // 210/256 of bytes survive rejection; over-request a little.
            let bytes = self.random_data(need + need / 4 + 4)?;
            for c in bytes.into_iter().filter_map(password::map_byte) {
                out.push(c);
                if out.len() == len {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// A 16-character password that passes [`validate_policy`]; candidates
    /// are regenerated until one does.
    pub fn random_password(&mut self) -> Result<String, FortunaError> {
        loop {
            let candidate = self.random_chars(PASSWORD_LENGTH)?;
            if validate_policy(&candidate) {
                return Ok(candidate);
            }
        }
    }

    /// A 32-character one-time challenge message (no class requirement).
    pub fn random_challenge(&mut self) -> Result<String, FortunaError> {
        self.random_chars(CHALLENGE_LENGTH)
    }
}
