use sha2::{Digest, Sha256};

use super::generator::Generator;
use super::FortunaError;

pub const POOL_COUNT: usize = 32;
/// Pool 0 must have absorbed this many event bytes before a reseed.
pub const MIN_POOL_SIZE: u64 = 64;
pub const RESEED_INTERVAL_MS: u64 = 100;
pub const MAX_EVENT_BYTES: usize = 32;

#[derive(Clone, Default)]
struct Pool {
    hash: Sha256,
    bytes: u64,
}

/// The 32 entropy pools and the reseed schedule.
#[derive(Clone)]
pub struct Accumulator {
    pools: [Pool; POOL_COUNT],
    reseed_count: u64,
    last_reseed_ms: Option<u64>,
}

impl std::fmt::Debug for Accumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Accumulator")
            .field("pool_bytes", &self.pool_bytes())
            .field("reseed_count", &self.reseed_count)
            .field("last_reseed_ms", &self.last_reseed_ms)
            .finish()
    }
}

impl Default for Accumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// Pools that feed reseed number `r`: pool `i` iff `2^i` divides `r`.
pub fn pools_for_reseed(r: u64) -> Vec<usize> {
    (0..POOL_COUNT)
        .take_while(|&i| i < 64 && r.is_multiple_of(1u64 << i))
        .collect()
}

impl Accumulator {
    pub fn new() -> Self {
        Accumulator {
            pools: Default::default(),
            reseed_count: 0,
            last_reseed_ms: None,
        }
    }

    pub fn reseed_count(&self) -> u64 {
        self.reseed_count
    }

    pub fn last_reseed_ms(&self) -> Option<u64> {
        self.last_reseed_ms
    }

    pub fn pool_bytes(&self) -> [u64; POOL_COUNT] {
        core::array::from_fn(|i| self.pools[i].bytes)
    }

    /// Absorbs `source || len || data` into pool `pool`.
    pub fn add_random_event(
        &mut self,
        source: u8,
        pool: usize,
        data: &[u8],
    ) -> Result<(), FortunaError> {
        if pool >= POOL_COUNT {
            return Err(FortunaError::PoolIndex(pool));
        }
        if data.is_empty() || data.len() > MAX_EVENT_BYTES {
            return Err(FortunaError::EventSize(data.len()));
        }
        let p = &mut self.pools[pool];
        p.hash.update([source, data.len() as u8]);
        p.hash.update(data);
        p.bytes += data.len() as u64;
        Ok(())
    }

    /// Reseeds `generator` when pool 0 is full enough and the last reseed is
    /// at least 100 ms old.
    pub fn maybe_reseed(&mut self, now_ms: u64, generator: &mut Generator) -> bool {
        if self.pools[0].bytes < MIN_POOL_SIZE {
            return false;
        }
        if let Some(last) = self.last_reseed_ms {
            if now_ms.saturating_sub(last) < RESEED_INTERVAL_MS {
                return false;
            }
        }
        self.reseed_count += 1;
        let mut seed = Vec::with_capacity(32 * POOL_COUNT);
        for i in pools_for_reseed(self.reseed_count) {
            let pool = std::mem::take(&mut self.pools[i]);
            seed.extend_from_slice(&Sha256::digest(pool.hash.finalize()));
        }
        generator
            .reseed(&seed)
            .expect("reseed input holds at least one pool digest");
        self.last_reseed_ms = Some(now_ms);
        true
    }
}
