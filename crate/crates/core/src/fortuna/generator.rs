use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes256;
use sha2::{Digest, Sha256};

use super::FortunaError;

/// Largest single request served by [`Generator::pseudo_random_data`].
pub const MAX_REQUEST_BYTES: usize = 1 << 20;

/// Number of cipher blocks drawn after every request to replace the key.
const REKEY_BLOCKS: usize = 2;

/// Block-cipher counter-mode generator.
///
/// Output block `i` is AES-256 under the current key applied to the 128-bit
/// counter encoded little-endian. After every request two extra blocks become
/// the next key, so earlier output cannot be reconstructed from later state.
#[derive(Clone)]
pub struct Generator {
    key: [u8; 32],
    counter: u128,
    cipher: Option<Aes256>,
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Generator")
            .field("counter", &self.counter)
            .finish_non_exhaustive()
    }
}

impl Default for Generator {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn sha_d256(parts: &[&[u8]]) -> [u8; 32] {
    let mut inner = Sha256::new();
    for p in parts {
        inner.update(p);
    }
    Sha256::digest(inner.finalize()).into()
}

impl Generator {
    /// Zero key, zero counter. The generator refuses to produce output until
    /// the first reseed.
    pub fn new() -> Self {
        Generator {
            key: [0u8; 32],
            counter: 0,
            cipher: None,
        }
    }

    pub fn key(&self) -> &[u8; 32] {
        &self.key
    }

    pub fn counter(&self) -> u128 {
        self.counter
    }

    pub fn is_seeded(&self) -> bool {
        self.counter != 0
    }

    /// `key <- SHA-256(SHA-256(key || seed))`, then bump the counter.
    pub fn reseed(&mut self, seed: &[u8]) -> Result<(), FortunaError> {
        if seed.is_empty() {
            return Err(FortunaError::EmptySeed);
        }
        let key = sha_d256(&[&self.key, seed]);
        self.set_key(key);
        self.counter = self.counter.wrapping_add(1);
        Ok(())
    }

    fn set_key(&mut self, key: [u8; 32]) {
        self.key = key;
        self.cipher = Some(Aes256::new(&self.key.into()));
    }

    /// Appends `k` counter-mode blocks to `out`.
    pub(crate) fn generate_blocks_into(
        &mut self,
        k: usize,
        out: &mut Vec<u8>,
    ) -> Result<(), FortunaError> {
        if self.counter == 0 {
            return Err(FortunaError::NotSeeded);
        }
        let cipher = self.cipher.as_ref().expect("seeded generator has a cipher");
        out.reserve(k * 16);
        for _ in 0..k {
            let mut block = self.counter.to_le_bytes().into();
            cipher.encrypt_block(&mut block);
            out.extend_from_slice(&block);
            self.counter = self.counter.wrapping_add(1);
        }
        Ok(())
    }

    pub fn generate_blocks(&mut self, k: usize) -> Result<Vec<u8>, FortunaError> {
        let mut out = Vec::new();
        self.generate_blocks_into(k, &mut out)?;
        Ok(out)
    }

    /// Returns `n` bytes (`0 < n <= 2^20`) and rekeys afterwards.
    pub fn pseudo_random_data(&mut self, n: usize) -> Result<Vec<u8>, FortunaError> {
        if n == 0 || n > MAX_REQUEST_BYTES {
            return Err(FortunaError::RequestSize(n));
        }
        if self.counter == 0 {
            return Err(FortunaError::NotSeeded);
        }
        let mut out = Vec::with_capacity(n.div_ceil(16) * 16);
        self.generate_blocks_into(n.div_ceil(16), &mut out)?;
        out.truncate(n);

        let mut next = Vec::with_capacity(REKEY_BLOCKS * 16);
        self.generate_blocks_into(REKEY_BLOCKS, &mut next)?;
        let mut key = [0u8; 32];
        key.copy_from_slice(&next);
        self.set_key(key);
        Ok(out)
    }
}
