use super::NistError;

/// Packed bit string, most-significant bit of each byte first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSequence {
    packed: Vec<u8>,
    len: usize,
}

impl BitSequence {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NistError> {
        if bytes.is_empty() {
            return Err(NistError::EmptyInput);
        }
        Ok(BitSequence {
            packed: bytes.to_vec(),
            len: bytes.len() * 8,
        })
    }

    /// Parses a string of `0`/`1`; whitespace is ignored.
    pub fn from_ascii(s: &str) -> Result<Self, NistError> {
        let bits: Vec<u8> = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(NistError::InvalidDigit(other)),
            })
            .collect::<Result<_, _>>()?;
        Self::from_bits(&bits)
    }

    /// Packs a slice of 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Result<Self, NistError> {
        if bits.is_empty() {
            return Err(NistError::EmptyInput);
        }
        let mut packed = vec![0u8; bits.len().div_ceil(8)];
        for (i, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(NistError::InvalidDigit(char::from(b'0' + b.min(9))));
            }
            packed[i / 8] |= b << (7 - i % 8);
        }
        Ok(BitSequence {
            packed,
            len: bits.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index {i} out of range");
        (self.packed[i / 8] >> (7 - i % 8)) & 1
    }

    /// Packed bytes; trailing bits of the last byte are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.packed
    }

    /// One byte (0 or 1) per bit.
    pub fn unpack(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.packed.len() * 8);
        for &byte in &self.packed {
            for shift in (0..8).rev() {
                out.push((byte >> shift) & 1);
            }
        }
        out.truncate(self.len);
        out
    }

    /// First `n` bits.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len);
        let mut packed = self.packed[..n.div_ceil(8)].to_vec();
        if !n.is_multiple_of(8) {
            let last = packed.len() - 1;
            packed[last] &= 0xffu8 << (8 - n % 8);
        }
        BitSequence { packed, len: n }
    }
}

impl std::fmt::Display for BitSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.unpack() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// MSB-first unpacking of `bytes`; `8 * bytes.len()` bits.
pub fn bits_from_bytes(bytes: &[u8]) -> Result<BitSequence, NistError> {
    BitSequence::from_bytes(bytes)
}
