//! Maurer's universal statistical test and the linear complexity test.

use super::special::{chi_square, erfc, igamc};
use super::{NistError, TestId};

/// Expected value and variance of the universal statistic for L = 1..=16.
const UNIVERSAL_TABLE: [(f64, f64); 16] = [
    (0.7326495, 0.690),
    (1.5374383, 1.338),
    (2.4016068, 1.901),
    (3.3112247, 2.358),
    (4.2534266, 2.705),
    (5.2177052, 2.954),
    (6.1962507, 3.125),
    (7.1836656, 3.238),
    (8.1764248, 3.311),
    (9.1723243, 3.356),
    (10.170032, 3.384),
    (11.168765, 3.401),
    (12.168070, 3.410),
    (13.167693, 3.416),
    (14.167488, 3.419),
    (15.167379, 3.421),
];

pub(crate) fn universal(bits: &[u8], l: usize, q: usize) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if !(1..=16).contains(&l) || n / l <= q {
        return Err(NistError::too_short(TestId::Universal, (q + 1) * l.max(1), n));
    }
    let k = n / l - q;
    let mut last_seen = vec![0usize; 1 << l];
    let block_value = |i: usize| -> usize {
        bits[i * l..(i + 1) * l]
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | b as usize)
    };
    for i in 1..=q {
        last_seen[block_value(i - 1)] = i;
    }
    let mut sum = 0.0;
    for i in (q + 1)..=(q + k) {
        let v = block_value(i - 1);
        sum += ((i - last_seen[v]) as f64).log2();
        last_seen[v] = i;
    }
    let phi = sum / k as f64;
    let (expected, variance) = UNIVERSAL_TABLE[l - 1];
    let lf = l as f64;
    let c = 0.7 - 0.8 / lf + (4.0 + 32.0 / lf) * (k as f64).powf(-3.0 / lf) / 15.0;
    let sigma = c * (variance / k as f64).sqrt();
    let arg = (phi - expected).abs() / (std::f64::consts::SQRT_2 * sigma);
    Ok(vec![erfc(arg)])
}

/// Fixed-width bit set used by the packed Berlekamp-Massey routine.
#[derive(Clone)]
struct Bits {
    words: Vec<u64>,
}

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits {
            words: vec![0; len.div_ceil(64)],
        }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    /// `self <<= 1`, inserting `bit` at index 0 and dropping overflow.
    fn push_front(&mut self, bit: u8) {
        let mut carry = bit as u64;
        for w in self.words.iter_mut() {
            let next = *w >> 63;
            *w = (*w << 1) | carry;
            carry = next;
        }
    }

    /// Parity of `self & other` over indices `0..=last`.
    fn masked_parity(&self, other: &Bits, last: usize) -> u8 {
        let full = (last + 1) / 64;
        let mut acc = 0u64;
        for i in 0..full {
            acc ^= self.words[i] & other.words[i];
        }
        let rem = (last + 1) % 64;
        if rem != 0 {
            acc ^= self.words[full] & other.words[full] & ((1u64 << rem) - 1);
        }
        (acc.count_ones() & 1) as u8
    }

    /// `self ^= other << shift`, truncated to `self`'s width.
    fn xor_shifted(&mut self, other: &Bits, shift: usize) {
        let word_shift = shift / 64;
        let bit_shift = shift % 64;
        let len = self.words.len();
        for i in (word_shift..len).rev() {
            let src = i - word_shift;
            let mut v = other.words[src] << bit_shift;
            if bit_shift != 0 && src > 0 {
                v |= other.words[src - 1] >> (64 - bit_shift);
            }
            self.words[i] ^= v;
        }
    }
}

/// Linear complexity of `s` via Berlekamp-Massey over GF(2).
pub fn berlekamp_massey(s: &[u8]) -> usize {
    let m = s.len();
    let width = m + 1;
    let mut c = Bits::zeros(width);
    let mut b = Bits::zeros(width);
    c.set(0);
    b.set(0);
    let mut window = Bits::zeros(width);
    let mut l = 0usize;
    let mut last_change: isize = -1;
    for (n, &bit) in s.iter().enumerate() {
        window.push_front(bit);
        let d = c.masked_parity(&window, l);
        if d == 1 {
            let previous = c.clone();
            let shift = (n as isize - last_change) as usize;
            c.xor_shifted(&b, shift);
            if l <= n / 2 {
                l = n + 1 - l;
                last_change = n as isize;
                b = previous;
            }
        }
    }
    l
}

const LINEAR_COMPLEXITY_PI: [f64; 7] = [0.010417, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833];

pub(crate) fn linear_complexity(bits: &[u8], m: usize) -> Result<Vec<f64>, NistError> {
    let n = bits.len();
    if m < 2 || n < m {
        return Err(NistError::too_short(TestId::LinearComplexity, m.max(2), n));
    }
    let blocks = n / m;
    let mf = m as f64;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mu = mf / 2.0 + (9.0 - sign) / 36.0 - (mf / 3.0 + 2.0 / 9.0) / 2f64.powf(mf);
    let mut nu = [0u64; 7];
    for block in bits.chunks_exact(m).take(blocks) {
        let l = berlekamp_massey(block) as f64;
        let t = sign * (l - mu) + 2.0 / 9.0;
        let class = if t <= -2.5 {
            0
        } else if t <= -1.5 {
            1
        } else if t <= -0.5 {
            2
        } else if t <= 0.5 {
            3
        } else if t <= 1.5 {
            4
        } else if t <= 2.5 {
            5
        } else {
            6
        };
        nu[class] += 1;
    }
    let chi2 = chi_square(&nu, &LINEAR_COMPLEXITY_PI, blocks as f64);
    Ok(vec![igamc(3.0, chi2 / 2.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook byte-per-bit Berlekamp-Massey.
    fn berlekamp_massey_naive(s: &[u8]) -> usize {
        let n = s.len();
        let mut c = vec![0u8; n + 1];
        let mut b = vec![0u8; n + 1];
        c[0] = 1;
        b[0] = 1;
        let (mut l, mut m) = (0usize, -1isize);
        for i in 0..n {
            let mut d = s[i];
            for j in 1..=l {
                d ^= c[j] & s[i - j];
            }
            if d == 1 {
                let t = c.clone();
                let shift = (i as isize - m) as usize;
                for j in 0..=n {
                    if j + shift <= n {
                        c[j + shift] ^= b[j];
                    }
                }
                if l <= i / 2 {
                    l = i + 1 - l;
                    m = i as isize;
                    b = t;
                }
            }
        }
        l
    }

    #[test]
    fn berlekamp_massey_known_sequences() {
        // 1101011110001: linear complexity 4 (reference-suite worked example)
        let s: Vec<u8> = "1101011110001".bytes().map(|c| c - b'0').collect();
        assert_eq!(berlekamp_massey(&s), 4);
        assert_eq!(berlekamp_massey(&[0; 20]), 0);
        let mut one = vec![0u8; 20];
        one[19] = 1;
        assert_eq!(berlekamp_massey(&one), 20);
    }

    proptest! {
        #[test]
        fn packed_matches_naive(s in proptest::collection::vec(0u8..2, 1..300)) {
            prop_assert_eq!(berlekamp_massey(&s), berlekamp_massey_naive(&s));
        }
    }
}
