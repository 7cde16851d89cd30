use num_bigint::BigUint;

/// The 70 password characters: lowercase, uppercase, digits, then `!?&@*%$#`.
pub const CHARSET: &[u8; 70] =
    b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789!?&@*%$#";
pub const SPECIALS: &[u8; 8] = b"!?&@*%$#";

pub const PASSWORD_LENGTH: usize = 16;
pub const CHALLENGE_LENGTH: usize = 32;

/// Bytes at or above this value are rejected so `byte % 70` stays unbiased.
pub(crate) const REJECTION_LIMIT: u8 = 210;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CharClass {
    Lowercase,
    Uppercase,
    Digit,
    Special,
}

pub fn char_class(c: char) -> Option<CharClass> {
    match c {
        'a'..='z' => Some(CharClass::Lowercase),
        'A'..='Z' => Some(CharClass::Uppercase),
        '0'..='9' => Some(CharClass::Digit),
        c if c.is_ascii() && SPECIALS.contains(&(c as u8)) => Some(CharClass::Special),
        _ => None,
    }
}

/// Maps one random byte to a charset character, or `None` when rejected.
pub(crate) fn map_byte(b: u8) -> Option<char> {
    (b < REJECTION_LIMIT).then(|| CHARSET[(b % 70) as usize] as char)
}

/// Length 16, charset-only, every class present, and no run of three
/// identical characters or three consecutive character codes (up or down).
pub fn validate_policy(candidate: &str) -> bool {
    let chars: Vec<char> = candidate.chars().collect();
    if chars.len() != PASSWORD_LENGTH {
        return false;
    }
    let mut seen = [false; 4];
    for &c in &chars {
        match char_class(c) {
            Some(class) => seen[class as usize] = true,
            None => return false,
        }
    }
    if !seen.iter().all(|&s| s) {
        return false;
    }
    !chars.windows(3).any(|w| {
        let (a, b, c) = (w[0] as i32, w[1] as i32, w[2] as i32);
        (a == b && b == c) || (b - a == 1 && c - b == 1) || (a - b == 1 && b - c == 1)
    })
}

/// `n^l` as an exact integer.
pub fn combinations(n: u32, l: u32) -> BigUint {
    BigUint::from(n).pow(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charset_partition() {
        assert_eq!(CHARSET.len(), 70);
        let mut counts = [0usize; 4];
        for &b in CHARSET.iter() {
            counts[char_class(b as char).unwrap() as usize] += 1;
        }
        assert_eq!(counts, [26, 26, 10, 8]);
        let mut sorted = CHARSET.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 70);
    }

    #[test]
    fn policy_examples() {
        assert!(!validate_policy("aaaaaaaaaaaaaaaa"));
        assert!(validate_policy("Ab3#Ab3#Ab3#Ab3#"));
        assert!(!validate_policy("Ab3#Ab3#Ab3#Ab3"));
        assert!(!validate_policy("Ab3#Ab3#Ab3#Ab3#x"));
        // missing special
        assert!(!validate_policy("Ab3xAb3xAb3xAb3x"));
        // character outside the set
        assert!(!validate_policy("Ab3#Ab3#Ab3#Ab3^"));
        // ascending and descending runs
        assert!(!validate_policy("abc#Ab3#Ab3#Ab3#"));
        assert!(!validate_policy("Ab3#Ab3#Ab3#A321"));
        // triple repeat
        assert!(!validate_policy("Ab3#Ab3#Ab3#A###"));
        // two-long repeats and runs are fine
        assert!(validate_policy("Aab#Ab3#Ab3#Ab3#"));
    }

    #[test]
    fn byte_mapping_rejects_top_of_range() {
        assert_eq!(map_byte(0), Some('a'));
        assert_eq!(map_byte(69), Some('#'));
        assert_eq!(map_byte(70), Some('a'));
        assert_eq!(map_byte(209), Some('#'));
        assert_eq!(map_byte(210), None);
        assert_eq!(map_byte(255), None);
        for c in 0..70u8 {
            let hits = (0..=255u8).filter(|&b| map_byte(b) == Some(CHARSET[c as usize] as char));
            assert_eq!(hits.count(), 3);
        }
    }

    fn repeated_multiply(n: u32, l: u32) -> BigUint {
        let mut acc = BigUint::from(1u32);
        for _ in 0..l {
            acc *= n;
        }
        acc
    }

    #[test]
    fn combinations_exact() {
        assert_eq!(combinations(70, 0), BigUint::from(1u32));
        let expected = BigUint::from(33_232_930_569_601u64) * BigUint::from(10u32).pow(16);
        assert_eq!(combinations(70, 16), expected);
        assert_eq!(repeated_multiply(70, 16), expected);
        assert_eq!(combinations(70, 32), &expected * &expected);
        assert_eq!(combinations(70, 32), repeated_multiply(70, 32));
    }
}
