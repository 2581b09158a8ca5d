//! 256-bit machine words and 20-byte addresses.

use num_bigint::{BigInt, BigUint};
use std::fmt;

/// A 256-bit EVM word, stored big-endian.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub [u8; 32]);

impl Word {
    pub const ZERO: Word = Word([0u8; 32]);

    pub fn one() -> Word {
        Word::from_u64(1)
    }

    pub fn from_u64(v: u64) -> Word {
        let mut b = [0u8; 32];
        b[24..].copy_from_slice(&v.to_be_bytes());
        Word(b)
    }

    pub fn from_bool(v: bool) -> Word {
        if v {
            Word::one()
        } else {
            Word::ZERO
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }

    /// Interprets the word as an unsigned integer.
    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    pub fn to_bigint(&self) -> BigInt {
        BigInt::from(self.to_biguint())
    }

    /// Truncates the integer to the low 256 bits.
    pub fn from_biguint(v: &BigUint) -> Word {
        let bytes = v.to_bytes_be();
        let mut b = [0u8; 32];
        if bytes.len() >= 32 {
            b.copy_from_slice(&bytes[bytes.len() - 32..]);
        } else {
            b[32 - bytes.len()..].copy_from_slice(&bytes);
        }
        Word(b)
    }

    /// Low 64 bits if the word fits, otherwise None. Used for memory
    /// offsets and similar host-side quantities.
    pub fn to_u64(&self) -> Option<u64> {
        if self.0[..24].iter().any(|b| *b != 0) {
            return None;
        }
        let mut v = [0u8; 8];
        v.copy_from_slice(&self.0[24..]);
        Some(u64::from_be_bytes(v))
    }

    pub fn from_address(a: Address) -> Word {
        let mut b = [0u8; 32];
        b[12..].copy_from_slice(&a.0);
        Word(b)
    }

    pub fn to_address(&self) -> Address {
        let mut a = [0u8; 20];
        a.copy_from_slice(&self.0[12..]);
        Address(a)
    }

    fn to_limbs(self) -> [u64; 4] {
        let mut l = [0u64; 4];
        for (i, limb) in l.iter_mut().enumerate() {
            let mut v = [0u8; 8];
            v.copy_from_slice(&self.0[32 - 8 * (i + 1)..32 - 8 * i]);
            *limb = u64::from_be_bytes(v);
        }
        l
    }

    fn from_limbs(l: [u64; 4]) -> Word {
        let mut b = [0u8; 32];
        for (i, limb) in l.iter().enumerate() {
            b[32 - 8 * (i + 1)..32 - 8 * i].copy_from_slice(&limb.to_be_bytes());
        }
        Word(b)
    }

    pub fn wrapping_add(self, rhs: Word) -> Word {
        let a = self.to_limbs();
        let b = rhs.to_limbs();
        let mut out = [0u64; 4];
        let mut carry = 0u64;
        for i in 0..4 {
            let (s1, c1) = a[i].overflowing_add(b[i]);
            let (s2, c2) = s1.overflowing_add(carry);
            out[i] = s2;
            carry = (c1 as u64) + (c2 as u64);
        }
        Word::from_limbs(out)
    }

    pub fn wrapping_sub(self, rhs: Word) -> Word {
        let a = self.to_limbs();
        let b = rhs.to_limbs();
        let mut out = [0u64; 4];
        let mut borrow = 0u64;
        for i in 0..4 {
            let (d1, b1) = a[i].overflowing_sub(b[i]);
            let (d2, b2) = d1.overflowing_sub(borrow);
            out[i] = d2;
            borrow = (b1 as u64) + (b2 as u64);
        }
        Word::from_limbs(out)
    }

    pub fn wrapping_mul(self, rhs: Word) -> Word {
        let a = self.to_limbs();
        let b = rhs.to_limbs();
        let mut out = [0u64; 4];
        for i in 0..4 {
            let mut carry = 0u128;
            for j in 0..4 - i {
                let cur = out[i + j] as u128 + (a[i] as u128) * (b[j] as u128) + carry;
                out[i + j] = cur as u64;
                carry = cur >> 64;
            }
        }
        Word::from_limbs(out)
    }

    /// Integer division; division by zero yields zero, matching EVM DIV.
    pub fn checked_div_evm(self, rhs: Word) -> Word {
        if rhs.is_zero() {
            return Word::ZERO;
        }
        Word::from_biguint(&(self.to_biguint() / rhs.to_biguint()))
    }

    pub fn bitand(self, rhs: Word) -> Word {
        let mut b = [0u8; 32];
        for i in 0..32 {
            b[i] = self.0[i] & rhs.0[i];
        }
        Word(b)
    }

    pub fn bitor(self, rhs: Word) -> Word {
        let mut b = [0u8; 32];
        for i in 0..32 {
            b[i] = self.0[i] | rhs.0[i];
        }
        Word(b)
    }

    pub fn bitnot(self) -> Word {
        let mut b = [0u8; 32];
        for i in 0..32 {
            b[i] = !self.0[i];
        }
        Word(b)
    }

    /// Minimal lowercase hex with `0x` prefix (no leading zeros, `0x0` for zero).
    pub fn to_hex(&self) -> String {
        let s: String = self.0.iter().map(|b| format!("{b:02x}")).collect();
        let trimmed = s.trim_start_matches('0');
        if trimmed.is_empty() {
            "0x0".to_string()
        } else {
            format!("0x{trimmed}")
        }
    }

    pub fn from_hex(s: &str) -> Result<Word, HexError> {
        let bytes = parse_hex(s)?;
        if bytes.len() > 32 {
            return Err(HexError::TooLong(bytes.len()));
        }
        let mut b = [0u8; 32];
        b[32 - bytes.len()..].copy_from_slice(&bytes);
        Ok(Word(b))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self.to_hex())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

/// A 20-byte account address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub fn to_hex(&self) -> String {
        let s: String = self.0.iter().map(|b| format!("{b:02x}")).collect();
        format!("0x{s}")
    }

    pub fn from_hex(s: &str) -> Result<Address, HexError> {
        let bytes = parse_hex(s)?;
        if bytes.len() > 20 {
            return Err(HexError::TooLong(bytes.len()));
        }
        let mut a = [0u8; 20];
        a[20 - bytes.len()..].copy_from_slice(&bytes);
        Ok(Address(a))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

/// A 32-byte hash (transaction hashes, pattern ids, vote ids).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hash32(pub [u8; 32]);

impl Hash32 {
    pub fn to_hex(&self) -> String {
        let s: String = self.0.iter().map(|b| format!("{b:02x}")).collect();
        format!("0x{s}")
    }

    pub fn from_hex(s: &str) -> Result<Hash32, HexError> {
        let bytes = parse_hex(s)?;
        if bytes.len() > 32 {
            return Err(HexError::TooLong(bytes.len()));
        }
        let mut h = [0u8; 32];
        h[32 - bytes.len()..].copy_from_slice(&bytes);
        Ok(Hash32(h))
    }
}

impl fmt::Debug for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash32({})", self.to_hex())
    }
}

impl fmt::Display for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("invalid hex digit {0:?}")]
    InvalidDigit(char),
    #[error("hex value too long ({0} bytes)")]
    TooLong(usize),
}

/// Parses optionally `0x`-prefixed hex; odd-length strings get an implicit
/// leading zero nibble.
pub fn parse_hex(s: &str) -> Result<Vec<u8>, HexError> {
    let s = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    let digits: Vec<u8> = s
        .chars()
        .map(|c| c.to_digit(16).map(|d| d as u8).ok_or(HexError::InvalidDigit(c)))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(digits.len() / 2 + 1);
    let mut iter = digits.iter();
    if digits.len() % 2 == 1 {
        out.push(*iter.next().unwrap());
    }
    while let (Some(hi), Some(lo)) = (iter.next(), iter.next()) {
        out.push(hi * 16 + lo);
    }
    Ok(out)
}

pub fn bytes_to_hex(bytes: &[u8]) -> String {
    let s: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    format!("0x{s}")
}

/// Keccak-256 over the input bytes.
pub fn keccak256(data: &[u8]) -> Hash32 {
    use sha3::{Digest, Keccak256};
    let mut h = Keccak256::new();
    h.update(data);
    Hash32(h.finalize().into())
}
