// SPDX-License-Identifier: Apache-2.0

//! Four-state bit vectors.
//!
//! Each bit is one of `0`, `1`, `X` (unknown) or `Z` (high impedance). A
//! vector is stored as two bit planes: `val` and `unk`. The encoding per bit
//! is `0 = (0,0)`, `1 = (1,0)`, `X = (0,1)`, `Z = (1,1)`. Bits above `width`
//! are always zero in both planes, so derived equality is structural.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

/// Largest vector width the engine accepts.
pub const MAX_WIDTH: usize = 65536;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bit4 {
    B0,
    B1,
    BX,
    BZ,
}

impl Bit4 {
    pub fn is_known(self) -> bool {
        matches!(self, Bit4::B0 | Bit4::B1)
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Bit4::B1
        } else {
            Bit4::B0
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Bit4::B0 => '0',
            Bit4::B1 => '1',
            Bit4::BX => 'x',
            Bit4::BZ => 'z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(Bit4::B0),
            '1' => Some(Bit4::B1),
            'x' | 'X' => Some(Bit4::BX),
            'z' | 'Z' => Some(Bit4::BZ),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec4 {
    width: usize,
    val: Vec<u64>,
    unk: Vec<u64>,
}

fn words(width: usize) -> usize {
    width.div_ceil(64)
}

impl BitVec4 {
    fn filled(width: usize, val: bool, unk: bool) -> Self {
        assert!(
            (1..=MAX_WIDTH).contains(&width),
            "bit vector width {width} outside 1..={MAX_WIDTH}"
        );
        let n = words(width);
        let mut v = BitVec4 {
            width,
            val: vec![if val { u64::MAX } else { 0 }; n],
            unk: vec![if unk { u64::MAX } else { 0 }; n],
        };
        v.trim();
        v
    }

    fn trim(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            let mask = (1u64 << rem) - 1;
            let last = self.val.len() - 1;
            self.val[last] &= mask;
            self.unk[last] &= mask;
        }
    }

    pub fn zeros(width: usize) -> Self {
        Self::filled(width, false, false)
    }

    pub fn ones(width: usize) -> Self {
        Self::filled(width, true, false)
    }

    pub fn all_x(width: usize) -> Self {
        Self::filled(width, false, true)
    }

    pub fn all_z(width: usize) -> Self {
        Self::filled(width, true, true)
    }

    pub fn from_bool(b: bool) -> Self {
        Self::from_u64(1, b as u64)
    }

    /// Low `width` bits of `value`.
    pub fn from_u64(width: usize, value: u64) -> Self {
        let mut v = Self::zeros(width);
        v.val[0] = value;
        v.trim();
        v
    }

    /// `value mod 2^width`.
    pub fn from_biguint(width: usize, value: &BigUint) -> Self {
        let mut v = Self::zeros(width);
        for (i, d) in value.iter_u64_digits().take(v.val.len()).enumerate() {
            v.val[i] = d;
        }
        v.trim();
        v
    }

    /// Two's-complement encoding of `value` reduced mod `2^width`.
    pub fn from_bigint(width: usize, value: &BigInt) -> Self {
        let modulus = BigInt::one() << width;
        let mut r = value % &modulus;
        if r.sign() == Sign::Minus {
            r += &modulus;
        }
        Self::from_biguint(width, r.magnitude())
    }

    /// Builds a vector from bits listed least-significant first.
    pub fn from_bits(bits: &[Bit4]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, b) in bits.iter().enumerate() {
            v.set(i, *b);
        }
        v
    }

    /// Parses an MSB-first string over `01xXzZ`, ignoring `_`.
    pub fn parse_msb(s: &str) -> Option<Self> {
        let bits: Option<Vec<Bit4>> = s.chars().filter(|c| *c != '_').map(Bit4::from_char).collect();
        let mut bits = bits?;
        if bits.is_empty() {
            return None;
        }
        bits.reverse();
        Some(Self::from_bits(&bits))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bit(&self, i: usize) -> Bit4 {
        assert!(i < self.width, "bit index {i} out of range {}", self.width);
        let (w, o) = (i / 64, i % 64);
        let v = (self.val[w] >> o) & 1 == 1;
        let u = (self.unk[w] >> o) & 1 == 1;
        match (v, u) {
            (false, false) => Bit4::B0,
            (true, false) => Bit4::B1,
            (false, true) => Bit4::BX,
            (true, true) => Bit4::BZ,
        }
    }

    pub fn set(&mut self, i: usize, b: Bit4) {
        assert!(i < self.width, "bit index {i} out of range {}", self.width);
        let (w, o) = (i / 64, i % 64);
        let (v, u) = match b {
            Bit4::B0 => (false, false),
            Bit4::B1 => (true, false),
            Bit4::BX => (false, true),
            Bit4::BZ => (true, true),
        };
        self.val[w] = (self.val[w] & !(1 << o)) | ((v as u64) << o);
        self.unk[w] = (self.unk[w] & !(1 << o)) | ((u as u64) << o);
    }

    /// Bits, least-significant first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = Bit4> + '_ {
        (0..self.width).map(move |i| self.bit(i))
    }

    pub fn has_unknown(&self) -> bool {
        self.unk.iter().any(|w| *w != 0)
    }

    pub fn is_zero(&self) -> bool {
        !self.has_unknown() && self.val.iter().all(|w| *w == 0)
    }

    /// Unsigned value, or `None` if any bit is X or Z.
    pub fn to_biguint(&self) -> Option<BigUint> {
        if self.has_unknown() {
            return None;
        }
        let digits: Vec<u32> = self.val.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect();
        Some(BigUint::new(digits))
    }

    /// Two's-complement value, or `None` if any bit is X or Z.
    pub fn to_bigint(&self) -> Option<BigInt> {
        let u = self.to_biguint()?;
        if self.bit(self.width - 1) == Bit4::B1 {
            Some(BigInt::from(u) - (BigInt::one() << self.width))
        } else {
            Some(BigInt::from(u))
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_biguint()?.to_u64()
    }

    /// Value as a `usize` index; `None` when unknown or too large.
    pub fn to_index(&self) -> Option<usize> {
        self.to_biguint()?.to_usize()
    }

    /// True when the vector is exactly the defined value 1 (any width).
    pub fn is_one(&self) -> bool {
        self.to_biguint().is_some_and(|v| v.is_one())
    }

    /// Bits `[low, low + width)`.
    pub fn slice(&self, low: usize, width: usize) -> Self {
        assert!(low + width <= self.width, "slice out of range");
        let bits: Vec<Bit4> = (low..low + width).map(|i| self.bit(i)).collect();
        Self::from_bits(&bits)
    }

    /// Concatenation with the first part in the most-significant position.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitVec4>) -> Self {
        let parts: Vec<&BitVec4> = parts.into_iter().collect();
        let mut bits = Vec::new();
        for p in parts.iter().rev() {
            bits.extend(p.iter());
        }
        Self::from_bits(&bits)
    }

    /// MSB-first rendering using `0 1 x z`.
    pub fn to_msb_string(&self) -> String {
        self.iter().rev().map(Bit4::to_char).collect()
    }

    /// Same bits, with every Z read as X.
    pub fn z_as_x(&self) -> Self {
        let mut v = self.clone();
        for (val, unk) in v.val.iter_mut().zip(v.unk.iter()) {
            *val &= !*unk;
        }
        v
    }
}

impl fmt::Debug for BitVec4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, self.to_msb_string())
    }
}

impl fmt::Display for BitVec4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_biguint() {
            Some(v) if self.width <= 64 || v.is_zero() => write!(f, "{v}"),
            _ => write!(f, "{}'b{}", self.width, self.to_msb_string()),
        }
    }
}

/// Result of converting a vector to a logical integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TwoState {
    Int(BigUint),
    Unknown,
}

/// Converts a vector to its unsigned integer value; any X or Z bit yields
/// [`TwoState::Unknown`].
pub fn bit2int(v: &BitVec4) -> TwoState {
    match v.to_biguint() {
        Some(n) => TwoState::Int(n),
        None => TwoState::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_and_read_back() {
        let v = BitVec4::parse_msb("1x0z").unwrap();
        assert_eq!(v.width(), 4);
        assert_eq!(v.bit(0), Bit4::BZ);
        assert_eq!(v.bit(1), Bit4::B0);
        assert_eq!(v.bit(2), Bit4::BX);
        assert_eq!(v.bit(3), Bit4::B1);
        assert_eq!(v.to_msb_string(), "1x0z");
        assert!(v.has_unknown());
    }

    #[test]
    fn bit2int_examples() {
        assert_eq!(
            bit2int(&BitVec4::parse_msb("1010").unwrap()),
            TwoState::Int(BigUint::from(10u32))
        );
        assert_eq!(bit2int(&BitVec4::zeros(1)), TwoState::Int(BigUint::from(0u32)));
        assert_eq!(bit2int(&BitVec4::parse_msb("1x10").unwrap()), TwoState::Unknown);
    }

    #[test]
    fn wide_values_wrap() {
        let v = BitVec4::from_biguint(70, &((BigUint::one() << 70) + 5u32));
        assert_eq!(v.to_u64(), Some(5));
        let neg = BitVec4::from_bigint(8, &BigInt::from(-1));
        assert_eq!(neg.to_u64(), Some(255));
        assert_eq!(neg.to_bigint(), Some(BigInt::from(-1)));
    }

    #[test]
    fn slice_and_concat() {
        let v = BitVec4::parse_msb("10110010").unwrap();
        assert_eq!(v.slice(4, 4).to_msb_string(), "1011");
        let hi = BitVec4::parse_msb("10").unwrap();
        let lo = BitVec4::parse_msb("1").unwrap();
        assert_eq!(BitVec4::concat([&hi, &lo]).to_msb_string(), "101");
    }

    #[test]
    fn z_reads_as_x() {
        let v = BitVec4::all_z(3);
        assert_eq!(v.z_as_x(), BitVec4::all_x(3));
    }

    #[test]
    #[should_panic]
    fn zero_width_rejected() {
        let _ = BitVec4::zeros(0);
    }
}
