//! Bit strings over {0,1}* with MSB-first packing, plus the little
//! readers/writers shared by every binary format in the crate.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A finite string over {0,1}. Bit `i` lives at `data[i/8]`, MSB first.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bits {
    data: Vec<u8>,
    len: usize,
}

impl Bits {
    pub fn new() -> Self {
        Bits::default()
    }

    pub fn from_bools(bs: &[bool]) -> Self {
        let mut out = Bits::new();
        for &b in bs {
            out.push(b);
        }
        out
    }

    /// Whole bytes, len = 8 * bytes.len().
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Bits {
            len: bytes.len() * 8,
            data: bytes.to_vec(),
        }
    }

    /// Parse a "0101" style string; any other character is rejected.
    pub fn from_str01(s: &str) -> Option<Self> {
        let mut out = Bits::new();
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                _ => return None,
            }
        }
        Some(out)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.data[i / 8] >> (7 - (i % 8))) & 1 == 1
    }

    pub fn push(&mut self, b: bool) {
        if self.len % 8 == 0 {
            self.data.push(0);
        }
        if b {
            let i = self.len;
            self.data[i / 8] |= 1 << (7 - (i % 8));
        }
        self.len += 1;
    }

    /// Keep only the first `len` bits; the tail padding is cleared so that
    /// equal bit strings stay byte-equal.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.data.truncate(len.div_ceil(8));
        if len % 8 != 0 {
            let last = self.data.len() - 1;
            self.data[last] &= 0xffu8 << (8 - (len % 8));
        }
    }

    pub fn push_byte(&mut self, byte: u8) {
        for i in (0..8).rev() {
            self.push((byte >> i) & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &Bits) {
        if self.len % 8 == 0 {
            // fast path: byte-aligned append
            self.data.extend_from_slice(&other.data);
            self.len += other.len;
        } else {
            for i in 0..other.len {
                self.push(other.get(i));
            }
        }
    }

    pub fn concat(&self, other: &Bits) -> Bits {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    /// The underlying bytes when the length is a whole number of bytes.
    pub fn as_bytes(&self) -> Option<&[u8]> {
        if self.len % 8 == 0 {
            Some(&self.data)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// First bit and the remainder, if nonempty.
    pub fn split_first(&self) -> Option<(bool, Bits)> {
        if self.is_empty() {
            return None;
        }
        let mut rest = Bits::new();
        for i in 1..self.len {
            rest.push(self.get(i));
        }
        Some((self.get(0), rest))
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        for b in &self.data {
            s.push_str(&format!("{b:02x}"));
        }
        format!("{}:{}", self.len, s)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let (len, hex) = s.split_once(':')?;
        let len: usize = len.parse().ok()?;
        if hex.len() % 2 != 0 || len > hex.len() * 4 || hex.len() * 4 >= len + 8 + 4 {
            return None;
        }
        let mut data = Vec::with_capacity(hex.len() / 2);
        let mut chars = hex.chars();
        while let (Some(a), Some(b)) = (chars.next(), chars.next()) {
            let hi = a.to_digit(16)?;
            let lo = b.to_digit(16)?;
            data.push(((hi << 4) | lo) as u8);
        }
        if data.len() != len.div_ceil(8) {
            return None;
        }
        // trailing pad bits must be zero so the representation is unique
        let out = Bits { data, len };
        for i in len..out.data.len() * 8 {
            if (out.data[i / 8] >> (7 - (i % 8))) & 1 == 1 {
                return None;
            }
        }
        Some(out)
    }

    /// Length-lexicographic order: shorter first, then bitwise.
    pub fn cmp_len_lex(&self, other: &Bits) -> std::cmp::Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| self.iter().cmp(other.iter()))
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits[")?;
        for b in self.iter() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl PartialOrd for Bits {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bits {
    /// Plain lexicographic order with prefix-first tie break.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.iter().cmp(other.iter())
    }
}

/// Sequential reader over a `Bits` value.
pub struct BitReader<'a> {
    bits: &'a Bits,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a Bits) -> Self {
        BitReader { bits, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        if self.pos < self.bits.len() {
            let b = self.bits.get(self.pos);
            self.pos += 1;
            Some(b)
        } else {
            None
        }
    }

    pub fn read_byte(&mut self) -> Option<u8> {
        let mut v = 0u8;
        for _ in 0..8 {
            v = (v << 1) | u8::from(self.read_bit()?);
        }
        Some(v)
    }

    /// Unary-style index code: `k` ones then a zero encodes `k`.
    pub fn read_unary(&mut self) -> Option<u64> {
        let mut k = 0u64;
        loop {
            match self.read_bit()? {
                true => k += 1,
                false => return Some(k),
            }
        }
    }

    /// Canonical LEB128 (minimal length), bit-packed byte by byte.
    pub fn read_varint(&mut self) -> Option<u64> {
        let mut v: u64 = 0;
        let mut shift = 0u32;
        loop {
            let byte = self.read_byte()?;
            if shift >= 63 && byte > 1 {
                return None;
            }
            v |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                // reject non-minimal encodings
                if byte == 0 && shift > 0 {
                    return None;
                }
                return Some(v);
            }
            shift += 7;
            if shift > 63 {
                return None;
            }
        }
    }

    pub fn read_exact(&mut self, n: usize) -> Option<Bits> {
        if self.remaining() < n {
            return None;
        }
        let mut out = Bits::new();
        for _ in 0..n {
            out.push(self.read_bit()?);
        }
        Some(out)
    }
}

/// Unary-style index code used by the canonical query/renaming encodings.
pub fn push_unary(out: &mut Bits, k: u64) {
    for _ in 0..k {
        out.push(true);
    }
    out.push(false);
}

pub fn unary_len(k: u64) -> usize {
    k as usize + 1
}

pub fn push_varint(out: &mut Bits, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push_byte(byte);
            return;
        }
        out.push_byte(byte | 0x80);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_get_roundtrip() {
        let mut b = Bits::new();
        let pattern = [true, false, false, true, true, true, false, true, false];
        for &x in &pattern {
            b.push(x);
        }
        assert_eq!(b.len(), 9);
        for (i, &x) in pattern.iter().enumerate() {
            assert_eq!(b.get(i), x);
        }
    }

    #[test]
    fn varint_roundtrip_and_canonicality() {
        for v in [0u64, 1, 127, 128, 300, 16383, 16384, u64::MAX] {
            let mut b = Bits::new();
            push_varint(&mut b, v);
            let mut r = BitReader::new(&b);
            assert_eq!(r.read_varint(), Some(v));
            assert_eq!(r.remaining(), 0);
        }
        // 0x80 0x00 is a non-minimal encoding of 0
        let b = Bits::from_bytes(&[0x80, 0x00]);
        assert_eq!(BitReader::new(&b).read_varint(), None);
    }

    #[test]
    fn unary_roundtrip() {
        for k in 0..20u64 {
            let mut b = Bits::new();
            push_unary(&mut b, k);
            assert_eq!(b.len(), unary_len(k));
            let mut r = BitReader::new(&b);
            assert_eq!(r.read_unary(), Some(k));
        }
    }

    #[test]
    fn hex_roundtrip() {
        let b = Bits::from_str01("10110010101").unwrap();
        assert_eq!(Bits::from_hex(&b.to_hex()), Some(b.clone()));
        // pad bits must be zero
        assert_eq!(Bits::from_hex("3:ff"), None);
    }

    #[test]
    fn len_lex_order() {
        let a = Bits::from_str01("1").unwrap();
        let b = Bits::from_str01("00").unwrap();
        assert_eq!(a.cmp_len_lex(&b), std::cmp::Ordering::Less);
        assert_eq!(a.cmp(&b), std::cmp::Ordering::Greater);
    }
}
