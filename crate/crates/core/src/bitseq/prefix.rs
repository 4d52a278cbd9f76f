//! Finite binary words standing for initial segments `A ↾ N`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

const WORD_BITS: usize = 64;

/// The first `len` bits of the characteristic function of a set of naturals.
///
/// Bits are packed least significant first into `u64` words; unused high bits
/// of the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitPrefix {
    words: Vec<u64>,
    len: usize,
}

impl BitPrefix {
    pub fn zeros(len: usize) -> Self {
        BitPrefix {
            words: vec![0; len.div_ceil(WORD_BITS)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut p = BitPrefix {
            words: vec![u64::MAX; len.div_ceil(WORD_BITS)],
            len,
        };
        p.clear_tail();
        p
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut p = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                p.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        p
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_fn(bits.len(), |i| bits[i])
    }

    /// Prefix of length `len` whose ones are exactly `positions` (each `< len`).
    pub fn from_positions(len: usize, positions: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut p = Self::zeros(len);
        for x in positions {
            if x >= len {
                return Err(invalid(format!("position {x} outside prefix of length {len}")));
            }
            p.set(x, true);
        }
        Ok(p)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit `i`. Panics when `i >= len`.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "index {i} out of range for prefix of length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn try_get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.get(i))
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "index {i} out of range for prefix of length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if bit {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(WORD_BITS) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    pub fn extend_from(&mut self, other: &BitPrefix) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// `A ↾ m` for `m <= len`.
    pub fn truncated(&self, m: usize) -> Result<BitPrefix> {
        if m > self.len {
            return Err(Error::PrefixTooShort {
                needed: m,
                available: self.len,
            });
        }
        let mut p = BitPrefix {
            words: self.words[..m.div_ceil(WORD_BITS)].to_vec(),
            len: m,
        };
        p.clear_tail();
        Ok(p)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of ones among the first `n` bits, i.e. `|A ↾ n|`.
    pub fn rank(&self, n: usize) -> usize {
        assert!(n <= self.len, "rank {n} beyond prefix of length {}", self.len);
        let full = n / WORD_BITS;
        let mut c: usize = self.words[..full].iter().map(|w| w.count_ones() as usize).sum();
        let rem = n % WORD_BITS;
        if rem > 0 {
            c += (self.words[full] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        c
    }

    /// Number of ones with position in `range`.
    pub fn count_ones_in(&self, range: Range<usize>) -> usize {
        if range.start >= range.end {
            return 0;
        }
        self.rank(range.end) - self.rank(range.start)
    }

    /// Running counts: element `n` is `|A ↾ n|` for `0 <= n <= len`.
    pub fn cumulative_counts(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.len + 1);
        let mut c = 0u64;
        out.push(0);
        for b in self.iter() {
            c += b as u64;
            out.push(c);
        }
        out
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1)
    }

    /// Positions of the ones, increasing.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD_BITS + t)
            })
        })
    }

    pub fn complement(&self) -> BitPrefix {
        let mut p = BitPrefix {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        p.clear_tail();
        p
    }

    pub(crate) fn zip_words(&self, other: &BitPrefix, f: impl Fn(u64, u64) -> u64) -> BitPrefix {
        debug_assert_eq!(self.len, other.len);
        let mut p = BitPrefix {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            len: self.len,
        };
        p.clear_tail();
        p
    }

    /// Little-endian bit order: bit `i` is bit `i % 8` of byte `i / 8`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    /// Inverse of [`to_le_bytes`](Self::to_le_bytes). `len` defaults to all bits of `bytes`.
    pub fn from_le_bytes(bytes: &[u8], len: Option<usize>) -> Result<BitPrefix> {
        let available = bytes.len() * 8;
        let len = len.unwrap_or(available);
        if len > available {
            return Err(Error::PrefixTooShort {
                needed: len,
                available,
            });
        }
        let mut words = Vec::with_capacity(len.div_ceil(WORD_BITS));
        for chunk in bytes[..len.div_ceil(8)].chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            words.push(u64::from_le_bytes(buf));
        }
        let mut p = BitPrefix { words, len };
        p.clear_tail();
        Ok(p)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem > 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitPrefix({self})")
        } else {
            write!(f, "BitPrefix(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl FromStr for BitPrefix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid(format!("unexpected character {other:?} in bit string"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bits))
    }
}

/// Pointwise set operations on equal-length prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Complement,
    Union,
    Intersect,
    /// `A △ B`
    SymDiff,
    /// `A ▽ B = {n : A(n) = B(n)}`
    SymAgree,
}

/// Apply `op` bitwise. `Complement` ignores `b` (its length is not checked).
pub fn pointwise(op: SetOp, a: &BitPrefix, b: &BitPrefix) -> Result<BitPrefix> {
    if op == SetOp::Complement {
        return Ok(a.complement());
    }
    if a.len != b.len {
        return Err(Error::LengthMismatch {
            left: a.len,
            right: b.len,
        });
    }
    Ok(match op {
        SetOp::Complement => unreachable!(),
        SetOp::Union => a.zip_words(b, |x, y| x | y),
        SetOp::Intersect => a.zip_words(b, |x, y| x & y),
        SetOp::SymDiff => a.zip_words(b, |x, y| x ^ y),
        SetOp::SymAgree => a.zip_words(b, |x, y| !(x ^ y)),
    })
}
