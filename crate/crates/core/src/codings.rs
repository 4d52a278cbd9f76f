//! Set codings: the `R_n` family and `R(A)`, the `C_k` approximants, the
//! factorial-interval code `I(A)`, binary-expansion sets and their slices,
//! monotone images and the spectrum transform.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bitseq::{in_rn, BitPrefix, Formula, Generator, Membership};
use crate::error::{invalid, Error, Result};
use crate::ratio::{frac, pow2_inv, Density};

/// `k ∈ R_n`: `2^n | k` and `2^(n+1) ∤ k`. Zero lies in no `R_n`.
pub fn rn_membership(n: u32, k: u64) -> bool {
    in_rn(n, k)
}

/// The unique `n` with `k ∈ R_n`, for `k >= 1`.
pub fn rn_index(k: u64) -> Option<u32> {
    (k != 0).then(|| k.trailing_zeros())
}

/// `|R_n ∩ [0, len)|`.
pub fn rn_count_below(n: u32, len: u64) -> u64 {
    if n >= 64 {
        return 0;
    }
    // k = 2^n (2j + 1) < len
    let step = 1u64 << n;
    if len <= step {
        0
    } else {
        (len - step - 1) / (step << 1).max(1) + 1
    }
}

/// Largest `n` with `R_n ∩ [0, len) ≠ ∅`.
fn max_rn_index_below(len: usize) -> Option<u32> {
    (len >= 2).then(|| usize::BITS - 1 - (len - 1).leading_zeros())
}

fn require<M: Membership + ?Sized>(a: &M, n: usize) -> Result<()> {
    match a.member(n) {
        Some(_) => Ok(()),
        None => Err(Error::PrefixTooShort {
            needed: n + 1,
            available: a.known_len().unwrap_or(0),
        }),
    }
}

/// `R(A) ↾ len`: bit `k` is `A(n)` for the `n` with `k ∈ R_n`; bit 0 is 0.
pub fn r_code<M: Membership + ?Sized>(a: &M, len: usize) -> Result<BitPrefix> {
    if let Some(top) = max_rn_index_below(len) {
        require(a, top as usize)?;
    }
    let bits: Vec<bool> = (0..=max_rn_index_below(len).unwrap_or(0))
        .map(|n| a.member(n as usize).unwrap_or(false))
        .collect();
    Ok(BitPrefix::from_fn(len, |k| {
        rn_index(k as u64).is_some_and(|n| bits[n as usize])
    }))
}

/// `C_k = ⋃ {R_n : n ∈ A, n < k}` as a total generator.
pub fn ck_approximant(a: &BitPrefix, k: usize) -> Result<Generator> {
    if a.len() < k {
        return Err(Error::PrefixTooShort {
            needed: k,
            available: a.len(),
        });
    }
    let set: Vec<u32> = (0..k).filter(|&n| a.get(n)).map(|n| n as u32).collect();
    Ok(if set.is_empty() {
        Generator::zeros()
    } else {
        Generator::Formula(Formula::RCode(set))
    })
}

/// `n!`, or `None` past `u64`.
pub fn factorial(n: u32) -> Option<u64> {
    (1..=n as u64).try_fold(1u64, |acc, k| acc.checked_mul(k))
}

/// `[n!, (n+1)!)`. Empty for `n = 0`.
pub fn factorial_interval(n: u32) -> Option<Range<u64>> {
    Some(factorial(n)?..factorial(n + 1)?)
}

/// The unique `n >= 1` with `k ∈ [n!, (n+1)!)`, for `k >= 1`.
pub fn factorial_index(k: u64) -> Option<u32> {
    if k == 0 {
        return None;
    }
    let (mut n, mut next) = (1u32, 2u64);
    while k >= next {
        n += 1;
        match next.checked_mul(n as u64 + 1) {
            Some(v) => next = v,
            None => break,
        }
    }
    Some(n)
}

/// `I(A) ↾ len`: bit `k >= 1` is `A(n)` for `k ∈ [n!, (n+1)!)`; bit 0 is 0.
pub fn interval_code<M: Membership + ?Sized>(a: &M, len: usize) -> Result<BitPrefix> {
    let top = if len >= 2 { factorial_index(len as u64 - 1).unwrap() } else { 0 };
    if top >= 1 {
        require(a, top as usize)?;
    }
    let bits: Vec<bool> = (0..=top).map(|n| a.member(n as usize).unwrap_or(false)).collect();
    let mut out = BitPrefix::zeros(len);
    for n in 1..=top {
        if bits[n as usize] {
            let r = factorial_interval(n).unwrap();
            for k in r.start as usize..(r.end as usize).min(len) {
                out.set(k, true);
            }
        }
    }
    Ok(out)
}

/// Non-terminating binary expansion `r = 0.b_0 b_1 ...` as the set `{i : b_i = 1}`.
///
/// Dyadic rationals take the tail-of-ones form, so `1/2` gives `0111...`.
pub fn binary_expansion_set(r: Density, bits: usize) -> Result<BitPrefix> {
    let (num, den) = (*r.numer() as u128, *r.denom() as u128);
    if num == 0 || num > den {
        return Err(invalid(format!("expansion needs 0 < r <= 1, got {r}")));
    }
    let mut x = num;
    Ok(BitPrefix::from_fn(bits, |_| {
        x *= 2;
        if x > den {
            x -= den;
            true
        } else {
            false
        }
    }))
}

/// Slices `S_e = R_{c_e}` where `c_0 < c_1 < ...` enumerates an expansion set.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceDecomposition {
    pub expansion: BitPrefix,
    pub c: Vec<u32>,
}

pub fn slice_decomposition(b: &BitPrefix) -> Result<SliceDecomposition> {
    let c: Vec<u32> = b.positions().map(|i| i as u32).collect();
    if c.is_empty() {
        return Err(invalid("expansion prefix has no ones"));
    }
    Ok(SliceDecomposition {
        expansion: b.clone(),
        c,
    })
}

impl SliceDecomposition {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `S_e`, or `None` past the materialized slices.
    pub fn slice(&self, e: usize) -> Option<Generator> {
        self.c.get(e).map(|&n| Generator::rn(n))
    }

    /// `ρ(S_e) = 2^-(c_e + 1)`.
    pub fn slice_density(&self, e: usize) -> Density {
        pow2_inv(self.c[e] + 1)
    }

    /// The `e` with `k ∈ S_e`, if any.
    pub fn slice_of(&self, k: u64) -> Option<usize> {
        let n = rn_index(k)?;
        self.c.binary_search(&n).ok()
    }

    /// `S = ⋃_e S_e = R(B)` over the materialized slices.
    pub fn union_generator(&self) -> Generator {
        Generator::Formula(Formula::RCode(self.c.clone()))
    }

    /// `⋃_{e < n} S_e`.
    pub fn union_below(&self, n: usize) -> Generator {
        if n == 0 {
            Generator::zeros()
        } else {
            Generator::Formula(Formula::RCode(self.c[..n.min(self.c.len())].to_vec()))
        }
    }

    /// `Σ_{e < n} 2^-(c_e + 1)`.
    pub fn density_below(&self, n: usize) -> Density {
        (0..n.min(self.c.len())).map(|e| self.slice_density(e)).sum()
    }

    /// Exact density of `S` over the materialized slices.
    pub fn exact_density(&self) -> Density {
        self.density_below(self.c.len())
    }

    /// Partial sums `Σ_{e <= j}` for each `j`.
    pub fn partial_sums(&self) -> Vec<Density> {
        let mut acc = frac(0, 1);
        self.c
            .iter()
            .map(|&n| {
                acc += pow2_inv(n + 1);
                acc
            })
            .collect()
    }

    /// Slices meeting `[0, len)`.
    pub fn slices_meeting(&self, len: u64) -> usize {
        self.c.iter().take_while(|&&n| n < 64 && (1u64 << n) < len).count()
    }
}

/// Strictly increasing map `h : ω → ω`.
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneMap {
    /// `k ↦ a·k + b`, `a >= 1`.
    Affine { a: u64, b: u64 },
    /// Explicit values; undefined past the table.
    Table(Arc<Vec<u64>>),
}

impl MonotoneMap {
    pub fn affine(a: u64, b: u64) -> Result<Self> {
        if a == 0 {
            return Err(invalid("affine map needs a >= 1"));
        }
        Ok(MonotoneMap::Affine { a, b })
    }

    pub fn table(values: Vec<u64>) -> Result<Self> {
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("table map is not strictly increasing"));
        }
        Ok(MonotoneMap::Table(Arc::new(values)))
    }

    /// Increasing enumeration of `set ↾ len`.
    pub fn enumerating(set: &BitPrefix) -> Self {
        MonotoneMap::Table(Arc::new(set.positions().map(|i| i as u64).collect()))
    }

    pub fn value(&self, k: u64) -> Option<u64> {
        match self {
            MonotoneMap::Affine { a, b } => a.checked_mul(k)?.checked_add(*b),
            MonotoneMap::Table(t) => t.get(usize::try_from(k).ok()?).copied(),
        }
    }

    /// `g(u)`: least `k` with `h(k) >= u`. `None` when a table ends first.
    pub fn least_preimage(&self, u: u64) -> Option<u64> {
        match self {
            MonotoneMap::Affine { a, b } => Some(if u <= *b { 0 } else { (u - b).div_ceil(*a) }),
            MonotoneMap::Table(t) => {
                let k = t.partition_point(|&v| v < u);
                (k < t.len()).then_some(k as u64)
            }
        }
    }

    /// `range(h) ↾ len`.
    pub fn range_prefix(&self, len: usize) -> BitPrefix {
        let mut out = BitPrefix::zeros(len);
        let mut k = 0;
        while let Some(v) = self.value(k) {
            if v >= len as u64 {
                break;
            }
            out.set(v as usize, true);
            k += 1;
        }
        out
    }

    /// `range(h)` as a generator where that is closed-form.
    pub fn range_generator(&self) -> Generator {
        match self {
            MonotoneMap::Affine { a, b } => Generator::Formula(Formula::AffineRange { a: *a, b: *b }),
            MonotoneMap::Table(t) => {
                let len = t.last().map_or(0, |&v| v as usize + 1);
                Generator::table(self.range_prefix(len))
            }
        }
    }
}

/// JSON form of a [`MonotoneMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonotoneMapDescriptor {
    Affine { a: u64, b: u64 },
    Table { values: Vec<u64> },
    /// Increasing enumeration of a generator's set, materialized to `len`.
    Enumerate { of: crate::bitseq::GeneratorDescriptor, len: usize },
}

impl MonotoneMapDescriptor {
    pub fn resolve(&self, base: &Path) -> Result<MonotoneMap> {
        match self {
            MonotoneMapDescriptor::Affine { a, b } => MonotoneMap::affine(*a, *b),
            MonotoneMapDescriptor::Table { values } => MonotoneMap::table(values.clone()),
            MonotoneMapDescriptor::Enumerate { of, len } => {
                Ok(MonotoneMap::enumerating(&of.resolve(base)?.evaluate_prefix(*len)))
            }
        }
    }
}

/// `h(X) ↾ len`.
pub fn monotone_image(h: &MonotoneMap, x: &BitPrefix, len: usize) -> Result<BitPrefix> {
    let needed = h
        .least_preimage(len as u64)
        .ok_or_else(|| invalid("monotone map table ends below the horizon"))?;
    if needed as usize > x.len() {
        return Err(Error::PrefixTooShort {
            needed: needed as usize,
            available: x.len(),
        });
    }
    let mut out = BitPrefix::zeros(len);
    for k in x.positions().take_while(|&k| (k as u64) < needed) {
        out.set(h.value(k as u64).unwrap() as usize, true);
    }
    Ok(out)
}

/// Positions `u` in `1..=len` where `ρ_u(h(X)) = ρ_u(range h) · ρ_{g(u)}(X)`
/// fails, with `ρ_0 := 0`. Empty means the identity holds throughout.
pub fn lemma_prod_violations(h: &MonotoneMap, x: &BitPrefix, len: usize) -> Result<Vec<usize>> {
    let image = monotone_image(h, x, len)?;
    let range = h.range_prefix(len);
    let (ic, rc, xc) = (
        image.cumulative_counts(),
        range.cumulative_counts(),
        x.cumulative_counts(),
    );
    let mut bad = Vec::new();
    for u in 1..=len {
        let g = h.least_preimage(u as u64).unwrap() as usize;
        let lhs = frac(ic[u], u as u64);
        let rho_x = if g == 0 { frac(0, 1) } else { frac(xc[g], g as u64) };
        if lhs != frac(rc[u], u as u64) * rho_x {
            bad.push(u);
        }
    }
    Ok(bad)
}

/// `Ĉ ↾ len = (h(C) ∪ R̄) ↾ len`; `R` must equal `range(h)` on the prefix.
pub fn spectrum_transform(
    c: &BitPrefix,
    h: &MonotoneMap,
    r: &Generator,
    len: usize,
) -> Result<BitPrefix> {
    let r_prefix = r.evaluate_prefix(len);
    let range = h.range_prefix(len);
    if let Some(u) = (0..len).find(|&u| r_prefix.get(u) != range.get(u)) {
        return Err(invalid(format!(
            "range of h and R differ at position {u}"
        )));
    }
    let image = monotone_image(h, c, len)?;
    Ok(BitPrefix::from_fn(len, |u| image.get(u) || !r_prefix.get(u)))
}
