//! Declared deterministic rules standing in for computable sets and for
//! step-budgeted partial computable functions.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prefix::{pointwise, BitPrefix, SetOp};
use crate::error::{invalid, Result};

/// Which family a [`Generator`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    ExplicitFormula,
    EventuallyPeriodic,
    SeededRandom,
    TableBacked,
}

/// A total rule `index -> bit`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `preamble` followed by `period` repeated forever. `period` is nonempty.
    Periodic {
        preamble: BitPrefix,
        period: BitPrefix,
    },
    /// Independent bits with `P(1) = num/den`, addressable by index.
    Random { seed: u64, num: u64, den: u64 },
    Formula(Formula),
    /// Stored bits; positions past the table read as 0.
    Table(Arc<BitPrefix>),
}

/// Closed-form membership rules and combinators over generators.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// `R_n = {k : 2^n | k, 2^(n+1) ∤ k}`
    Rn(u32),
    /// `⋃_{n ∈ set} R_n`
    RCode(Vec<u32>),
    /// `{k : k ≡ residue (mod modulus)}`
    Residue { modulus: u64, residue: u64 },
    /// Range of `k ↦ a·k + b`, `a >= 1`.
    AffineRange { a: u64, b: u64 },
    Complement(Box<Generator>),
    Union(Vec<Generator>),
    Intersect(Vec<Generator>),
    /// `{n : φ(n) converges to 1 within the budget}`
    Coarsened {
        partial: Box<PartialGenerator>,
        budget: u64,
    },
}

#[inline]
pub(crate) fn in_rn(n: u32, k: u64) -> bool {
    k != 0 && k.trailing_zeros() == n
}

fn random_word(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(index as u128 * 2);
    rng.next_u64()
}

const DELAY_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn scaled_delay(x: u64, max: u64) -> u64 {
    ((x as u128 * (max as u128 + 1)) >> 64) as u64
}

#[inline]
fn scaled_below(x: u64, num: u64, den: u64) -> bool {
    ((x as u128 * den as u128) >> 64) < num as u128
}

impl Generator {
    pub fn zeros() -> Self {
        Generator::Periodic {
            preamble: BitPrefix::default(),
            period: BitPrefix::zeros(1),
        }
    }

    pub fn ones() -> Self {
        Generator::Periodic {
            preamble: BitPrefix::default(),
            period: BitPrefix::ones(1),
        }
    }

    /// Eventually periodic generator from bit strings like `"0110"`.
    pub fn periodic(preamble: &str, period: &str) -> Result<Self> {
        let period: BitPrefix = period.parse()?;
        if period.is_empty() {
            return Err(invalid("period must be nonempty"));
        }
        Ok(Generator::Periodic {
            preamble: preamble.parse()?,
            period,
        })
    }

    /// Indicator of the even numbers.
    pub fn evens() -> Self {
        Self::periodic("", "10").unwrap()
    }

    pub fn odds() -> Self {
        Self::periodic("", "01").unwrap()
    }

    pub fn random(seed: u64, num: u64, den: u64) -> Result<Self> {
        if den == 0 || num > den {
            return Err(invalid(format!("probability {num}/{den} outside [0,1]")));
        }
        Ok(Generator::Random { seed, num, den })
    }

    pub fn rn(n: u32) -> Self {
        Generator::Formula(Formula::Rn(n))
    }

    pub fn table(bits: BitPrefix) -> Self {
        Generator::Table(Arc::new(bits))
    }

    pub fn complement(g: Generator) -> Self {
        Generator::Formula(Formula::Complement(Box::new(g)))
    }

    pub fn union(gs: Vec<Generator>) -> Self {
        Generator::Formula(Formula::Union(gs))
    }

    pub fn intersect(gs: Vec<Generator>) -> Self {
        Generator::Formula(Formula::Intersect(gs))
    }

    pub fn kind(&self) -> GeneratorKind {
        match self {
            Generator::Periodic { .. } => GeneratorKind::EventuallyPeriodic,
            Generator::Random { .. } => GeneratorKind::SeededRandom,
            Generator::Formula(_) => GeneratorKind::ExplicitFormula,
            Generator::Table(_) => GeneratorKind::TableBacked,
        }
    }

    /// Preamble and period lengths for eventually periodic generators.
    pub fn periodic_shape(&self) -> Option<(usize, usize)> {
        match self {
            Generator::Periodic { preamble, period } => Some((preamble.len(), period.len())),
            _ => None,
        }
    }

    pub fn bit(&self, i: u64) -> bool {
        match self {
            Generator::Periodic { preamble, period } => {
                let p = preamble.len() as u64;
                if i < p {
                    preamble.get(i as usize)
                } else {
                    period.get(((i - p) % period.len() as u64) as usize)
                }
            }
            Generator::Random { seed, num, den } => {
                scaled_below(random_word(*seed, i), *num, *den)
            }
            Generator::Formula(f) => f.bit(i),
            Generator::Table(t) => t.try_get(i as usize).unwrap_or(false),
        }
    }

    /// `g ↾ n`.
    pub fn evaluate_prefix(&self, n: usize) -> BitPrefix {
        match self {
            Generator::Random { seed, num, den } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                BitPrefix::from_fn(n, |_| scaled_below(rng.next_u64(), *num, *den))
            }
            Generator::Table(t) => {
                if n <= t.len() {
                    t.truncated(n).unwrap()
                } else {
                    BitPrefix::from_fn(n, |i| t.try_get(i).unwrap_or(false))
                }
            }
            _ => BitPrefix::from_fn(n, |i| self.bit(i as u64)),
        }
    }
}

impl Formula {
    pub fn bit(&self, i: u64) -> bool {
        match self {
            Formula::Rn(n) => in_rn(*n, i),
            Formula::RCode(set) => i != 0 && set.contains(&i.trailing_zeros()),
            Formula::Residue { modulus, residue } => i % modulus == *residue,
            Formula::AffineRange { a, b } => i >= *b && (i - b).is_multiple_of(*a),
            Formula::Complement(g) => !g.bit(i),
            Formula::Union(gs) => gs.iter().any(|g| g.bit(i)),
            Formula::Intersect(gs) => gs.iter().all(|g| g.bit(i)),
            Formula::Coarsened { partial, budget } => {
                partial.evaluate_budgeted(i, *budget) == Budgeted::Converged(true)
            }
        }
    }
}

/// Anything that can answer membership queries for some initial segment.
pub trait Membership {
    /// `Some(bit)` when position `i` is available.
    fn member(&self, i: usize) -> Option<bool>;
    /// Number of available positions, `None` when unbounded.
    fn known_len(&self) -> Option<usize>;
}

impl Membership for BitPrefix {
    fn member(&self, i: usize) -> Option<bool> {
        self.try_get(i)
    }
    fn known_len(&self) -> Option<usize> {
        Some(self.len())
    }
}

impl Membership for Generator {
    fn member(&self, i: usize) -> Option<bool> {
        Some(self.bit(i as u64))
    }
    fn known_len(&self) -> Option<usize> {
        None
    }
}

/// Result of running a partial rule for a bounded number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budgeted {
    Converged(bool),
    Diverged,
}

impl Budgeted {
    pub fn value(self) -> Option<bool> {
        match self {
            Budgeted::Converged(b) => Some(b),
            Budgeted::Diverged => None,
        }
    }
}

/// The budget at which a partial rule first converges on an index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayRule {
    Constant(u64),
    /// `a·i + b`
    Affine { a: u64, b: u64 },
    /// Uniform in `[0, max]`, fixed per index by the seed.
    Random { seed: u64, max: u64 },
}

impl Default for DelayRule {
    fn default() -> Self {
        DelayRule::Constant(0)
    }
}

impl DelayRule {
    pub fn at(&self, i: u64) -> u64 {
        match self {
            DelayRule::Constant(c) => *c,
            DelayRule::Affine { a, b } => a.saturating_mul(i).saturating_add(*b),
            DelayRule::Random { seed, max } => {
                scaled_delay(random_word(seed ^ DELAY_SALT, i), *max)
            }
        }
    }

    /// `at(i)` for `i < len`.
    pub fn prefix(&self, len: usize) -> Vec<u64> {
        match self {
            DelayRule::Random { seed, max } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DELAY_SALT);
                (0..len).map(|_| scaled_delay(rng.next_u64(), *max)).collect()
            }
            _ => (0..len as u64).map(|i| self.at(i)).collect(),
        }
    }
}

/// A partial rule `(index, budget) -> {0, 1, diverged}`, monotone in the budget.
///
/// The rule converges on `i` exactly when `domain` (if any) contains `i`, and
/// it does so at budget `delay.at(i)` with value `values.bit(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialGenerator {
    pub values: Generator,
    pub domain: Option<Generator>,
    pub delay: DelayRule,
}

impl PartialGenerator {
    pub fn new(values: Generator, domain: Option<Generator>, delay: DelayRule) -> Self {
        PartialGenerator {
            values,
            domain,
            delay,
        }
    }

    /// Converges everywhere at budget 0.
    pub fn total(values: Generator) -> Self {
        Self::new(values, None, DelayRule::Constant(0))
    }

    pub fn never() -> Self {
        Self::new(Generator::zeros(), Some(Generator::zeros()), DelayRule::Constant(0))
    }

    pub fn convergence_budget(&self, i: u64) -> Option<u64> {
        match &self.domain {
            Some(d) if !d.bit(i) => None,
            _ => Some(self.delay.at(i)),
        }
    }

    pub fn evaluate_budgeted(&self, i: u64, budget: u64) -> Budgeted {
        match self.convergence_budget(i) {
            Some(t) if budget >= t => Budgeted::Converged(self.values.bit(i)),
            _ => Budgeted::Diverged,
        }
    }

    /// `(converged, values)` on `[0, len)` at `budget`; `values` is 0 where
    /// the rule has not converged.
    pub fn budgeted_prefix(&self, len: usize, budget: u64) -> (BitPrefix, BitPrefix) {
        let mut converged = match self.delay {
            DelayRule::Constant(c) if c <= budget => BitPrefix::ones(len),
            DelayRule::Constant(_) => BitPrefix::zeros(len),
            _ => {
                let delays = self.delay.prefix(len);
                BitPrefix::from_fn(len, |i| delays[i] <= budget)
            }
        };
        if let Some(d) = &self.domain {
            converged = pointwise(SetOp::Intersect, &converged, &d.evaluate_prefix(len)).unwrap();
        }
        let values = pointwise(SetOp::Intersect, &self.values.evaluate_prefix(len), &converged).unwrap();
        (converged, values)
    }
}

/// `evaluate_budgeted` as a free function.
pub fn evaluate_budgeted(g: &PartialGenerator, i: u64, budget: u64) -> Budgeted {
    g.evaluate_budgeted(i, budget)
}

/// `g ↾ n` as a free function.
pub fn evaluate_prefix(g: &Generator, n: usize) -> BitPrefix {
    g.evaluate_prefix(n)
}

/// A finite, densely indexed family of rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Library<T> {
    entries: Vec<T>,
}

impl<T> Default for Library<T> {
    fn default() -> Self {
        Library { entries: Vec::new() }
    }
}

pub type GeneratorLibrary = Library<Generator>;
pub type PartialLibrary = Library<PartialGenerator>;

impl<T> Library<T> {
    pub fn new(entries: Vec<T>) -> Self {
        Library { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, e: usize) -> Option<&T> {
        self.entries.get(e)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }
}

impl<T> std::ops::Index<usize> for Library<T> {
    type Output = T;
    fn index(&self, e: usize) -> &T {
        &self.entries[e]
    }
}

impl<T> FromIterator<T> for Library<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Library::new(iter.into_iter().collect())
    }
}

impl From<Vec<Generator>> for PartialLibrary {
    fn from(gs: Vec<Generator>) -> Self {
        gs.into_iter().map(PartialGenerator::total).collect()
    }
}
