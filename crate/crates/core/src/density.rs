//! Prefix densities, windowed liminf/limsup estimates, dyadic block
//! densities, the symmetric-difference profile and the library-relative
//! coarse computability estimate.

use std::cmp::Ordering;
use std::io::{self, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bitseq::{pointwise, BitPrefix, Generator, GeneratorLibrary, SetOp};
use crate::error::{invalid, Error, Result};
pub use crate::ratio::Density;
use crate::ratio::{self, frac};

/// `ρ_n(A) = |A ↾ n| / n`.
pub fn prefix_density(a: &BitPrefix, n: usize) -> Result<Density> {
    if n == 0 || n > a.len() {
        return Err(invalid(format!(
            "density below {n} is undefined for a prefix of length {}",
            a.len()
        )));
    }
    Ok(frac(a.rank(n) as u64, n as u64))
}

/// `ρ_1 .. ρ_N` of a prefix, stored as running counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensityProfile {
    // counts[n] = |A ↾ n|, n = 0..=N
    counts: Vec<u64>,
}

impl DensityProfile {
    pub fn horizon(&self) -> usize {
        self.counts.len() - 1
    }

    /// `ρ_n` for `1 <= n <= N`.
    pub fn rho(&self, n: usize) -> Density {
        assert!(n >= 1 && n <= self.horizon(), "ρ_{n} outside profile");
        frac(self.counts[n], n as u64)
    }

    pub fn count(&self, n: usize) -> u64 {
        self.counts[n]
    }

    pub fn values(&self) -> impl Iterator<Item = Density> + '_ {
        (1..=self.horizon()).map(|n| self.rho(n))
    }

    /// CSV with columns `n,rho_n,rho_n_exact`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,rho_n,rho_n_exact")?;
        for n in 1..=self.horizon() {
            let r = self.rho(n);
            writeln!(w, "{n},{:.12},{}/{}", ratio::to_f64(&r), r.numer(), r.denom())?;
        }
        Ok(())
    }
}

pub fn density_profile(a: &BitPrefix) -> Result<DensityProfile> {
    if a.is_empty() {
        return Err(invalid("density profile of an empty prefix"));
    }
    Ok(DensityProfile {
        counts: a.cumulative_counts(),
    })
}

/// Windowed surrogate for `(liminf ρ_n, limsup ρ_n)`: min and max of `ρ_j`
/// over `tail_start <= j <= horizon`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityEstimate {
    #[serde(with = "ratio::serde_str")]
    pub liminf_est: Density,
    #[serde(with = "ratio::serde_str")]
    pub limsup_est: Density,
    /// A `j` attaining `liminf_est` (least such).
    pub liminf_at: usize,
    /// A `j` attaining `limsup_est` (least such).
    pub limsup_at: usize,
    pub tail_start: usize,
    pub horizon: usize,
}

impl DensityEstimate {
    pub fn liminf_f64(&self) -> f64 {
        ratio::to_f64(&self.liminf_est)
    }
    pub fn limsup_f64(&self) -> f64 {
        ratio::to_f64(&self.limsup_est)
    }
}

/// `N / 2`, but at least 1.
pub fn default_tail(horizon: usize) -> usize {
    (horizon / 2).max(1)
}

#[inline]
fn cmp_fracs(c1: u64, n1: u64, c2: u64, n2: u64) -> Ordering {
    (c1 as u128 * n2 as u128).cmp(&(c2 as u128 * n1 as u128))
}

pub fn estimate_liminf_limsup(p: &DensityProfile, tail_start: usize) -> Result<DensityEstimate> {
    let horizon = p.horizon();
    if tail_start == 0 || tail_start > horizon {
        return Err(invalid(format!(
            "tail start {tail_start} outside [1, {horizon}]"
        )));
    }
    let (mut lo, mut hi) = (tail_start, tail_start);
    for j in tail_start + 1..=horizon {
        let c = p.counts[j];
        if cmp_fracs(c, j as u64, p.counts[lo], lo as u64) == Ordering::Less {
            lo = j;
        }
        if cmp_fracs(c, j as u64, p.counts[hi], hi as u64) == Ordering::Greater {
            hi = j;
        }
    }
    Ok(DensityEstimate {
        liminf_est: p.rho(lo),
        limsup_est: p.rho(hi),
        liminf_at: lo,
        limsup_at: hi,
        tail_start,
        horizon,
    })
}

/// Exact limiting density of an eventually periodic generator; `None` for
/// every other kind.
pub fn exact_density(g: &Generator) -> Option<Density> {
    match g {
        Generator::Periodic { period, .. } => {
            Some(frac(period.count_ones() as u64, period.len() as u64))
        }
        _ => None,
    }
}

/// Positions of the dyadic block `I_k = [2^k - 1, 2^(k+1) - 1)`.
pub fn block_range(k: u32) -> Range<usize> {
    (1usize << k) - 1..(1usize << (k + 1)) - 1
}

/// `d_k(A) = |A ∩ I_k| / 2^k`.
pub fn block_density(a: &BitPrefix, k: u32) -> Result<Density> {
    let r = block_range(k);
    if r.end > a.len() {
        return Err(Error::PrefixTooShort {
            needed: r.end,
            available: a.len(),
        });
    }
    Ok(frac(a.count_ones_in(r) as u64, 1u64 << k))
}

/// `d_0 .. d_K` over the dyadic blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicProfile {
    counts: Vec<u64>,
}

impl DyadicProfile {
    /// Largest block index `K`.
    pub fn k_max(&self) -> u32 {
        self.counts.len() as u32 - 1
    }

    pub fn d(&self, k: u32) -> Density {
        frac(self.counts[k as usize], 1u64 << k)
    }

    pub fn block_count(&self, k: u32) -> u64 {
        self.counts[k as usize]
    }

    pub fn values(&self) -> impl Iterator<Item = Density> + '_ {
        (0..=self.k_max()).map(|k| self.d(k))
    }

    /// CSV with columns `k,d_k,d_k_exact`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,d_k,d_k_exact")?;
        for k in 0..=self.k_max() {
            let d = self.d(k);
            writeln!(w, "{k},{:.12},{}/{}", ratio::to_f64(&d), d.numer(), d.denom())?;
        }
        Ok(())
    }
}

/// Densities of every dyadic block contained in the prefix.
pub fn dyadic_densities(a: &BitPrefix) -> Result<DyadicProfile> {
    if a.is_empty() {
        return Err(Error::PrefixTooShort {
            needed: 1,
            available: 0,
        });
    }
    // largest K with 2^(K+1) - 1 <= len
    let k = usize::BITS - (a.len() + 1).leading_zeros() - 2;
    dyadic_densities_to(a, k)
}

/// Densities of blocks `I_0 .. I_K`; the prefix must reach `2^(K+1) - 1`.
pub fn dyadic_densities_to(a: &BitPrefix, k_max: u32) -> Result<DyadicProfile> {
    let needed = block_range(k_max).end;
    if needed > a.len() {
        return Err(Error::PrefixTooShort {
            needed,
            available: a.len(),
        });
    }
    Ok(DyadicProfile {
        counts: (0..=k_max)
            .map(|k| a.count_ones_in(block_range(k)) as u64)
            .collect(),
    })
}

/// Profile of `A △ B`; its limsup estimate approximates `D(A, B)`.
pub fn metric_profile(a: &BitPrefix, b: &BitPrefix) -> Result<DensityProfile> {
    density_profile(&pointwise(SetOp::SymDiff, a, b)?)
}

/// Best windowed agreement over a library.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaHat {
    #[serde(with = "ratio::serde_str")]
    pub value: Density,
    /// Least library index attaining `value`.
    pub index: usize,
    /// Agreement estimate for every library entry, by index.
    pub estimates: Vec<DensityEstimate>,
}

/// `max_e liminf_est(ρ(A ▽ C_e))` over the library, ties to the least index.
pub fn gamma_hat(a: &BitPrefix, lib: &GeneratorLibrary, tail_start: usize) -> Result<GammaHat> {
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let estimates = lib
        .iter()
        .map(|g| {
            let agree = pointwise(SetOp::SymAgree, a, &g.evaluate_prefix(a.len()))?;
            estimate_liminf_limsup(&density_profile(&agree)?, tail_start)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut index = 0;
    for (e, est) in estimates.iter().enumerate() {
        if est.liminf_est > estimates[index].liminf_est {
            index = e;
        }
    }
    Ok(GammaHat {
        value: estimates[index].liminf_est,
        index,
        estimates,
    })
}

/// `ρ_n(A) + ρ_n(Ā)`, which is exactly 1.
pub fn complement_sum(a: &BitPrefix, n: usize) -> Result<Density> {
    Ok(prefix_density(a, n)? + prefix_density(&a.complement(), n)?)
}
