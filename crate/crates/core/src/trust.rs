//! Blockwise trust between approximating sets, the merge that fuses a family
//! of ever-better approximations into one set, and limit smoothing of a
//! family given by eventually stable indices.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitseq::{pointwise, BitPrefix, Generator, PartialLibrary, SetOp};
use crate::density::{block_range, dyadic_densities_to, DyadicProfile};
use crate::error::{invalid, Error, Result};
use crate::ratio::{self, frac, Density};

/// `count / 2^k < 2^exp`, exactly.
pub fn block_density_below(count: u64, k: u32, exp: i64) -> bool {
    let shift = k as i64 + exp;
    if shift <= 0 {
        count == 0
    } else if shift >= 64 {
        true
    } else {
        count < 1u64 << shift
    }
}

/// Members `C_0 .. C_M` materialized through block `I_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFamily {
    members: Vec<BitPrefix>,
}

impl WitnessFamily {
    pub fn from_prefixes(members: Vec<BitPrefix>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::EmptyLibrary);
        };
        if let Some(m) = members.iter().find(|m| m.len() != first.len()) {
            return Err(Error::LengthMismatch {
                left: first.len(),
                right: m.len(),
            });
        }
        Ok(WitnessFamily { members })
    }

    /// Evaluates each generator through block `I_{k_max}`.
    pub fn from_generators(gens: &[Generator], k_max: u32) -> Result<Self> {
        let len = block_range(k_max).end;
        Self::from_prefixes(gens.iter().map(|g| g.evaluate_prefix(len)).collect())
    }

    /// Index of the last member, `M`.
    pub fn max_index(&self) -> usize {
        self.members.len() - 1
    }

    pub fn member(&self, n: usize) -> &BitPrefix {
        &self.members[n]
    }

    pub fn members(&self) -> &[BitPrefix] {
        &self.members
    }

    pub fn prefix_len(&self) -> usize {
        self.members[0].len()
    }

    /// Largest `K` such that every member covers `I_K`.
    pub fn k_max(&self) -> Option<u32> {
        let len = self.prefix_len();
        (len >= 1).then(|| usize::BITS - (len + 1).leading_zeros() - 2)
    }

    fn check_block(&self, k: u32) -> Result<()> {
        let needed = block_range(k).end;
        if needed > self.prefix_len() {
            return Err(Error::PrefixTooShort {
                needed,
                available: self.prefix_len(),
            });
        }
        Ok(())
    }

    fn block_diff(&self, m: usize, n: usize, k: u32) -> u64 {
        let r = block_range(k);
        let (a, b) = (&self.members[m], &self.members[n]);
        r.filter(|&i| a.get(i) != b.get(i)).count() as u64
    }
}

/// `C_m` trusts `C_n` on `I_k`: `d_k(C_n △ C_m) < 2^(2-m)`.
pub fn trusts(family: &WitnessFamily, m: usize, n: usize, k: u32) -> Result<bool> {
    if m >= n {
        return Err(invalid(format!("trust needs m < n, got m={m} n={n}")));
    }
    if n > family.max_index() {
        return Err(invalid(format!("member {n} is past the family")));
    }
    family.check_block(k)?;
    Ok(block_density_below(family.block_diff(m, n, k), k, 2 - m as i64))
}

/// Every `C_m`, `m < n`, trusts `C_n` on `I_k`. Vacuous for `n = 0`.
pub fn trusted(family: &WitnessFamily, n: usize, k: u32) -> Result<bool> {
    for m in 0..n {
        if !trusts(family, m, n, k)? {
            return Ok(false);
        }
    }
    family.check_block(k)?;
    Ok(true)
}

/// Trust relation for all `m < n <= M` and `k <= K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustMatrix {
    pub max_index: usize,
    pub k_max: u32,
    entries: Vec<bool>,
}

impl TrustMatrix {
    pub fn compute(family: &WitnessFamily, k_max: u32) -> Result<Self> {
        family.check_block(k_max)?;
        let m_max = family.max_index();
        let len = block_range(k_max).end;
        let mut entries = Vec::with_capacity((m_max + 1) * (m_max + 1) * (k_max as usize + 1));
        for m in 0..=m_max {
            for n in 0..=m_max {
                if m >= n {
                    entries.extend(std::iter::repeat_n(false, k_max as usize + 1));
                    continue;
                }
                let d = pointwise(
                    SetOp::SymDiff,
                    &family.member(m).truncated(len)?,
                    &family.member(n).truncated(len)?,
                )?;
                let prof = dyadic_densities_to(&d, k_max)?;
                entries.extend(
                    (0..=k_max).map(|k| block_density_below(prof.block_count(k), k, 2 - m as i64)),
                );
            }
        }
        Ok(TrustMatrix {
            max_index: m_max,
            k_max,
            entries,
        })
    }

    fn idx(&self, m: usize, n: usize, k: u32) -> usize {
        (m * (self.max_index + 1) + n) * (self.k_max as usize + 1) + k as usize
    }

    /// `C_m` trusts `C_n` on `I_k`; `m < n` required.
    pub fn trusts(&self, m: usize, n: usize, k: u32) -> bool {
        assert!(m < n && n <= self.max_index && k <= self.k_max);
        self.entries[self.idx(m, n, k)]
    }

    pub fn trusted(&self, n: usize, k: u32) -> bool {
        (0..n).all(|m| self.trusts(m, n, k))
    }

    /// Maximal `N <= min(M, k)` with `C_N` trusted on `I_k`.
    pub fn choice(&self, k: u32) -> usize {
        let top = self.max_index.min(k as usize);
        (0..=top).rev().find(|&n| self.trusted(n, k)).unwrap_or(0)
    }
}

/// Result of [`miller_merge`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    #[serde(skip)]
    pub merged: BitPrefix,
    pub k_max: u32,
    /// Member copied into each block `I_0 .. I_K`.
    pub chosen: Vec<usize>,
}

/// Blockwise fusion: `C ↾ I_k = C_N ↾ I_k` for the maximal trusted
/// `N <= min(M, k)`. The output has length `2^(K+1) - 1`.
pub fn miller_merge(family: &WitnessFamily, k_max: u32) -> Result<MergeReport> {
    let matrix = TrustMatrix::compute(family, k_max)?;
    let mut merged = BitPrefix::zeros(block_range(k_max).end);
    let mut chosen = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        let n = matrix.choice(k);
        let src = family.member(n);
        for i in block_range(k) {
            if src.get(i) {
                merged.set(i, true);
            }
        }
        chosen.push(n);
    }
    Ok(MergeReport {
        merged,
        k_max,
        chosen,
    })
}

/// `d_k(A △ C)` for `k <= K`.
pub fn block_errors(a: &BitPrefix, c: &BitPrefix, k_max: u32) -> Result<DyadicProfile> {
    let len = block_range(k_max).end;
    dyadic_densities_to(&pointwise(SetOp::SymDiff, &a.truncated(len)?, &c.truncated(len)?)?, k_max)
}

/// A block where a member misses its per-block target `d_k(A △ C_m) < 2^(1-m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub member: usize,
    pub k: u32,
    #[serde(with = "ratio::serde_str")]
    pub d_k: Density,
}

/// Blocks `k >= from_k` where the family breaks `d_k(A △ C_m) < 2^(1-m)`.
pub fn bound_violations(
    a: &BitPrefix,
    family: &WitnessFamily,
    k_max: u32,
    from_k: u32,
) -> Result<Vec<BoundViolation>> {
    let mut out = Vec::new();
    for (m, c) in family.members().iter().enumerate() {
        let errs = block_errors(a, c, k_max)?;
        for k in from_k..=k_max {
            if !block_density_below(errs.block_count(k), k, 1 - m as i64) {
                out.push(BoundViolation {
                    member: m,
                    k,
                    d_k: errs.d(k),
                });
            }
        }
    }
    Ok(out)
}

/// A family built by corrupting a target, plus where each member settles.
#[derive(Debug, Clone)]
pub struct PlantedFamily {
    pub family: WitnessFamily,
    /// From block `planting_k0[n]` on, member `n` errs on fewer than
    /// `2^(k-n-1)` positions of `I_k`.
    pub planting_k0: Vec<u32>,
}

impl PlantedFamily {
    /// First block from which the merged set is promised to be within
    /// `2^(3-n)` of the target: all members `m <= n` have settled and `k >= n`.
    pub fn merge_k0(&self, n: usize) -> u32 {
        self.planting_k0[..=n].iter().copied().max().unwrap_or(0).max(n as u32)
    }
}

/// Members `C_0 .. C_M` agreeing with `a` except on planted errors: random
/// garbage (density about 1/2) on blocks below a seeded settling block, then
/// `2^(k-n-1) - 1` flips per block (none when that is below 1).
pub fn plant_family(a: &BitPrefix, m_max: usize, k_max: u32, seed: u64) -> Result<PlantedFamily> {
    let len = block_range(k_max).end;
    let a = a.truncated(len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(m_max + 1);
    let mut planting_k0 = Vec::with_capacity(m_max + 1);
    for n in 0..=m_max {
        let k0 = (n as u32 + rng.gen_range(0..4)).min(k_max);
        let mut c = a.clone();
        for k in 0..=k_max {
            let r = block_range(k);
            if k < k0 {
                for i in r {
                    if rng.gen_bool(0.5) {
                        c.set(i, !a.get(i));
                    }
                }
            } else {
                let exp = k as i64 - n as i64 - 1;
                let flips = if exp >= 0 { (1usize << exp) - 1 } else { 0 };
                for off in sample(&mut rng, r.len(), flips) {
                    c.set(r.start + off, !a.get(r.start + off));
                }
            }
        }
        members.push(c);
        planting_k0.push(k0);
    }
    Ok(PlantedFamily {
        family: WitnessFamily::from_prefixes(members)?,
        planting_k0,
    })
}

/// `g(e, s)` given as change points: for each `e`, pairs `(from_stage, index)`
/// sorted by stage, the first at stage 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizingIndexTable {
    pub changes: Vec<Vec<(u64, usize)>>,
}

impl StabilizingIndexTable {
    pub fn new(changes: Vec<Vec<(u64, usize)>>) -> Result<Self> {
        for (e, row) in changes.iter().enumerate() {
            if row.first().map(|c| c.0) != Some(0) {
                return Err(invalid(format!("row {e} must start at stage 0")));
            }
            if row.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(invalid(format!("row {e} stages are not increasing")));
            }
        }
        Ok(StabilizingIndexTable { changes })
    }

    pub fn constant(indices: &[usize]) -> Self {
        StabilizingIndexTable {
            changes: indices.iter().map(|&i| vec![(0, i)]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn g(&self, e: usize, s: u64) -> usize {
        let row = &self.changes[e];
        let at = row.partition_point(|c| c.0 <= s);
        row[at - 1].1
    }

    /// Stage after which `g(e, ·)` is constant.
    pub fn stabilization_stage(&self, e: usize) -> u64 {
        self.changes[e].last().unwrap().0
    }

    pub fn limit(&self, e: usize) -> usize {
        self.changes[e].last().unwrap().1
    }
}

/// Default search cap for [`limit_smoothing`].
pub const DEFAULT_SMOOTHING_CAP: u64 = 1 << 16;

/// Value at `n` of the smoothed member: `Φ_{g(e,s)}(n)` for the least
/// `s >= n` at which that computation converges within `s` steps.
/// Returns `(value, s)`.
pub fn smoothed_bit(
    table: &StabilizingIndexTable,
    lib: &PartialLibrary,
    e: usize,
    n: u64,
    cap: u64,
) -> Result<(bool, u64)> {
    let mut s = n;
    while s <= cap {
        let i = table.g(e, s);
        let phi = lib
            .get(i)
            .ok_or_else(|| invalid(format!("table points at missing member {i}")))?;
        if let Some(v) = phi.evaluate_budgeted(n, s).value() {
            return Ok((v, s));
        }
        s += 1;
    }
    Err(Error::CapExceeded {
        cap,
        context: format!("no convergence for e={e} at n={n}"),
    })
}

/// Outcome of smoothing one row of a stabilizing table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub e: usize,
    pub len: usize,
    pub limit_index: usize,
    /// Positions where the smoothed set differs from the limit member.
    pub differs_at: Vec<usize>,
    /// Positions whose search hit the cap; they read as 0.
    pub capped_at: Vec<usize>,
}

/// `h_e ↾ len`, materialized as a table generator, plus a report.
pub fn limit_smoothing(
    table: &StabilizingIndexTable,
    lib: &PartialLibrary,
    e: usize,
    len: usize,
    cap: u64,
) -> Result<(Generator, SmoothingReport)> {
    if e >= table.len() {
        return Err(invalid(format!("no table row {e}")));
    }
    let limit_index = table.limit(e);
    let limit = lib
        .get(limit_index)
        .ok_or_else(|| invalid(format!("table points at missing member {limit_index}")))?;
    let mut bits = BitPrefix::zeros(len);
    let (mut differs_at, mut capped_at) = (Vec::new(), Vec::new());
    for n in 0..len {
        match smoothed_bit(table, lib, e, n as u64, cap) {
            Ok((v, _)) => {
                bits.set(n, v);
                if limit.evaluate_budgeted(n as u64, u64::MAX).value() != Some(v) {
                    differs_at.push(n);
                }
            }
            Err(Error::CapExceeded { .. }) => capped_at.push(n),
            Err(err) => return Err(err),
        }
    }
    Ok((
        Generator::table(bits),
        SmoothingReport {
            e,
            len,
            limit_index,
            differs_at,
            capped_at,
        },
    ))
}

/// `2^(3-n)` as an exact rational, for `n >= 3`; larger bounds saturate at 1.
pub fn merge_bound(n: usize) -> Density {
    if n >= 3 {
        ratio::pow2_inv(n as u32 - 3)
    } else {
        frac(1 << (3 - n), 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitseq::{DelayRule, PartialGenerator};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn density_threshold_is_exact() {
        // 3/8 < 1/2, 4/8 is not
        assert!(block_density_below(3, 3, -1));
        assert!(!block_density_below(4, 3, -1));
        assert!(block_density_below(0, 2, -5));
        assert!(!block_density_below(1, 2, -5));
        assert!(block_density_below(u64::MAX, 30, 40));
    }

    fn family(bits: &[&BitPrefix]) -> WitnessFamily {
        WitnessFamily::from_prefixes(bits.iter().map(|b| (*b).clone()).collect()).unwrap()
    }

    #[test]
    fn trust_examples() {
        let a = Generator::random(1, 1, 2).unwrap().evaluate_prefix(63);
        let same = family(&[&a, &a, &a, &a, &a]);
        for n in 1..5 {
            for m in 0..n {
                for k in 0..6 {
                    assert!(trusts(&same, m, n, k).unwrap());
                }
            }
        }
        // members differing everywhere
        let na = a.complement();
        let fam = family(&[&a, &na, &a, &na]);
        assert!(trusts(&fam, 0, 1, 3).unwrap());
        assert!(trusts(&fam, 1, 2, 3).unwrap());
        assert!(!trusts(&fam, 2, 3, 3).unwrap());
        assert!(trusts(&fam, 0, 3, 3).unwrap());
        assert!(trusts(&fam, 1, 2, 0).unwrap());
        assert!(trusts(&fam, 1, 1, 0).is_err());
        assert!(trusts(&fam, 0, 1, 6).is_err());

        assert!(trusted(&fam, 0, 4).unwrap());
        assert!(trusted(&fam, 1, 2).unwrap());
        assert!(!trusted(&fam, 3, 2).unwrap());
        let fam5 = family(&[&a, &a, &a, &a, &na]);
        assert!(!trusted(&fam5, 4, 2).unwrap());
    }

    #[test]
    fn matrix_matches_direct_evaluation() {
        let gens: Vec<_> = (0..5).map(|s| Generator::random(s, 1, 2 + s).unwrap()).collect();
        let fam = WitnessFamily::from_generators(&gens, 6).unwrap();
        let tm = TrustMatrix::compute(&fam, 6).unwrap();
        for n in 0..5 {
            for k in 0..=6 {
                assert_eq!(tm.trusted(n, k), trusted(&fam, n, k).unwrap());
                for m in 0..n {
                    assert_eq!(tm.trusts(m, n, k), trusts(&fam, m, n, k).unwrap());
                }
            }
        }
    }

    #[test]
    fn merge_examples() {
        let a = Generator::random(2, 1, 2).unwrap().evaluate_prefix(255);
        let fam = family(&[&a, &a, &a]);
        let r = miller_merge(&fam, 7).unwrap();
        assert_eq!(r.merged, a);
        assert_eq!(r.chosen, vec![0, 1, 2, 2, 2, 2, 2, 2]);

        let b = Generator::random(3, 1, 2).unwrap().evaluate_prefix(255);
        let r = miller_merge(&family(&[&b]), 7).unwrap();
        assert_eq!(r.merged, b);
        assert!(r.chosen.iter().all(|&n| n == 0));
        assert!(miller_merge(&fam, 8).is_err());
    }

    #[test]
    fn planted_family_meets_merge_bound() {
        let k_max = 14;
        let a = Generator::random(11, 1, 2).unwrap().evaluate_prefix(block_range(k_max).end);
        let planted = plant_family(&a, 6, k_max, 5).unwrap();
        for (n, &k0) in planted.planting_k0.iter().enumerate() {
            let errs = block_errors(&a, planted.family.member(n), k_max).unwrap();
            for k in k0..=k_max {
                assert!(block_density_below(errs.block_count(k), k, -(n as i64) - 1));
            }
        }
        let merged = miller_merge(&planted.family, k_max).unwrap();
        let errs = block_errors(&a, &merged.merged, k_max).unwrap();
        for n in 0..=6 {
            for k in planted.merge_k0(n)..=k_max {
                assert!(errs.d(k) < merge_bound(n), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn violations_surface_bad_members() {
        let a = BitPrefix::zeros(63);
        let fam = family(&[&a, &a.complement()]);
        let v = bound_violations(&a, &fam, 5, 0).unwrap();
        assert_eq!(v.len(), 6);
        assert!(v.iter().all(|x| x.member == 1 && x.d_k == frac(1, 1)));
    }

    #[test]
    fn smoothing_examples() {
        let lib: PartialLibrary = vec![Generator::zeros(), Generator::ones()].into();
        let table = StabilizingIndexTable::constant(&[1]);
        let (h, rep) = limit_smoothing(&table, &lib, 0, 100, DEFAULT_SMOOTHING_CAP).unwrap();
        assert_eq!(h.evaluate_prefix(100), BitPrefix::ones(100));
        assert!(rep.differs_at.is_empty());

        // unit budgets, switch at stage 10
        let lib = PartialLibrary::new(vec![
            PartialGenerator::new(Generator::zeros(), None, DelayRule::Constant(1)),
            PartialGenerator::new(Generator::ones(), None, DelayRule::Constant(1)),
        ]);
        let table = StabilizingIndexTable::new(vec![vec![(0, 0), (10, 1)]]).unwrap();
        let (_, rep) = limit_smoothing(&table, &lib, 0, 40, DEFAULT_SMOOTHING_CAP).unwrap();
        assert_eq!(rep.differs_at, (0..10).collect::<Vec<_>>());

        let never = PartialLibrary::new(vec![PartialGenerator::never()]);
        let t = StabilizingIndexTable::constant(&[0]);
        assert!(matches!(smoothed_bit(&t, &never, 0, 3, 50), Err(Error::CapExceeded { .. })));
        let (_, rep) = limit_smoothing(&t, &never, 0, 4, 50).unwrap();
        assert_eq!(rep.capped_at, vec![0, 1, 2, 3]);

        assert!(StabilizingIndexTable::new(vec![vec![(1, 0)]]).is_err());
        assert!(StabilizingIndexTable::new(vec![vec![(0, 0), (0, 1)]]).is_err());
    }

    #[test]
    fn smoothing_then_merging_recovers_target() {
        let k_max = 12;
        let len = block_range(k_max).end;
        let a = Generator::random(21, 1, 2).unwrap().evaluate_prefix(len);
        let planted = plant_family(&a, 5, k_max, 8).unwrap();
        // library: the planted members, then junk
        let mut entries: Vec<PartialGenerator> = planted
            .family
            .members()
            .iter()
            .map(|m| PartialGenerator::new(Generator::table(m.clone()), None, DelayRule::Constant(2)))
            .collect();
        let junk = entries.len();
        entries.push(PartialGenerator::total(Generator::random(99, 1, 2).unwrap()));
        let lib = PartialLibrary::new(entries);
        let table = StabilizingIndexTable::new(
            (0..=5).map(|e| vec![(0, junk), (50 + 10 * e as u64, e)]).collect(),
        )
        .unwrap();
        let smoothed: Vec<BitPrefix> = (0..=5)
            .map(|e| {
                let (g, rep) = limit_smoothing(&table, &lib, e, len, DEFAULT_SMOOTHING_CAP).unwrap();
                assert!(rep.differs_at.iter().all(|&n| n < 100));
                g.evaluate_prefix(len)
            })
            .collect();
        let merged = miller_merge(&WitnessFamily::from_prefixes(smoothed).unwrap(), k_max).unwrap();
        let errs = block_errors(&a, &merged.merged, k_max).unwrap();
        for n in 0..=5 {
            // smoothing only changes the first 100 positions, inside blocks 0..=6
            for k in planted.merge_k0(n).max(7)..=k_max {
                assert!(errs.d(k) < merge_bound(n), "n={n} k={k}");
            }
        }
    }

    proptest! {
        #[test]
        fn merged_blocks_come_from_allowed_members(seed in any::<u64>(), m in 0usize..6) {
            let gens: Vec<_> = (0..=m as u64).map(|i| Generator::random(seed ^ i, 1, 2 + i).unwrap()).collect();
            let fam = WitnessFamily::from_generators(&gens, 8).unwrap();
            let r = miller_merge(&fam, 8).unwrap();
            for k in 0..=8u32 {
                let n = r.chosen[k as usize];
                prop_assert!(n <= m.min(k as usize));
                prop_assert!(trusted(&fam, n, k).unwrap());
                for i in block_range(k) {
                    prop_assert_eq!(r.merged.get(i), fam.member(n).get(i));
                }
            }
        }

        #[test]
        fn closeness_to_target_implies_trust(seed in any::<u64>(), n in 1usize..6, k in 6u32..10) {
            // members within 2^(1-m) of A on I_k are trusted there
            let len = block_range(k).end;
            let a = Generator::random(seed, 1, 2).unwrap().evaluate_prefix(len);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = block_range(k);
            let members: Vec<BitPrefix> = (0..=n).map(|m| {
                let mut c = a.clone();
                let cap = (1usize << (k as i64 + 1 - m as i64).max(0)).saturating_sub(1).min(r.len());
                let flips = rng.gen_range(0..=cap);
                for off in sample(&mut rng, r.len(), flips) {
                    c.set(r.start + off, !a.get(r.start + off));
                }
                c
            }).collect();
            let fam = WitnessFamily::from_prefixes(members).unwrap();
            prop_assert!(trusted(&fam, n, k).unwrap());
        }
    }
}
