//! Diagonalization against a finite opponent library, and the extremal and
//! non-extremal set assemblies built on top of it.

use serde::{Deserialize, Serialize};

use crate::bitseq::{pointwise, BitPrefix, Formula, Generator, GeneratorLibrary, SetOp};
use crate::codings::{binary_expansion_set, rn_index, slice_decomposition, SliceDecomposition};
use crate::error::{invalid, Error, Result};
use crate::ratio::{self, frac, Density};

/// Beat opponent `opponent` with agreement density below `threshold` at some
/// length `>= witness_len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefeatTarget {
    pub opponent: usize,
    #[serde(with = "ratio::serde_str")]
    pub threshold: Density,
    pub witness_len: usize,
}

/// `Z ↾ length` agrees with the opponent on `agreements` positions, and
/// `agreements / length < threshold`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub opponent: usize,
    #[serde(with = "ratio::serde_str")]
    pub threshold: Density,
    pub length: usize,
    pub agreements: usize,
}

/// `Z ↾ [start, end)` is the complement of `opponent` there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub opponent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefeatSchedule {
    pub horizon: usize,
    /// Targets in turn order.
    pub targets: Vec<DefeatTarget>,
    pub segments: Vec<Segment>,
    pub certificates: Vec<Certificate>,
    /// Targets with no certificate at all.
    pub uncovered: Vec<DefeatTarget>,
    /// Completed passes over the target list.
    pub rounds: usize,
}

impl DefeatSchedule {
    pub fn certificates_for(&self, opponent: usize) -> impl Iterator<Item = &Certificate> {
        self.certificates.iter().filter(move |c| c.opponent == opponent)
    }
}

fn below(count: usize, len: usize, t: Density) -> bool {
    (count as u128) * (*t.denom() as u128) < (len as u128) * (*t.numer() as u128)
}

/// Turn-order rank of a threshold: `n` for `1/n`, else `ceil(1/t)`.
fn rank(t: Density) -> u64 {
    t.denom().div_ceil(*t.numer())
}

/// Extends `Z` turn by turn. Each turn targets one `(opponent, threshold)`
/// pair, ordered by `(rank + opponent, opponent)`, and appends the
/// complement of that opponent, at least one bit, until `Z ↾ L` has length at
/// least `witness_len` and agreement density below the threshold. Turns cycle
/// through the list until `Z` reaches `horizon`.
pub fn weak_generic_defeat(
    opponents: &GeneratorLibrary,
    thresholds: &[Density],
    witness_len: usize,
    horizon: usize,
) -> Result<(BitPrefix, DefeatSchedule)> {
    if opponents.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if thresholds.is_empty() {
        return Err(invalid("no thresholds"));
    }
    if let Some(t) = thresholds.iter().find(|t| **t == frac(0, 1) || **t > frac(1, 1)) {
        return Err(invalid(format!("threshold {t} outside (0, 1]")));
    }
    let mut targets: Vec<DefeatTarget> = (0..opponents.len())
        .flat_map(|e| {
            thresholds.iter().map(move |&t| DefeatTarget {
                opponent: e,
                threshold: t,
                witness_len,
            })
        })
        .collect();
    targets.sort_by_key(|t| (rank(t.threshold) + t.opponent as u64, t.opponent, rank(t.threshold)));
    targets.dedup();

    let opp: Vec<BitPrefix> = opponents.iter().map(|g| g.evaluate_prefix(horizon)).collect();
    let mut z = BitPrefix::zeros(0);
    let mut agree = vec![0usize; opp.len()];
    let mut segments = Vec::new();
    let mut certificates = Vec::new();
    let mut rounds = 0;
    'outer: while z.len() < horizon {
        for t in &targets {
            let start = z.len();
            let e = t.opponent;
            loop {
                if z.len() == horizon {
                    if z.len() > start {
                        segments.push(Segment { start, end: z.len(), opponent: e });
                    }
                    break 'outer;
                }
                let i = z.len();
                let bit = !opp[e].get(i);
                z.push(bit);
                for (a, o) in agree.iter_mut().zip(&opp) {
                    *a += (o.get(i) == bit) as usize;
                }
                let l = z.len();
                if l >= t.witness_len && below(agree[e], l, t.threshold) {
                    break;
                }
            }
            segments.push(Segment { start, end: z.len(), opponent: e });
            certificates.push(Certificate {
                opponent: e,
                threshold: t.threshold,
                length: z.len(),
                agreements: agree[e],
            });
        }
        rounds += 1;
    }
    let uncovered = targets
        .iter()
        .filter(|t| {
            !certificates
                .iter()
                .any(|c| c.opponent == t.opponent && c.threshold == t.threshold)
        })
        .cloned()
        .collect();
    Ok((
        z,
        DefeatSchedule {
            horizon,
            targets,
            segments,
            certificates,
            uncovered,
            rounds,
        },
    ))
}

/// Outcome of re-checking one certificate from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub certificate: Certificate,
    pub recomputed_agreements: usize,
    #[serde(with = "ratio::serde_str")]
    pub density: Density,
    pub holds: bool,
}

pub fn verify_certificates(
    z: &BitPrefix,
    opponents: &GeneratorLibrary,
    schedule: &DefeatSchedule,
) -> Result<Vec<CertificateCheck>> {
    schedule
        .certificates
        .iter()
        .map(|c| {
            let g = opponents
                .get(c.opponent)
                .ok_or_else(|| invalid(format!("no opponent {}", c.opponent)))?;
            let zl = z.truncated(c.length)?;
            let agreements = pointwise(SetOp::SymAgree, &zl, &g.evaluate_prefix(c.length))?.count_ones();
            let density = frac(agreements as u64, c.length as u64);
            Ok(CertificateCheck {
                certificate: c.clone(),
                recomputed_agreements: agreements,
                density,
                holds: agreements == c.agreements && density < c.threshold,
            })
        })
        .collect()
}

/// `A = A_1 ∪ Z`.
pub fn extremal_compose(a1: &BitPrefix, z: &BitPrefix) -> Result<BitPrefix> {
    pointwise(SetOp::Union, a1, z)
}

/// Slices of `r`'s non-terminating expansion that meet `[0, len)`.
pub fn slices_for(r: Density, len: usize) -> Result<SliceDecomposition> {
    let bits = (usize::BITS - len.max(2).leading_zeros()) as usize + 1;
    slice_decomposition(&binary_expansion_set(r, bits)?)
}

/// First `n` slice indices `c_0 < ... < c_{n-1}` of `r`'s expansion.
pub fn slice_indices(r: Density, n: usize) -> Result<Vec<u32>> {
    let mut bits = 64;
    loop {
        let c: Vec<u32> = binary_expansion_set(r, bits)?.positions().map(|i| i as u32).collect();
        if c.len() >= n {
            return Ok(c[..n].to_vec());
        }
        bits *= 2;
    }
}

/// `A = (S̄ ∩ Z) ∪ ⋃_e (S_e ∩ C̄_e)` on `[0, len)`, where `S = R(B)` for the
/// expansion set `B` of `r`. Slices past the library are left out of `A`.
pub fn non_extremal_build(
    r: Density,
    lib: &GeneratorLibrary,
    z: &BitPrefix,
    len: usize,
) -> Result<BitPrefix> {
    if z.len() < len {
        return Err(Error::PrefixTooShort {
            needed: len,
            available: z.len(),
        });
    }
    let slices = slices_for(r, len)?;
    let opp: Vec<BitPrefix> = lib.iter().take(slices.len()).map(|g| g.evaluate_prefix(len)).collect();
    Ok(BitPrefix::from_fn(len, |x| {
        let in_s = rn_index(x as u64).is_some_and(|n| slices.expansion.try_get(n as usize) == Some(true));
        if !in_s {
            return z.get(x);
        }
        match slices.slice_of(x as u64) {
            Some(e) if e < opp.len() => !opp[e].get(x),
            _ => false,
        }
    }))
}

/// `C = ⋃_{e < n} (S_e ∩ C̄_e)`, which agrees with the non-extremal set on
/// the first `n` slices.
pub fn witness_q_description(r: Density, lib: &GeneratorLibrary, n: usize) -> Result<Generator> {
    if n > lib.len() {
        return Err(invalid(format!("witness uses {n} slices but the library has {}", lib.len())));
    }
    if n == 0 {
        return Ok(Generator::zeros());
    }
    let c = slice_indices(r, n)?;
    Ok(Generator::union(
        c.iter()
            .zip(lib.iter())
            .map(|(&ce, g)| Generator::intersect(vec![Generator::rn(ce), Generator::complement(g.clone())]))
            .collect(),
    ))
}

/// `Σ_{e < n} 2^-(c_e + 1)`, the density of the first `n` slices.
pub fn slice_union_density(r: Density, n: usize) -> Result<Density> {
    Ok(slice_indices(r, n)?
        .iter()
        .map(|&c| if c < 63 { ratio::pow2_inv(c + 1) } else { frac(0, 1) })
        .sum())
}

/// Least `n` whose first `n` slices have density at least `q`, if within `max_n`.
pub fn slices_needed(r: Density, q: Density, max_n: usize) -> Result<Option<usize>> {
    for n in 0..=max_n {
        if slice_union_density(r, n)? >= q {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// `⋃_{e < n} S_e` as a generator.
pub fn slice_union(r: Density, n: usize) -> Result<Generator> {
    Ok(if n == 0 {
        Generator::zeros()
    } else {
        Generator::Formula(Formula::RCode(slice_indices(r, n)?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{density_profile, estimate_liminf_limsup, gamma_hat};
    use proptest::prelude::*;

    fn lib(gs: Vec<Generator>) -> GeneratorLibrary {
        GeneratorLibrary::new(gs)
    }

    #[test]
    fn defeat_against_zeros() {
        let (z, s) = weak_generic_defeat(&lib(vec![Generator::zeros()]), &[frac(1, 4)], 1, 16).unwrap();
        assert_eq!(z, BitPrefix::ones(16));
        assert_eq!(s.certificates[0].length, 1);
        assert_eq!(s.certificates[0].agreements, 0);
        assert!(s.uncovered.is_empty());
    }

    #[test]
    fn defeat_two_opponents() {
        let opp = lib(vec![Generator::zeros(), Generator::ones()]);
        let (z, s) = weak_generic_defeat(&opp, &[frac(1, 2), frac(1, 4)], 1, 4096).unwrap();
        assert_eq!(z.len(), 4096);
        assert!(s.uncovered.is_empty());
        assert!(s.rounds >= 1);
        // turn order by (n + e, e)
        let order: Vec<_> = s.targets.iter().map(|t| (t.opponent, t.threshold)).collect();
        assert_eq!(
            order,
            vec![(0, frac(1, 2)), (1, frac(1, 2)), (0, frac(1, 4)), (1, frac(1, 4))]
        );
        // segments tile the prefix and alternate opponents
        assert_eq!(s.segments[0].start, 0);
        for w in s.segments.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert_eq!(s.segments.last().unwrap().end, 4096);
        for seg in &s.segments {
            for i in seg.start..seg.end {
                assert_eq!(z.get(i), !opp[seg.opponent].bit(i as u64));
            }
        }
        assert!(verify_certificates(&z, &opp, &s).unwrap().iter().all(|c| c.holds));
    }

    #[test]
    fn defeat_reports_uncovered_targets() {
        let opp = lib(vec![Generator::zeros(), Generator::ones()]);
        let (_, s) = weak_generic_defeat(&opp, &[frac(1, 16)], 1, 10).unwrap();
        assert_eq!(s.certificates.len(), 1);
        assert_eq!(s.uncovered.len(), 1);
        assert_eq!(s.uncovered[0].opponent, 1);
        assert!(weak_generic_defeat(&opp, &[frac(0, 1)], 1, 10).is_err());
        assert!(weak_generic_defeat(&GeneratorLibrary::default(), &[frac(1, 2)], 1, 10).is_err());
    }

    #[test]
    fn witness_length_is_respected() {
        let opp = lib(vec![Generator::zeros()]);
        let (_, s) = weak_generic_defeat(&opp, &[frac(1, 2)], 100, 1000).unwrap();
        assert!(s.certificates.iter().all(|c| c.length >= 100));
    }

    #[test]
    fn tampered_certificate_fails() {
        let opp = lib(vec![Generator::evens(), Generator::random(4, 1, 2).unwrap()]);
        let (mut z, s) = weak_generic_defeat(&opp, &[frac(1, 3)], 1, 2000).unwrap();
        let c = &s.certificates[0];
        for i in 0..c.length {
            z.set(i, opp[0].bit(i as u64));
        }
        assert!(!verify_certificates(&z, &opp, &s).unwrap()[0].holds);
    }

    #[test]
    fn extremal_examples() {
        let evens = Generator::evens().evaluate_prefix(512);
        assert_eq!(extremal_compose(&evens, &BitPrefix::zeros(512)).unwrap(), evens);
        let opp = lib(vec![Generator::zeros(), Generator::random(2, 1, 2).unwrap()]);
        let (z, _) = weak_generic_defeat(&opp, &[frac(1, 4)], 1, 512).unwrap();
        let a = extremal_compose(&evens, &z).unwrap();
        let pa = density_profile(&a).unwrap();
        let pe = density_profile(&evens).unwrap();
        for n in 1..=512 {
            assert!(pa.rho(n) >= pe.rho(n));
        }
        let gh = gamma_hat(&a, &lib(vec![Generator::ones()]), 256).unwrap();
        let est = estimate_liminf_limsup(&pe, 256).unwrap();
        assert!(gh.value >= est.liminf_est);
        assert!(extremal_compose(&evens, &BitPrefix::zeros(3)).is_err());
    }

    #[test]
    fn non_extremal_examples() {
        let half = frac(1, 2);
        let a = non_extremal_build(half, &lib(vec![Generator::zeros()]), &BitPrefix::zeros(4096), 4096).unwrap();
        assert_eq!(a, Generator::rn(1).evaluate_prefix(4096));

        let ones = lib(vec![Generator::ones()]);
        let z = Generator::random(3, 1, 2).unwrap().evaluate_prefix(4096);
        let a = non_extremal_build(half, &ones, &z, 4096).unwrap();
        assert!(a.positions().all(|x| !crate::codings::rn_membership(1, x as u64)));
        assert!(non_extremal_build(half, &ones, &z, 5000).is_err());
        assert!(non_extremal_build(frac(0, 1), &ones, &z, 100).is_err());
    }

    #[test]
    fn non_extremal_slices_are_complements() {
        let r = frac(5, 7);
        let l = lib((0..6).map(|s| Generator::random(s, 1, 2 + s).unwrap()).collect());
        let len = 1 << 13;
        let z = Generator::random(77, 1, 2).unwrap().evaluate_prefix(len);
        let a = non_extremal_build(r, &l, &z, len).unwrap();
        let slices = slices_for(r, len).unwrap();
        for x in 0..len {
            match slices.slice_of(x as u64) {
                Some(e) if e < l.len() => assert_eq!(a.get(x), !l[e].bit(x as u64)),
                Some(_) => assert!(!a.get(x)),
                None => {
                    if slices.union_generator().bit(x as u64) {
                        unreachable!()
                    }
                    assert_eq!(a.get(x), z.get(x));
                }
            }
        }
        // the witness agrees with A on the first n slices
        for n in 0..=l.len() {
            let w = witness_q_description(r, &l, n).unwrap().evaluate_prefix(len);
            let u = slice_union(r, n).unwrap().evaluate_prefix(len);
            for x in u.positions() {
                assert_eq!(w.get(x), a.get(x));
            }
        }
        assert!(witness_q_description(r, &l, 7).is_err());
    }

    #[test]
    fn witness_examples() {
        let zl = lib(vec![Generator::zeros()]);
        assert_eq!(witness_q_description(frac(1, 2), &zl, 0).unwrap(), Generator::zeros());
        let w = witness_q_description(frac(1, 2), &zl, 1).unwrap();
        assert_eq!(w.evaluate_prefix(1000), Generator::rn(1).evaluate_prefix(1000));
        assert_eq!(slice_union_density(frac(1, 2), 1).unwrap(), frac(1, 4));
        assert_eq!(slice_union_density(frac(1, 2), 3).unwrap(), frac(7, 16));
        assert_eq!(slices_needed(frac(1, 2), frac(2, 5), 8).unwrap(), Some(3));
        assert_eq!(slices_needed(frac(1, 2), frac(1, 2), 20).unwrap(), None);
    }

    proptest! {
        #[test]
        fn certificates_always_reverify(seed in any::<u64>(), k in 1usize..4, den in 2u64..6) {
            let opp = lib((0..k as u64).map(|i| Generator::random(seed ^ i, 1 + i % 2, 3).unwrap()).collect());
            let (z, s) = weak_generic_defeat(&opp, &[frac(1, den)], 4, 3000).unwrap();
            prop_assert!(verify_certificates(&z, &opp, &s).unwrap().iter().all(|c| c.holds));
        }

        #[test]
        fn defeat_is_prefix_monotone(seed in any::<u64>(), n1 in 10usize..500, extra in 1usize..500) {
            let opp = lib(vec![Generator::random(seed, 1, 2).unwrap(), Generator::evens()]);
            let (z1, _) = weak_generic_defeat(&opp, &[frac(1, 3)], 1, n1).unwrap();
            let (z2, _) = weak_generic_defeat(&opp, &[frac(1, 3)], 1, n1 + extra).unwrap();
            prop_assert_eq!(z2.truncated(n1).unwrap(), z1);
        }
    }
}
