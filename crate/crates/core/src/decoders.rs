//! Majority-vote decoding of factorial-interval codes, the partial-to-coarse
//! converter and r-description checks.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitseq::{pointwise, BitPrefix, Formula, Generator, Membership, PartialGenerator, SetOp};
use crate::codings::{factorial, factorial_interval};
use crate::density::{density_profile, estimate_liminf_limsup, DensityEstimate, DensityProfile};
use crate::error::{invalid, Error, Result};
use crate::ratio::{self, Density};

fn block_bounds(c: &BitPrefix, n: u32) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(invalid("factorial block 0 is empty"));
    }
    let r = factorial_interval(n).ok_or_else(|| invalid(format!("({n}+1)! overflows")))?;
    if r.end as usize > c.len() {
        return Err(Error::PrefixTooShort {
            needed: r.end as usize,
            available: c.len(),
        });
    }
    Ok((r.start as usize, r.end as usize))
}

/// 1 iff strictly more than half of `[n!, (n+1)!)` is set in `c`.
pub fn majority_vote_decode(c: &BitPrefix, n: u32) -> Result<bool> {
    let (lo, hi) = block_bounds(c, n)?;
    Ok(2 * c.count_ones_in(lo..hi) > hi - lo)
}

/// Bits `0..=n_max`, bit `n` decoded by majority over block `n`; bit 0 is 0.
pub fn decode_prefix(c: &BitPrefix, n_max: u32) -> Result<BitPrefix> {
    let mut out = BitPrefix::zeros(n_max as usize + 1);
    for n in 1..=n_max {
        out.set(n as usize, majority_vote_decode(c, n)?);
    }
    Ok(out)
}

/// Length a code must have to decode blocks `1..=n_max`.
pub fn required_code_len(n_max: u32) -> Option<u64> {
    factorial(n_max + 1)
}

/// One row of the per-block decode table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDecode {
    pub n: u32,
    pub start: usize,
    pub size: usize,
    pub ones: usize,
    pub decoded: bool,
    pub expected: Option<bool>,
    pub correct: Option<bool>,
}

pub fn block_table<M: Membership + ?Sized>(
    c: &BitPrefix,
    n_max: u32,
    expected: Option<&M>,
) -> Result<Vec<BlockDecode>> {
    (1..=n_max)
        .map(|n| {
            let (lo, hi) = block_bounds(c, n)?;
            let ones = c.count_ones_in(lo..hi);
            let decoded = 2 * ones > hi - lo;
            let expected = expected.and_then(|a| a.member(n as usize));
            Ok(BlockDecode {
                n,
                start: lo,
                size: hi - lo,
                ones,
                decoded,
                expected,
                correct: expected.map(|e| e == decoded),
            })
        })
        .collect()
}

/// Flips `flips(n, block_size)` distinct positions, chosen with a seeded
/// generator, in each block `1..=n_max`.
pub fn corrupt_blocks(
    c: &BitPrefix,
    n_max: u32,
    seed: u64,
    mut flips: impl FnMut(u32, usize) -> usize,
) -> Result<BitPrefix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = c.clone();
    for n in 1..=n_max {
        let (lo, hi) = block_bounds(c, n)?;
        let k = flips(n, hi - lo);
        if k > hi - lo {
            return Err(invalid(format!("cannot flip {k} bits of a block of {}", hi - lo)));
        }
        for i in sample(&mut rng, hi - lo, k) {
            out.set(lo + i, !c.get(lo + i));
        }
    }
    Ok(out)
}

/// Total generator that is 1 exactly where `phi` converges to 1 within
/// `budget` steps; divergence reads as 0.
pub fn partial_to_coarse(phi: &PartialGenerator, budget: u64) -> Generator {
    Generator::Formula(Formula::Coarsened {
        partial: Box::new(phi.clone()),
        budget,
    })
}

/// `phi`'s domain at `budget`, restricted to `[0, len)`.
pub fn budgeted_domain(phi: &PartialGenerator, budget: u64, len: usize) -> BitPrefix {
    BitPrefix::from_fn(len, |i| phi.evaluate_budgeted(i as u64, budget).value().is_some())
}

/// Outcome of testing `b` as an r-description of `a` over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionReport {
    #[serde(skip)]
    pub agreement_profile: Option<DensityProfile>,
    pub estimate: DensityEstimate,
    #[serde(with = "ratio::serde_str")]
    pub r: Density,
    pub verdict_at_r: bool,
}

pub fn check_r_description(
    a: &BitPrefix,
    b: &BitPrefix,
    r: Density,
    tail_start: usize,
) -> Result<DescriptionReport> {
    let profile = density_profile(&pointwise(SetOp::SymAgree, a, b)?)?;
    let estimate = estimate_liminf_limsup(&profile, tail_start)?;
    Ok(DescriptionReport {
        verdict_at_r: estimate.liminf_est >= r,
        agreement_profile: Some(profile),
        estimate,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codings::interval_code;
    use crate::ratio::frac;
    use proptest::prelude::*;

    fn p(s: &str) -> BitPrefix {
        s.parse().unwrap()
    }

    #[test]
    fn majority_examples() {
        let c = interval_code(&p("001"), 6).unwrap();
        assert!(majority_vote_decode(&c, 2).unwrap());
        let mut flipped = c.clone();
        flipped.set(3, false);
        assert!(majority_vote_decode(&flipped, 2).unwrap());
        let evens = Generator::evens().evaluate_prefix(24);
        assert_eq!(evens.count_ones_in(6..24), 9);
        assert!(!majority_vote_decode(&evens, 3).unwrap());
        assert!(majority_vote_decode(&evens, 4).is_err());
        assert!(majority_vote_decode(&evens, 0).is_err());
    }

    #[test]
    fn decode_round_trip_is_exhaustive_over_short_sets() {
        for mask in 0u32..64 {
            let a = BitPrefix::from_fn(6, |i| mask >> i & 1 == 1);
            let code = interval_code(&a, 720).unwrap();
            let d = decode_prefix(&code, 5).unwrap();
            for n in 1..=5 {
                assert_eq!(d.get(n), a.get(n), "mask {mask} block {n}");
            }
            assert!(!d.get(0));
        }
        assert_eq!(decode_prefix(&BitPrefix::zeros(720), 5).unwrap(), BitPrefix::zeros(6));
        assert!(decode_prefix(&BitPrefix::zeros(719), 5).is_err());
    }

    #[test]
    fn decode_survives_light_corruption() {
        for seed in 0..30 {
            let a = Generator::random(seed, 1, 2).unwrap().evaluate_prefix(7);
            let code = interval_code(&a, 5040).unwrap();
            // strictly fewer than a quarter of each block
            let bad = corrupt_blocks(&code, 6, seed, |_, size| (size - 1) / 4).unwrap();
            let d = decode_prefix(&bad, 6).unwrap();
            for n in 1..=6 {
                assert_eq!(d.get(n), a.get(n));
            }
        }
    }

    #[test]
    fn block_table_flags_a_flipped_block() {
        let a = p("0101010");
        let code = interval_code(&a, 5040).unwrap();
        let bad = corrupt_blocks(&code, 6, 9, |n, size| if n == 4 { size * 6 / 10 } else { 0 }).unwrap();
        let table = block_table(&bad, 6, Some(&a)).unwrap();
        for row in &table {
            assert_eq!(row.correct, Some(row.n != 4), "{row:?}");
        }
        assert!(corrupt_blocks(&code, 2, 0, |_, s| s + 1).is_err());
    }

    #[test]
    fn failed_block_bounds_agreement() {
        // a block that decodes wrongly caps agreement at (1 + 1/(n+1)) / 2
        for n in 1..=6u32 {
            for mask in 0u32..(1 << 7) {
                let a = BitPrefix::from_fn(7, |i| mask >> i & 1 == 1);
                let end = factorial(n + 1).unwrap() as usize;
                let code = interval_code(&a, end).unwrap();
                let size = factorial_interval(n).map(|r| r.end - r.start).unwrap() as usize;
                let c = corrupt_blocks(&code, n, mask as u64, |m, _| if m == n { size.div_ceil(2) } else { 0 }).unwrap();
                if majority_vote_decode(&c, n).unwrap() == a.get(n as usize) {
                    continue;
                }
                let agree = pointwise(SetOp::SymAgree, &c, &code).unwrap();
                let rho = frac(agree.count_ones() as u64, end as u64);
                assert!(rho <= (frac(1, 1) + frac(1, n as u64 + 1)) / 2);
            }
        }
    }

    #[test]
    fn partial_to_coarse_examples() {
        assert_eq!(
            partial_to_coarse(&PartialGenerator::never(), 100).evaluate_prefix(50),
            BitPrefix::zeros(50)
        );
        let a = Generator::random(3, 1, 2).unwrap();
        let phi = PartialGenerator::new(a.clone(), Some(Generator::evens()), Default::default());
        let c1 = partial_to_coarse(&phi, 0).evaluate_prefix(200);
        let ap = a.evaluate_prefix(200);
        for i in (0..200).step_by(2) {
            assert_eq!(c1.get(i), ap.get(i));
        }
    }

    #[test]
    fn description_examples() {
        let a = Generator::random(1, 1, 3).unwrap().evaluate_prefix(500);
        assert!(check_r_description(&a, &a, frac(1, 1), 10).unwrap().verdict_at_r);
        assert!(!check_r_description(&a, &a.complement(), frac(1, 1000), 10).unwrap().verdict_at_r);
        assert!(check_r_description(&a, &p("01"), frac(1, 2), 1).is_err());

        let coded = Generator::random(8, 1, 2).unwrap().evaluate_prefix(9);
        for n in 1..=6u32 {
            let end = factorial(n + 1).unwrap() as usize;
            let code = interval_code(&coded, end).unwrap();
            let evens = Generator::evens().evaluate_prefix(end);
            let r = frac(1, 2) - frac(1, n as u64 + 1);
            let tail = factorial(n).unwrap() as usize;
            assert!(check_r_description(&code, &evens, r, tail).unwrap().verdict_at_r);
        }
    }

    proptest! {
        #[test]
        fn coarsened_never_contradicts_phi(seed in any::<u64>(), dseed in any::<u64>(), budget in 0u64..20) {
            let phi = PartialGenerator::new(
                Generator::random(seed, 1, 2).unwrap(),
                Some(Generator::random(dseed, 2, 3).unwrap()),
                crate::DelayRule::Random { seed, max: 15 },
            );
            let c1 = partial_to_coarse(&phi, budget);
            for i in 0..300u64 {
                if let Some(v) = phi.evaluate_budgeted(i, budget).value() {
                    prop_assert_eq!(c1.bit(i), v);
                }
            }
        }

        #[test]
        fn agreement_dominates_domain(seed in any::<u64>(), budget in 0u64..20) {
            let values = Generator::random(seed, 1, 2).unwrap();
            let phi = PartialGenerator::new(values.clone(), None, crate::DelayRule::Random { seed, max: 20 });
            let len = 400;
            let c1 = partial_to_coarse(&phi, budget).evaluate_prefix(len);
            let agree = pointwise(SetOp::SymAgree, &values.evaluate_prefix(len), &c1).unwrap();
            let dom = budgeted_domain(&phi, budget, len);
            let ea = estimate_liminf_limsup(&density_profile(&agree).unwrap(), len / 2).unwrap();
            let ed = estimate_liminf_limsup(&density_profile(&dom).unwrap(), len / 2).unwrap();
            prop_assert!(ea.liminf_est >= ed.liminf_est);
        }
    }
}
