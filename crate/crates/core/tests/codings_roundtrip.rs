//! Cross-module properties: codes decode back, densities of codes match
//! their closed forms, and the spectrum map behaves as an affine shift.

use coarse_core::bitseq::{BitPrefix, Generator};
use coarse_core::codings::{interval_code, r_code, rn_count_below, spectrum_transform, MonotoneMap};
use coarse_core::decoders::{decode_prefix, required_code_len};
use coarse_core::density::{density_profile, estimate_liminf_limsup, prefix_density};
use coarse_core::ratio::frac;
use proptest::prelude::*;

proptest! {
    #[test]
    fn interval_code_decodes(bits in prop::collection::vec(any::<bool>(), 1..7)) {
        let a = BitPrefix::from_bools(&bits);
        let n_max = bits.len() as u32 - 1;
        let len = required_code_len(n_max).unwrap() as usize;
        let code = interval_code(&a, len).unwrap();
        let decoded = decode_prefix(&code, n_max).unwrap();
        for n in 1..=n_max as usize {
            prop_assert_eq!(decoded.get(n), a.get(n));
        }
    }

    #[test]
    fn r_code_density_is_sum_of_slices(bits in prop::collection::vec(any::<bool>(), 1..12)) {
        let a = BitPrefix::from_bools(&bits);
        let len = 1usize << bits.len();
        let code = r_code(&a, len).unwrap();
        let expect: u64 = a.positions().map(|n| rn_count_below(n as u32, len as u64)).sum();
        prop_assert_eq!(prefix_density(&code, len).unwrap(), frac(expect, len as u64));
    }
}

#[test]
fn spectrum_of_a_random_set_shifts_its_density() {
    let a = Generator::random(21, 1, 3).unwrap().evaluate_prefix(1 << 12);
    let b = spectrum_transform(&a, &MonotoneMap::affine(2, 0).unwrap(), &Generator::evens(), 1 << 13).unwrap();
    let ea = estimate_liminf_limsup(&density_profile(&a).unwrap(), 1 << 11).unwrap();
    let eb = estimate_liminf_limsup(&density_profile(&b).unwrap(), 1 << 12).unwrap();
    // B = h(A) ∪ complement of the range: density a/2 + 1/2
    assert!((eb.liminf_f64() - (ea.liminf_f64() / 2.0 + 0.5)).abs() < 0.02);
}
