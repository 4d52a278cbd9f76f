//! Randomized end-to-end runs of both constructions, checked by the verifiers.

use coarse_core::bitseq::{DelayRule, Generator, PartialGenerator, PartialLibrary};
use coarse_core::ratio::frac;
use coarse_core::stagecraft::{
    run_nonlow_construction, run_permitting_construction, verify_nonlow, verify_permitting, Enumeration,
    JumpProbe, NonlowConfig, PermittingConfig, Trace,
};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn partial(seed: u64, kind: u8) -> PartialGenerator {
    let values = Generator::random(seed, 1, 2).unwrap();
    match kind % 3 {
        0 => PartialGenerator::total(values),
        1 => PartialGenerator::new(values, None, DelayRule::Random { seed, max: 40 }),
        _ => PartialGenerator::new(values, Some(Generator::random(seed ^ 5, 7, 8).unwrap()), DelayRule::Constant(2)),
    }
}

fn library(seed: u64, size: usize) -> PartialLibrary {
    (0..size as u64).map(|k| partial(seed.wrapping_add(k), (seed >> k) as u8)).collect()
}

proptest! {
    #![proptest_config(Config { cases: 24, ..Config::default() })]

    #[test]
    fn permitting_runs_verify(seed in any::<u64>(), rate in 0.05f64..0.6, size in 1usize..4) {
        let lib = library(seed, size);
        let b = Enumeration::random(seed, 400, 80, rate);
        let cfg = PermittingConfig { r: frac(3, 8), intervals_per_requirement: 4, stages: 400, scan_cap: 1 << 22 };
        let (st, plan) = run_permitting_construction(&b, &lib, &cfg).unwrap();
        let report = verify_permitting(&st, &plan, &b, &lib);
        prop_assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn nonlow_runs_verify(seed in any::<u64>(), rate in 0.02f64..0.3, uses in prop::collection::vec((1u64..30, prop::option::of(0u64..12)), 1..4)) {
        let lib = library(seed, 3);
        let probes: Vec<JumpProbe> = uses.iter().map(|&(u, d)| JumpProbe { use_bound: u, delay: d }).collect();
        let c = Enumeration::random(seed ^ 0xabc, 600, 40, rate);
        let cfg = NonlowConfig { interval_cap: 1 << 16, ..NonlowConfig::new(600, 1 << 12) };
        let st = run_nonlow_construction(&c, &probes, &lib, &cfg).unwrap();
        let report = verify_nonlow(&st, &c, &lib);
        prop_assert!(report.passed(), "{:?}", report.violations);
        for b in &report.bounds {
            prop_assert!(b.half_of_interval && b.weak);
        }
    }
}

#[test]
fn trace_survives_jsonl() {
    let lib = library(17, 2);
    let c = Enumeration::random(4, 300, 20, 0.1);
    let st = run_nonlow_construction(&c, &[JumpProbe::new(5, 3), JumpProbe::new(9, 0)], &lib, &NonlowConfig::new(300, 1000)).unwrap();
    let mut buf = Vec::new();
    st.trace.write_jsonl(&mut buf).unwrap();
    let back = Trace::read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back, st.trace);
    assert!(!st.trace.is_empty());
}

#[test]
fn runs_are_deterministic() {
    let run = || {
        let lib = library(99, 3);
        let c = Enumeration::random(8, 500, 30, 0.1);
        let st = run_nonlow_construction(&c, &[JumpProbe::new(4, 2)], &lib, &NonlowConfig::new(500, 1000)).unwrap();
        let mut buf = Vec::new();
        st.trace.write_jsonl(&mut buf).unwrap();
        (buf, st.a_enum.to_json())
    };
    assert_eq!(run(), run());
}
