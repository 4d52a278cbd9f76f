//! The density-1/2 construction under the "x = s or a change at or below x"
//! permitting variant. Each requirement `(e, i)` works on `R_{⟨e,i⟩}`: it
//! fills alternate elements, and whenever the jump probe for `i` converges it
//! restrains a fresh interval, waits for `Φ_e` to converge on it, then waits
//! for the permitting set to change below the probe's use and spends that
//! permission making `A` disagree with `Φ_e` on half of the interval.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::enumeration::Enumeration;
use super::intervals::{pair, IntervalRecord, IntervalStatus};
use super::trace::{Action, EntryCause, Search, Trace};
use super::{ConstructionKind, GTable, StageState};
use crate::bitseq::PartialLibrary;
use crate::error::{invalid, Result};

/// Stand-in for `Φ_i(C; i)`: a computation with a fixed use that converges
/// `delay` stages after the last change of `C` below the use, and only at
/// stages beyond the use. `delay = None` never converges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpProbe {
    pub use_bound: u64,
    pub delay: Option<u64>,
}

impl JumpProbe {
    pub fn new(use_bound: u64, delay: u64) -> Self {
        JumpProbe {
            use_bound,
            delay: Some(delay),
        }
    }

    pub fn never() -> Self {
        JumpProbe {
            use_bound: 0,
            delay: None,
        }
    }

    /// Converges at stage `s` when the last change below the use was at `last_change`.
    pub fn converges(&self, s: u64, last_change: u64) -> bool {
        self.delay.is_some_and(|d| s >= last_change + d) && s > self.use_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlowConfig {
    pub stages: u64,
    /// Stages any single search may run before it is abandoned.
    pub search_cap: u64,
    /// Largest element an interval may contain. Each interval starts above
    /// the previous one and is at least as long as everything below it in
    /// `R_n`, so sizes roughly double per cycle.
    #[serde(default = "default_interval_cap")]
    pub interval_cap: u64,
}

impl NonlowConfig {
    pub fn new(stages: u64, search_cap: u64) -> Self {
        NonlowConfig {
            stages,
            search_cap,
            interval_cap: DEFAULT_INTERVAL_CAP,
        }
    }
}

fn default_interval_cap() -> u64 {
    DEFAULT_INTERVAL_CAP
}

pub const DEFAULT_INTERVAL_CAP: u64 = 1 << 22;

/// `r_{n,k}`, the `k`-th element of `R_n`.
pub fn r_elem(n: u32, k: u64) -> u64 {
    (2 * k + 1) << n
}

/// Index of `x` within `R_{tz(x)}`, for `x >= 1`.
pub fn r_index(x: u64) -> u64 {
    ((x >> x.trailing_zeros()) - 1) / 2
}

/// The interval `{r_{n,2j}, ..., r_{n,2k+1}}` with `j` least such that
/// `r_{n,2j} > s0` and `k` least with `ρ_m(I) >= ρ_m(R_n)/2` at
/// `m = r_{n,2k+1} + 1`; that is `k = max(j, 2j - 1)`.
pub fn select_interval(n: u32, s0: u64) -> Vec<u64> {
    select_interval_capped(n, s0, u64::MAX).expect("interval fits in u64")
}

/// [`select_interval`], or `None` when the interval would pass `cap`.
pub fn select_interval_capped(n: u32, s0: u64, cap: u64) -> Option<Vec<u64>> {
    // r_{n,2j} = 2^n (4j + 1) > s0
    let j = (s0 >> n) / 4;
    let j = (j..=j + 1).find(|&j| r_elem(n, 2 * j) > s0)?;
    let k = j.max((2 * j).saturating_sub(1));
    // r_{n,2k+1} = 2^n (4k + 3)
    let max = (4 * k as u128 + 3) << n;
    if max > cap as u128 {
        return None;
    }
    Some((2 * j..=2 * k + 1).map(|t| r_elem(n, t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Seeking { since: u64 },
    /// `ready` is the first budget at which `Φ_e` converges on the whole interval.
    AwaitingComputation { interval: usize, use_bound: u64, since: u64, ready: Option<u64> },
    AwaitingPermission { interval: usize, use_bound: u64, since: u64 },
    /// A search hit its cap; `g` keeps the value of the abandoned phase.
    Exhausted { g: u8 },
}

struct Module {
    e: usize,
    i: usize,
    phase: Phase,
    g: u8,
    /// Max of the last chosen interval; the next one starts above it so it
    /// never meets elements a cancellation already put into `A`.
    floor: u64,
}

pub fn run_nonlow_construction(
    c: &Enumeration,
    probes: &[JumpProbe],
    lib: &PartialLibrary,
    cfg: &NonlowConfig,
) -> Result<StageState> {
    let mut modules: Vec<Module> = (0..lib.len())
        .flat_map(|e| (0..probes.len()).map(move |i| (e, i)))
        .map(|(e, i)| Module {
            e,
            i,
            phase: Phase::Seeking { since: 0 },
            g: 0,
            floor: 0,
        })
        .collect();
    modules.sort_by_key(|m| pair(m.e, m.i));
    if let Some(m) = modules.iter().find(|m| pair(m.e, m.i) >= 64) {
        return Err(invalid(format!(
            "requirement ({}, {}) pairs to {}, past the last nonempty R_n",
            m.e,
            m.i,
            pair(m.e, m.i)
        )));
    }

    let mut a = Enumeration::from_additions(vec![Vec::new()])?;
    let mut in_a: HashSet<u64> = HashSet::new();
    // elements of pending or successful intervals; alternate filling skips them
    let mut blocked: HashSet<u64> = HashSet::new();
    let mut intervals: Vec<IntervalRecord> = Vec::new();
    let mut trace = Trace::default();
    let mut g = GTable::new(modules.iter().map(|m| (m.e, m.i)).collect(), cfg.stages);
    let mut last_change = vec![0u64; probes.len()];
    let mut cap_limited = false;

    for s in 1..=cfg.stages {
        let c_min = c.min_entered_at(s);
        for (p, t) in probes.iter().zip(last_change.iter_mut()) {
            if c_min.is_some_and(|y| y < p.use_bound) {
                *t = s;
            }
        }
        let changed_below = |u: u64| c_min.is_some_and(|y| y < u);
        let mut entering: Vec<u64> = Vec::new();

        for (slot, m) in modules.iter_mut().enumerate() {
            let req = Some((m.e, m.i));
            let n = pair(m.e, m.i) as u32;
            let phi = &lib[m.e];
            loop {
                match m.phase {
                    Phase::Seeking { since } => {
                        if probes[m.i].converges(s, last_change[m.i]) {
                            let use_bound = probes[m.i].use_bound;
                            let Some(elements) = select_interval_capped(n, s.max(m.floor), cfg.interval_cap) else {
                                trace.push(s, req, Action::CapHit { search: Search::Interval });
                                cap_limited = true;
                                m.phase = Phase::Exhausted { g: 0 };
                                break;
                            };
                            m.floor = *elements.last().unwrap();
                            let ready = elements
                                .iter()
                                .map(|&x| phi.convergence_budget(x))
                                .try_fold(0u64, |acc, t| t.map(|t| acc.max(t)));
                            blocked.extend(elements.iter().copied());
                            trace.push(s, req, Action::ProbeConverged { use_bound });
                            trace.push(
                                s,
                                req,
                                Action::IntervalChosen {
                                    interval: intervals.len(),
                                    min: elements[0],
                                    max: *elements.last().unwrap(),
                                    size: elements.len(),
                                },
                            );
                            intervals.push(IntervalRecord {
                                e: m.e,
                                i: m.i,
                                elements,
                                status: IntervalStatus::Pending,
                                declared_at: None,
                                chosen_at: Some(s),
                                use_bound: Some(use_bound),
                            });
                            m.phase = Phase::AwaitingComputation {
                                interval: intervals.len() - 1,
                                use_bound,
                                since: s,
                                ready,
                            };
                        } else if s - since > cfg.search_cap {
                            trace.push(s, req, Action::CapHit { search: Search::Probe });
                            cap_limited = true;
                            m.phase = Phase::Exhausted { g: 0 };
                        }
                        break;
                    }
                    Phase::AwaitingComputation { interval, use_bound, since, ready } => {
                        if s == since {
                            break;
                        }
                        if changed_below(use_bound) {
                            let rec = &mut intervals[interval];
                            rec.status = IntervalStatus::Cancelled;
                            rec.declared_at = Some(s);
                            for x in &rec.elements {
                                blocked.remove(x);
                            }
                            let evens: Vec<u64> = rec
                                .elements
                                .chunks(2)
                                .map(|p| p[0])
                                .filter(|x| !in_a.contains(x))
                                .collect();
                            trace.push(s, req, Action::Cancelled { interval, trigger: c_min.unwrap() });
                            trace.push(s, req, Action::Released { interval });
                            if !evens.is_empty() {
                                in_a.extend(evens.iter().copied());
                                trace.push(s, req, Action::Enter { elements: evens.clone(), cause: EntryCause::Cancel });
                                entering.extend(evens);
                            }
                            m.phase = Phase::Seeking { since: s };
                            continue;
                        }
                        if ready.is_some_and(|t| s >= t) {
                            trace.push(s, req, Action::ComputationConverged { interval });
                            m.phase = Phase::AwaitingPermission { interval, use_bound, since: s };
                        } else if s - since > cfg.search_cap {
                            trace.push(s, req, Action::CapHit { search: Search::Computation });
                            cap_limited = true;
                            m.phase = Phase::Exhausted { g: 0 };
                        }
                        break;
                    }
                    Phase::AwaitingPermission { interval, use_bound, since } => {
                        if s == since {
                            break;
                        }
                        if changed_below(use_bound) {
                            let rec = &mut intervals[interval];
                            rec.status = IntervalStatus::Successful;
                            rec.declared_at = Some(s);
                            trace.push(s, req, Action::Successful { interval, trigger: c_min.unwrap() });
                            trace.push(s, req, Action::Released { interval });
                            let mut chosen = Vec::with_capacity(rec.elements.len() / 2);
                            for p in rec.elements.chunks(2) {
                                let (ev, od) = (p[0], p[1]);
                                let fe = phi.evaluate_budgeted(ev, s).value().unwrap();
                                let fo = phi.evaluate_budgeted(od, s).value().unwrap();
                                let pick = if fe && !fo { od } else { ev };
                                if fe == fo {
                                    trace.push(s, req, Action::PairChoice { even: ev, odd: od, chose: pick });
                                }
                                chosen.push(pick);
                            }
                            in_a.extend(chosen.iter().copied());
                            trace.push(s, req, Action::Enter { elements: chosen.clone(), cause: EntryCause::Success });
                            entering.extend(chosen);
                            m.phase = Phase::Seeking { since: s };
                            continue;
                        }
                        if s - since > cfg.search_cap {
                            trace.push(s, req, Action::CapHit { search: Search::Permission });
                            cap_limited = true;
                            m.phase = Phase::Exhausted { g: 1 };
                        }
                        break;
                    }
                    Phase::Exhausted { .. } => break,
                }
            }
            let new_g = match m.phase {
                Phase::AwaitingPermission { .. } => 1,
                Phase::Exhausted { g } => g,
                _ => 0,
            };
            if new_g != m.g {
                trace.push(s, req, Action::GChange { value: new_g });
                m.g = new_g;
            }
            g.set(slot, s, m.g);
        }

        // alternate filling: s enters when it is an even-indexed element of its R_n
        if r_index(s).is_multiple_of(2) && !blocked.contains(&s) && !in_a.contains(&s) {
            in_a.insert(s);
            trace.push(s, None, Action::Enter { elements: vec![s], cause: EntryCause::Alternate });
            entering.push(s);
        }
        a.push_stage(entering)?;
    }

    let restraints = intervals
        .iter()
        .filter(|r| r.status == IntervalStatus::Pending)
        .flat_map(|r| r.elements.iter().copied())
        .collect();
    Ok(StageState {
        kind: ConstructionKind::Nonlow,
        stages: cfg.stages,
        a_enum: a,
        intervals,
        restraints,
        g,
        trace,
        cap_limited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitseq::{DelayRule, Generator, PartialGenerator};

    fn cfg(stages: u64) -> NonlowConfig {
        NonlowConfig {
            stages,
            search_cap: 1 << 20,
            interval_cap: DEFAULT_INTERVAL_CAP,
        }
    }

    #[test]
    fn r_helpers() {
        assert_eq!(r_elem(0, 0), 1);
        assert_eq!(r_elem(1, 2), 10);
        for x in 1..2000u64 {
            assert_eq!(r_elem(x.trailing_zeros(), r_index(x)), x);
        }
    }

    #[test]
    fn interval_selection_meets_half_density() {
        for n in 0..6u32 {
            for s0 in 0..500u64 {
                let iv = select_interval(n, s0);
                assert!(iv[0] > s0);
                assert_eq!(iv.len() % 2, 0);
                let j = r_index(iv[0]) / 2;
                assert!(j == 0 || r_elem(n, 2 * (j - 1)) <= s0, "j not minimal");
                let m = iv.last().unwrap() + 1;
                let rn = crate::codings::rn_count_below(n, m);
                assert!(2 * iv.len() as u64 >= rn);
                // one pair fewer would not do
                if iv.len() > 2 {
                    let m2 = iv[iv.len() - 3] + 1;
                    assert!(2 * (iv.len() as u64 - 2) < crate::codings::rn_count_below(n, m2));
                }
            }
        }
    }

    #[test]
    fn silent_probe_only_fills_alternately() {
        let lib: PartialLibrary = vec![Generator::zeros()].into();
        let st = run_nonlow_construction(&Enumeration::empty(100), &[JumpProbe::never()], &lib, &cfg(100)).unwrap();
        assert!(st.intervals.is_empty());
        assert!((0..=100).all(|s| st.g.get(0, 0, s) == Some(0)));
        let a = st.a_enum.final_prefix(101);
        for x in 1..=100u64 {
            assert_eq!(a.get(x as usize), r_index(x).is_multiple_of(2));
        }
    }

    #[test]
    fn one_full_cycle() {
        // probe converges at stage 3 with use 2; C gets 1 at stage 7
        let c = Enumeration::from_json(r#"{"7": [1]}"#).unwrap();
        let phi = PartialGenerator::new(Generator::zeros(), None, DelayRule::Constant(1));
        let lib = PartialLibrary::new(vec![phi]);
        let st = run_nonlow_construction(&c, &[JumpProbe::new(2, 0)], &lib, &cfg(20)).unwrap();
        let first = &st.intervals[0];
        assert_eq!(first.chosen_at, Some(3));
        assert_eq!(first.elements, vec![5, 7]);
        assert_eq!(first.status, IntervalStatus::Successful);
        assert_eq!(first.declared_at, Some(7));
        let g: Vec<u8> = (0..=8).map(|s| st.g.get(0, 0, s).unwrap()).collect();
        // the next interval {9, 11, 13, 15} is chosen at 7 and computed at 8
        assert_eq!(g, vec![0, 0, 0, 0, 1, 1, 1, 0, 1]);
        // Φ = 0 on both: the even element goes in
        assert!(st.a_enum.contains_at(5, 7) && !st.a_enum.contains_at(7, 20));
        // probe reconverges at stage 7 and a new interval is chosen above it
        assert_eq!(st.intervals[1].chosen_at, Some(7));
        assert!(st.intervals[1].min() > 7);
    }

    #[test]
    fn change_before_convergence_cancels() {
        let c = Enumeration::from_json(r#"{"5": [0]}"#).unwrap();
        let phi = PartialGenerator::new(Generator::zeros(), None, DelayRule::Constant(100));
        let lib = PartialLibrary::new(vec![phi]);
        let st = run_nonlow_construction(&c, &[JumpProbe::new(2, 0)], &lib, &cfg(20)).unwrap();
        assert_eq!(st.intervals[0].status, IntervalStatus::Cancelled);
        assert_eq!(st.intervals[0].declared_at, Some(5));
        for p in st.intervals[0].elements.chunks(2) {
            assert!(st.a_enum.contains_at(p[0], 5));
            assert!(!st.a_enum.contains_at(p[1], 20));
        }
        assert_eq!(st.intervals.last().unwrap().status, IntervalStatus::Pending);
        assert!(!st.restraints.is_empty());
    }

    #[test]
    fn cap_marks_the_run() {
        let lib = PartialLibrary::new(vec![PartialGenerator::never()]);
        let st = run_nonlow_construction(
            &Enumeration::empty(50),
            &[JumpProbe::new(1, 0)],
            &lib,
            &NonlowConfig { stages: 50, search_cap: 10, interval_cap: DEFAULT_INTERVAL_CAP },
        )
        .unwrap();
        assert!(st.cap_limited);
        assert!(st.trace.iter().any(|e| e.action == Action::CapHit { search: Search::Computation }));
    }

    #[test]
    fn interval_cap_stops_the_module() {
        // from stage 31 on, C changes below the use at every stage for a while,
        // so every interval is cancelled the stage after it is chosen
        let c = Enumeration::from_additions(
            (0..=200u64).map(|s| if (31..61).contains(&s) { vec![s - 31] } else { vec![] }).collect(),
        )
        .unwrap();
        let lib = PartialLibrary::new(vec![PartialGenerator::never()]);
        let st = run_nonlow_construction(&c, &[JumpProbe::new(30, 0)], &lib, &NonlowConfig { stages: 200, search_cap: 1000, interval_cap: 1 << 12 })
            .unwrap();
        assert!(st.cap_limited);
        assert!(st.intervals.iter().all(|r| r.max() <= 1 << 12));
        // sizes double: the maxima grow geometrically until the cap
        let maxima: Vec<u64> = st.intervals.iter().map(|r| r.max()).collect();
        assert!(maxima.windows(2).all(|w| w[1] >= 2 * w[0]), "{maxima:?}");
    }

    #[test]
    fn too_many_requirements_is_rejected() {
        let lib: PartialLibrary = (0..12).map(|_| PartialGenerator::never()).collect();
        assert!(run_nonlow_construction(&Enumeration::empty(5), &[JumpProbe::never(); 2], &lib, &cfg(5)).is_err());
    }
}
