//! Post-hoc checks of finished construction runs against their traces.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::enumeration::Enumeration;
use super::intervals::{check_interval_conditions, pair, IntervalPlan, IntervalRecord, IntervalStatus};
use super::nonlow::{r_elem, r_index};
use super::trace::Action;
use super::{ConstructionKind, GTable, StageState};
use crate::bitseq::{pointwise, BitPrefix, PartialLibrary, SetOp};
use crate::codings::rn_count_below;
use crate::ratio::{self, Density};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Soundness,
    Restraint,
    IntervalCondition,
    Disagreement,
    Bound,
    HalfDensity,
    GReplay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub check: Check,
    pub stage: Option<u64>,
    pub detail: String,
}

fn violation(check: Check, stage: Option<u64>, detail: String) -> Violation {
    Violation { check, stage, detail }
}

/// Every `x` entering `A` at stage `t` is permitted: some `y <= x` enters the
/// permitting set at `t`, or (nonlow variant only) `x = t`.
pub fn verify_permitting_soundness(state: &StageState, permit: &Enumeration) -> Vec<Violation> {
    let mut out = Vec::new();
    for t in 0..=state.a_enum.horizon() {
        let y = permit.min_entered_at(t);
        for &x in state.a_enum.entered_at(t) {
            let by_change = y.is_some_and(|y| y <= x);
            let by_stage = state.kind == ConstructionKind::Nonlow && x == t;
            if !(by_change || by_stage) {
                out.push(violation(
                    Check::Soundness,
                    Some(t),
                    format!("{x} entered without permission (least change {y:?})"),
                ));
            }
        }
    }
    out
}

/// No element of an interval enters `A` before it is chosen or while it is
/// restrained.
pub fn verify_restraints(state: &StageState) -> Vec<Violation> {
    let mut out = Vec::new();
    for (k, r) in state.intervals.iter().enumerate() {
        let Some(c) = r.chosen_at else { continue };
        let end = r.declared_at.unwrap_or(u64::MAX);
        for &x in &r.elements {
            if let Some(t) = state.a_enum.entry_stage(x) {
                if t < end {
                    out.push(violation(
                        Check::Restraint,
                        Some(t),
                        format!("{x} of interval {k} (chosen at {c}) entered at {t}, before release"),
                    ));
                }
            }
        }
    }
    out
}

/// Interval shape for the nonlow construction: consecutive `r_{n,2j}..r_{n,2k+1}`
/// above the choosing stage, `ρ_m(I) >= ρ_m(R_n)/2` at `m = max + 1`, and
/// pairwise disjoint.
pub fn check_nonlow_intervals(intervals: &[IntervalRecord]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut owner: HashMap<u64, usize> = HashMap::new();
    for (k, r) in intervals.iter().enumerate() {
        let mut bad = |d: String| out.push(violation(Check::IntervalCondition, r.chosen_at, format!("interval {k}: {d}")));
        if r.elements.is_empty() || r.elements.len() % 2 != 0 {
            bad(format!("{} elements, expected a positive even count", r.elements.len()));
            continue;
        }
        let n = pair(r.e, r.i) as u32;
        let j = r_index(r.min());
        let shape_ok = r.min().trailing_zeros() == n
            && j.is_multiple_of(2)
            && r.elements.iter().enumerate().all(|(t, &x)| x == r_elem(n, j + t as u64));
        if !shape_ok {
            bad("not a run r_{n,2j}..r_{n,2k+1}".into());
        }
        if let Some(c) = r.chosen_at {
            if r.min() <= c {
                bad(format!("min {} not above the choosing stage {c}", r.min()));
            }
        }
        let m = r.max() + 1;
        if ((2 * r.elements.len()) as u64) < rn_count_below(n, m) {
            bad(format!("|I| = {} below half of |R_n ↾ {m}|", r.elements.len()));
        }
        for &x in &r.elements {
            if let Some(prev) = owner.insert(x, k) {
                bad(format!("{x} also in interval {prev}"));
            }
        }
    }
    out
}

/// `A` and `Φ_e` disagree on every element of every successful interval,
/// with `Φ_e` read at the budget of the deciding stage.
pub fn verify_total_disagreement(state: &StageState, lib: &PartialLibrary) -> Vec<Violation> {
    let mut out = Vec::new();
    let horizon = state.a_enum.horizon();
    for (k, r) in state.intervals.iter().enumerate() {
        if r.status != IntervalStatus::Successful {
            continue;
        }
        let d = r.declared_at.unwrap();
        let budget = d.saturating_sub(1);
        for &x in &r.elements {
            match lib[r.e].evaluate_budgeted(x, budget).value() {
                None => out.push(violation(Check::Disagreement, Some(d), format!("Φ_{}({x}) undefined in interval {k}", r.e))),
                Some(v) if state.a_enum.contains_at(x, horizon) == v => out.push(violation(
                    Check::Disagreement,
                    Some(d),
                    format!("A and Φ_{} agree at {x} in interval {k}", r.e),
                )),
                _ => {}
            }
        }
    }
    out
}

/// Each pair of a successful nonlow interval has exactly one element in `A`,
/// and `A` differs from `Φ_e` on at least one of the two.
pub fn verify_pair_disagreement(state: &StageState, lib: &PartialLibrary) -> Vec<Violation> {
    let mut out = Vec::new();
    let horizon = state.a_enum.horizon();
    for (k, r) in state.intervals.iter().enumerate() {
        if r.status != IntervalStatus::Successful {
            continue;
        }
        let d = r.declared_at.unwrap();
        for p in r.elements.chunks(2) {
            let a: Vec<bool> = p.iter().map(|&x| state.a_enum.contains_at(x, horizon)).collect();
            if a[0] == a[1] {
                out.push(violation(Check::Disagreement, Some(d), format!("pair {p:?} of interval {k} has {} elements in A", a[0] as u8 * 2)));
                continue;
            }
            let phi: Vec<Option<bool>> = p.iter().map(|&x| lib[r.e].evaluate_budgeted(x, d).value()).collect();
            let differs = phi.iter().zip(&a).any(|(f, &b)| f.is_some_and(|f| f != b));
            if !differs {
                out.push(violation(Check::Disagreement, Some(d), format!("A agrees with Φ_{} on pair {p:?} of interval {k}", r.e)));
            }
        }
    }
    out
}

/// `|(A △ Φ_e) ↾ m|` against `|R_n ↾ m|` at `m = max I + 1` for a
/// successful interval. Only positions where `Φ_e` converges within the run
/// count as disagreements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessBound {
    pub interval: usize,
    pub e: usize,
    pub i: usize,
    pub m: u64,
    pub disagreements: u64,
    pub disagreements_in_interval: u64,
    pub r_count: u64,
    /// `4·|A △ Φ_e ↾ m| > |R_n ↾ m|`
    pub strict: bool,
    /// The same with `>=`.
    pub weak: bool,
    /// At least half of the interval is in `A △ Φ_e`.
    pub half_of_interval: bool,
}

pub fn success_bounds(state: &StageState, lib: &PartialLibrary) -> Vec<SuccessBound> {
    let successes: Vec<(usize, &IntervalRecord)> = state
        .intervals
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == IntervalStatus::Successful)
        .collect();
    let Some(len) = successes.iter().map(|(_, r)| r.max() as usize + 1).max() else {
        return Vec::new();
    };
    let a = state.a_prefix(len);
    // A △ Φ_e where Φ_e converges, per library member that has a success
    let mut diffs: HashMap<usize, BitPrefix> = HashMap::new();
    for &(_, r) in &successes {
        diffs.entry(r.e).or_insert_with(|| {
            let (conv, vals) = lib[r.e].budgeted_prefix(len, state.stages);
            let d = pointwise(SetOp::SymDiff, &vals, &a).unwrap();
            pointwise(SetOp::Intersect, &d, &conv).unwrap()
        });
    }
    successes
        .into_iter()
        .map(|(k, r)| {
            let diff = &diffs[&r.e];
            let m = r.max() + 1;
            let disagreements = diff.rank(m as usize) as u64;
            let in_interval = r.elements.iter().filter(|&&x| diff.get(x as usize)).count() as u64;
            let r_count = rn_count_below(pair(r.e, r.i) as u32, m);
            SuccessBound {
                interval: k,
                e: r.e,
                i: r.i,
                m,
                disagreements,
                disagreements_in_interval: in_interval,
                r_count,
                strict: 4 * disagreements > r_count,
                weak: 4 * disagreements >= r_count,
                half_of_interval: 2 * in_interval >= r.elements.len() as u64,
            }
        })
        .collect()
}

/// Pair counts on `R_{⟨e,i⟩}` over pairs `(r_{2k}, r_{2k+1})` with
/// `r_{2k+1}` at most the last stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfDensityReport {
    pub e: usize,
    pub i: usize,
    pub n: u32,
    pub pairs: u64,
    pub pairs_with_one: u64,
    #[serde(with = "ratio::serde_opt_str")]
    pub fraction: Option<Density>,
    /// Pairs with zero or two elements in `A`.
    pub exceptions: Vec<(u64, u64)>,
    /// Elements of the requirement's interval still restrained at the end.
    pub final_restrained: Vec<u64>,
    /// Every exception lies in the final restrained interval.
    pub exceptions_in_final_interval: bool,
}

pub fn verify_half_density(state: &StageState, e: usize, i: usize) -> HalfDensityReport {
    let n = pair(e, i) as u32;
    let horizon = state.a_enum.horizon();
    let final_restrained: Vec<u64> = state
        .intervals
        .iter()
        .filter(|r| r.e == e && r.i == i && r.status == IntervalStatus::Pending)
        .flat_map(|r| r.elements.iter().copied())
        .collect();
    let mut pairs = 0;
    let mut with_one = 0;
    let mut exceptions = Vec::new();
    if n < 63 {
        let mut k = 0;
        while r_elem(n, 2 * k + 1) <= state.stages {
            let (ev, od) = (r_elem(n, 2 * k), r_elem(n, 2 * k + 1));
            pairs += 1;
            if state.a_enum.contains_at(ev, horizon) != state.a_enum.contains_at(od, horizon) {
                with_one += 1;
            } else {
                exceptions.push((ev, od));
            }
            k += 1;
        }
    }
    let exceptions_in_final_interval = exceptions
        .iter()
        .all(|(a, b)| final_restrained.contains(a) && final_restrained.contains(b));
    HalfDensityReport {
        e,
        i,
        n,
        pairs,
        pairs_with_one: with_one,
        fraction: (pairs > 0).then(|| Density::new(with_one, pairs)),
        exceptions,
        final_restrained,
        exceptions_in_final_interval,
    }
}

/// `g` rebuilt from the trace alone: 1 from the stage the computation on the
/// current interval converges until the stage it is declared successful.
pub fn replay_g(state: &StageState) -> GTable {
    let reqs = state.g.requirements().to_vec();
    let slot: HashMap<(usize, usize), usize> = reqs.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let mut t = GTable::new(reqs.clone(), state.stages);
    let mut cur = vec![0u8; reqs.len()];
    let mut events = state.trace.iter().peekable();
    for s in 0..=state.stages {
        while let Some(ev) = events.peek() {
            if ev.stage > s {
                break;
            }
            if let Some(&k) = ev.requirement.as_ref().and_then(|r| slot.get(r)) {
                match ev.action {
                    Action::ComputationConverged { .. } => cur[k] = 1,
                    Action::Successful { .. } => cur[k] = 0,
                    _ => {}
                }
            }
            events.next();
        }
        for (k, &v) in cur.iter().enumerate() {
            t.set(k, s, v);
        }
    }
    t
}

pub fn verify_g_replay(state: &StageState) -> Vec<Violation> {
    let replayed = replay_g(state);
    let mut out = Vec::new();
    for &(e, i) in state.g.requirements() {
        if let Some(s) = (0..=state.stages).find(|&s| replayed.get(e, i, s) != state.g.get(e, i, s)) {
            out.push(violation(
                Check::GReplay,
                Some(s),
                format!("g({e},{i},{s}) is {:?}, replay gives {:?}", state.g.get(e, i, s), replayed.get(e, i, s)),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub kind: ConstructionKind,
    pub successes: usize,
    pub violations: Vec<Violation>,
    /// Nonlow only.
    pub bounds: Vec<SuccessBound>,
    /// Nonlow only.
    pub half_density: Vec<HalfDensityReport>,
    pub cap_limited: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn successes(state: &StageState) -> usize {
    state.intervals.iter().filter(|r| r.status == IntervalStatus::Successful).count()
}

pub fn verify_permitting(
    state: &StageState,
    plan: &IntervalPlan,
    b: &Enumeration,
    lib: &PartialLibrary,
) -> VerificationReport {
    let mut violations = verify_permitting_soundness(state, b);
    violations.extend(check_interval_conditions(&plan.rule, &state.intervals).into_iter().map(|c| {
        violation(
            Check::IntervalCondition,
            None,
            format!("({}, {}) {}: {}", c.e, c.i, c.condition, c.detail),
        )
    }));
    violations.extend(verify_total_disagreement(state, lib));
    VerificationReport {
        kind: state.kind,
        successes: successes(state),
        violations,
        bounds: Vec::new(),
        half_density: Vec::new(),
        cap_limited: state.cap_limited,
    }
}

/// All nonlow checks. A success whose strict bound fails is a violation.
pub fn verify_nonlow(state: &StageState, c: &Enumeration, lib: &PartialLibrary) -> VerificationReport {
    let mut violations = verify_permitting_soundness(state, c);
    violations.extend(verify_restraints(state));
    violations.extend(check_nonlow_intervals(&state.intervals));
    violations.extend(verify_pair_disagreement(state, lib));
    violations.extend(verify_g_replay(state));
    let bounds = success_bounds(state, lib);
    for b in bounds.iter().filter(|b| !b.strict) {
        violations.push(violation(
            Check::Bound,
            None,
            format!("interval {}: 4·{} <= {} at m = {}", b.interval, b.disagreements, b.r_count, b.m),
        ));
    }
    let half_density: Vec<HalfDensityReport> =
        state.g.requirements().iter().map(|&(e, i)| verify_half_density(state, e, i)).collect();
    for h in half_density.iter().filter(|h| !h.exceptions_in_final_interval) {
        violations.push(violation(
            Check::HalfDensity,
            None,
            format!("({}, {}): exceptions {:?} outside the final interval", h.e, h.i, h.exceptions),
        ));
    }
    VerificationReport {
        kind: state.kind,
        successes: successes(state),
        violations,
        bounds,
        half_density,
        cap_limited: state.cap_limited,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{run_nonlow_construction, run_permitting_construction, JumpProbe, NonlowConfig, PermittingConfig};
    use super::*;
    use crate::bitseq::{DelayRule, Generator, PartialGenerator};
    use crate::ratio::frac;

    fn unit_zero() -> PartialLibrary {
        PartialLibrary::new(vec![PartialGenerator::new(Generator::zeros(), None, DelayRule::Constant(1))])
    }

    #[test]
    fn full_cycle_bound_by_hand() {
        let c = Enumeration::from_json(r#"{"7": [1]}"#).unwrap();
        let lib = unit_zero();
        let st = run_nonlow_construction(&c, &[JumpProbe::new(2, 0)], &lib, &NonlowConfig::new(20, 100)).unwrap();
        let b = &success_bounds(&st, &lib)[0];
        // I_0 = {5, 7}, m = 8; A ↾ 8 = {1, 2, 4, 5}, Φ = 0, R_0 ↾ 8 = {1, 3, 5, 7}
        assert_eq!((b.m, b.disagreements, b.r_count), (8, 4, 4));
        assert!(b.strict && b.half_of_interval);
        let report = verify_nonlow(&st, &c, &lib);
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn half_density_examples() {
        let lib = unit_zero();
        let silent = run_nonlow_construction(&Enumeration::empty(64), &[JumpProbe::never()], &lib, &NonlowConfig::new(64, 1000)).unwrap();
        let h = verify_half_density(&silent, 0, 0);
        assert_eq!(h.pairs, 16);
        assert!(h.exceptions.is_empty());
        assert_eq!(h.fraction, Some(frac(1, 1)));

        // probe converges but C never changes: the interval stays restrained
        let stuck = run_nonlow_construction(&Enumeration::empty(64), &[JumpProbe::new(2, 0)], &lib, &NonlowConfig::new(64, 1000)).unwrap();
        let h = verify_half_density(&stuck, 0, 0);
        assert_eq!(h.final_restrained, vec![5, 7]);
        assert_eq!(h.exceptions, vec![(5, 7)]);
        assert!(h.exceptions_in_final_interval);
        assert_eq!(stuck.g.last(0, 0), Some(1));
    }

    #[test]
    fn tampering_is_caught() {
        let c = Enumeration::from_json(r#"{"7": [1]}"#).unwrap();
        let lib = unit_zero();
        let mut st = run_nonlow_construction(&c, &[JumpProbe::new(2, 0)], &lib, &NonlowConfig::new(20, 100)).unwrap();
        st.g.set(0, 3, 1);
        assert!(!verify_g_replay(&st).is_empty());
        // an unpermitted addition
        let mut adds: Vec<Vec<u64>> = (0..=st.a_enum.horizon()).map(|s| st.a_enum.entered_at(s).to_vec()).collect();
        adds[2].push(40);
        st.a_enum = Enumeration::from_additions(adds).unwrap();
        assert_eq!(verify_permitting_soundness(&st, &c).len(), 1);
    }

    #[test]
    fn permitting_run_verifies() {
        let lib: PartialLibrary = vec![Generator::zeros(), Generator::odds(), Generator::random(3, 1, 2).unwrap()].into();
        let b = Enumeration::random(9, 300, 60, 0.5);
        let cfg = PermittingConfig { r: frac(1, 2), intervals_per_requirement: 3, stages: 300, scan_cap: 1 << 20 };
        let (st, plan) = run_permitting_construction(&b, &lib, &cfg).unwrap();
        let report = verify_permitting(&st, &plan, &b, &lib);
        assert!(report.passed(), "{:?}", report.violations);
        assert!(report.successes > 0);
    }
}
