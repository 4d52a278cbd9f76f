//! The interval-success construction under ordinary permitting: `A` is made
//! to disagree totally with `Φ_e` on pre-chosen intervals inside `S_e ∪ S̄`,
//! each success being permitted by a change of `B` at or below the interval.

use serde::{Deserialize, Serialize};

use super::enumeration::Enumeration;
use super::intervals::{plan_intervals, IntervalPlan, IntervalStatus, SliceRule};
use super::trace::{Action, EntryCause, Trace};
use super::{ConstructionKind, GTable, StageState};
use crate::bitseq::PartialLibrary;
use crate::error::{invalid, Result};
use crate::ratio::{self, Density};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermittingConfig {
    #[serde(with = "ratio::serde_str")]
    pub r: Density,
    /// Intervals pre-chosen per requirement.
    pub intervals_per_requirement: usize,
    pub stages: u64,
    /// Largest position the interval scan may reach.
    pub scan_cap: u64,
}

/// Runs stages `1..=stages`. At stage `s+1`, interval `I_{e,i}` (`e, i <= s`,
/// pairing order) becomes successful when `Φ_{e,s}` is defined on all of it,
/// its min exceeds `A_s ∩ S_e`, and some element of `B_{s+1} \ B_s` is at
/// most its min; then every `x ∈ I` with `Φ_e(x) = 0` enters `A`.
pub fn run_permitting_construction(
    b: &Enumeration,
    lib: &PartialLibrary,
    cfg: &PermittingConfig,
) -> Result<(StageState, IntervalPlan)> {
    if lib.is_empty() {
        return Err(invalid("permitting construction needs a nonempty library"));
    }
    let rule = SliceRule::from_density(cfg.r)?;
    let mut plan = plan_intervals(rule.clone(), lib.len(), cfg.intervals_per_requirement, cfg.scan_cap)?;
    let mut a = Enumeration::from_additions(vec![Vec::new()])?;
    let mut trace = Trace::default();
    // max(A_s ∩ S_e) per requirement
    let mut max_in_slice: Vec<Option<u64>> = vec![None; lib.len()];

    for s in 0..cfg.stages {
        let stage = s + 1;
        let snapshot = max_in_slice.clone();
        let mut entering = Vec::new();
        let b_min = b.min_entered_at(stage);
        for k in 0..plan.records.len() {
            let rec = &plan.records[k];
            let (e, i) = (rec.e, rec.i);
            if e as u64 > s || i as u64 > s || rec.status != IntervalStatus::Pending {
                continue;
            }
            let phi = &lib[e];
            let defined = rec.elements.iter().all(|&x| phi.evaluate_budgeted(x, s).value().is_some());
            let above = snapshot[e].is_none_or(|m| rec.min() > m);
            let permitted = b_min.is_some_and(|y| y <= rec.min());
            if !(defined && above && permitted) {
                continue;
            }
            let add: Vec<u64> = rec
                .elements
                .iter()
                .copied()
                .filter(|&x| phi.evaluate_budgeted(x, s).value() == Some(false))
                .collect();
            for &x in &add {
                if rule.in_slice(e, x) {
                    max_in_slice[e] = Some(max_in_slice[e].map_or(x, |m| m.max(x)));
                }
            }
            let rec = &mut plan.records[k];
            rec.status = IntervalStatus::Successful;
            rec.declared_at = Some(stage);
            trace.push(stage, Some((e, i)), Action::Successful { interval: k, trigger: b_min.unwrap() });
            if !add.is_empty() {
                trace.push(stage, Some((e, i)), Action::Enter { elements: add.clone(), cause: EntryCause::Success });
            }
            entering.extend(add);
        }
        a.push_stage(entering)?;
    }

    let state = StageState {
        kind: ConstructionKind::Permitting,
        stages: cfg.stages,
        a_enum: a,
        intervals: plan.records.clone(),
        restraints: Default::default(),
        g: GTable::default(),
        trace,
        cap_limited: false,
    };
    Ok((state, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitseq::{DelayRule, Generator, PartialGenerator};
    use crate::ratio::frac;

    fn cfg(stages: u64, per: usize) -> PermittingConfig {
        PermittingConfig {
            r: frac(1, 2),
            intervals_per_requirement: per,
            stages,
            scan_cap: 1 << 24,
        }
    }

    #[test]
    fn silent_enumeration_never_succeeds() {
        let lib: PartialLibrary = vec![Generator::zeros(), Generator::ones()].into();
        let (state, _) = run_permitting_construction(&Enumeration::empty(200), &lib, &cfg(200, 3)).unwrap();
        assert!(state.a_enum.is_empty());
        assert!(state.intervals.iter().all(|r| r.status == IntervalStatus::Pending));
    }

    #[test]
    fn one_interval_with_zero_function() {
        let lib: PartialLibrary = vec![Generator::zeros()].into();
        let (state, plan) =
            run_permitting_construction(&Enumeration::one_per_stage(20), &lib, &cfg(20, 1)).unwrap();
        let rec = &state.intervals[0];
        assert_eq!(rec.status, IntervalStatus::Successful);
        // I_{0,0} = {1}, and 1 enters B at stage 1
        assert_eq!(plan.records[0].elements, vec![1]);
        assert_eq!(rec.declared_at, Some(1));
        for &x in &rec.elements {
            assert!(state.a_enum.contains_at(x, rec.declared_at.unwrap()));
        }
    }

    #[test]
    fn waits_for_phi_to_converge() {
        let slow = PartialGenerator::new(Generator::zeros(), None, DelayRule::Constant(7));
        let lib = PartialLibrary::new(vec![slow]);
        let b = Enumeration::from_json(r#"{"3": [0], "8": [1]}"#).unwrap();
        let (state, _) = run_permitting_construction(&b, &lib, &cfg(40, 1)).unwrap();
        // the change at 3 comes before budget 7, first available at stage 8
        assert_eq!(state.intervals[0].declared_at, Some(8));
    }
}
