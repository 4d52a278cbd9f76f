//! Requirement pairing, interval records and the greedy interval plan for
//! the permitting construction.

use serde::{Deserialize, Serialize};

use crate::codings::rn_count_below;
use crate::error::{invalid, Error, Result};
use crate::ratio::Density;

/// Cantor pairing `⟨e, i⟩ = (e+i)(e+i+1)/2 + i`.
pub fn pair(e: usize, i: usize) -> u64 {
    let s = (e + i) as u64;
    s * (s + 1) / 2 + i as u64
}

pub fn unpair(z: u64) -> (usize, usize) {
    let w = (((8.0 * z as f64 + 1.0).sqrt() - 1.0) / 2.0).floor() as u64;
    // guard against rounding
    let w = (w.saturating_sub(1)..=w + 1)
        .rev()
        .find(|&w| w * (w + 1) / 2 <= z)
        .unwrap();
    let i = z - w * (w + 1) / 2;
    ((w - i) as usize, i as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalStatus {
    Pending,
    Successful,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub e: usize,
    pub i: usize,
    /// Sorted.
    pub elements: Vec<u64>,
    pub status: IntervalStatus,
    /// Stage of success or cancellation.
    pub declared_at: Option<u64>,
    /// Stage the interval was chosen; `None` for pre-chosen intervals.
    pub chosen_at: Option<u64>,
    /// Use of the probe computation the interval answers to.
    pub use_bound: Option<u64>,
}

impl IntervalRecord {
    pub fn min(&self) -> u64 {
        self.elements[0]
    }

    pub fn max(&self) -> u64 {
        *self.elements.last().unwrap()
    }

    pub fn contains(&self, x: u64) -> bool {
        self.elements.binary_search(&x).is_ok()
    }
}

/// Membership in `S = R(B)` and in its slices, for an expansion set `B`
/// given by the positions of its ones (all below 64).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceRule {
    /// `c_0 < c_1 < ...`
    pub c: Vec<u32>,
}

impl SliceRule {
    pub fn new(c: Vec<u32>) -> Result<Self> {
        if c.is_empty() || c.windows(2).any(|w| w[0] >= w[1]) || c.iter().any(|&n| n >= 64) {
            return Err(invalid("slice indices must be increasing and below 64"));
        }
        Ok(SliceRule { c })
    }

    pub fn from_density(r: Density) -> Result<Self> {
        let bits = crate::codings::binary_expansion_set(r, 64)?;
        Self::new(bits.positions().map(|i| i as u32).collect())
    }

    pub fn in_s(&self, x: u64) -> bool {
        x != 0 && self.c.binary_search(&x.trailing_zeros()).is_ok()
    }

    /// `x ∈ S_e`.
    pub fn in_slice(&self, e: usize, x: u64) -> bool {
        x != 0 && self.c.get(e) == Some(&x.trailing_zeros())
    }

    /// `x ∈ S_e ∪ S̄`.
    pub fn eligible(&self, e: usize, x: u64) -> bool {
        !self.in_s(x) || self.in_slice(e, x)
    }

    /// `|(S_e ∪ S̄) ∩ [0, m)|`.
    pub fn eligible_below(&self, e: usize, m: u64) -> u64 {
        let in_s: u64 = self.c.iter().map(|&n| rn_count_below(n, m)).sum();
        let in_se = self.c.get(e).map_or(0, |&n| rn_count_below(n, m));
        m - in_s + in_se
    }
}

/// Pre-chosen intervals `I_{e,i}` for `e < requirements`, `i < per_requirement`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalPlan {
    pub rule: SliceRule,
    pub requirements: usize,
    pub per_requirement: usize,
    /// Records in allocation (pairing) order.
    pub records: Vec<IntervalRecord>,
}

impl IntervalPlan {
    pub fn index_of(&self, e: usize, i: usize) -> Option<usize> {
        self.records.iter().position(|r| r.e == e && r.i == i)
    }

    /// Largest element of any interval.
    pub fn max_element(&self) -> u64 {
        self.records.iter().map(IntervalRecord::max).max().unwrap_or(0)
    }
}

/// Greedy intervals for one requirement, starting the scan above `start`:
/// collect elements of `S_e ∪ S̄` until the density condition holds at the
/// running max.
pub fn choose_interval(rule: &SliceRule, e: usize, i: usize, start: u64, cap: u64) -> Result<Vec<u64>> {
    let mut elements = Vec::new();
    let mut x = start;
    loop {
        if x > cap {
            return Err(Error::CapExceeded {
                cap,
                context: format!("interval ({e},{i}) did not close"),
            });
        }
        if rule.eligible(e, x) {
            elements.push(x);
            let m = x + 1;
            // ρ_m(I) >= i/(i+1) · ρ_m(S_e ∪ S̄)
            if (i as u128 + 1) * elements.len() as u128 >= i as u128 * rule.eligible_below(e, m) as u128 {
                return Ok(elements);
            }
        }
        x += 1;
    }
}

/// Intervals for `count` values of `i` of one requirement, one after another.
pub fn choose_intervals(rule: &SliceRule, e: usize, count: usize, cap: u64) -> Result<Vec<IntervalRecord>> {
    let mut out: Vec<IntervalRecord> = Vec::with_capacity(count);
    for i in 0..count {
        let start = out.last().map_or(1, |r| r.max() + 1);
        out.push(pending(e, i, choose_interval(rule, e, i, start, cap)?));
    }
    Ok(out)
}

fn pending(e: usize, i: usize, elements: Vec<u64>) -> IntervalRecord {
    IntervalRecord {
        e,
        i,
        elements,
        status: IntervalStatus::Pending,
        declared_at: None,
        chosen_at: None,
        use_bound: None,
    }
}

/// All intervals, allocated in pairing order, each above every earlier one.
/// Scanning starts at 1: an interval at 0 could never be permitted.
pub fn plan_intervals(
    rule: SliceRule,
    requirements: usize,
    per_requirement: usize,
    cap: u64,
) -> Result<IntervalPlan> {
    let mut keys: Vec<(usize, usize)> = (0..requirements)
        .flat_map(|e| (0..per_requirement).map(move |i| (e, i)))
        .collect();
    keys.sort_by_key(|&(e, i)| pair(e, i));
    let mut records: Vec<IntervalRecord> = Vec::with_capacity(keys.len());
    let mut next = 1u64;
    for (e, i) in keys {
        let elements = choose_interval(&rule, e, i, next, cap)?;
        next = elements.last().unwrap() + 1;
        records.push(pending(e, i, elements));
    }
    Ok(IntervalPlan {
        rule,
        requirements,
        per_requirement,
        records,
    })
}

/// A failed interval condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionViolation {
    pub condition: String,
    pub e: usize,
    pub i: usize,
    pub detail: String,
}

/// Re-checks containment, ordering, the density condition and disjointness
/// over a set of records, exactly.
pub fn check_interval_conditions(rule: &SliceRule, records: &[IntervalRecord]) -> Vec<ConditionViolation> {
    let mut out = Vec::new();
    let mut v = |c: &str, r: &IntervalRecord, d: String| {
        out.push(ConditionViolation {
            condition: c.into(),
            e: r.e,
            i: r.i,
            detail: d,
        })
    };
    for r in records {
        if r.elements.is_empty() {
            v("nonempty", r, "no elements".into());
            continue;
        }
        if let Some(x) = r.elements.iter().find(|&&x| !rule.eligible(r.e, x)) {
            v("containment", r, format!("{x} is outside S_e ∪ S̄"));
        }
        let m = r.max() + 1;
        let lhs = (r.i as u128 + 1) * r.elements.len() as u128;
        let rhs = r.i as u128 * rule.eligible_below(r.e, m) as u128;
        if lhs < rhs {
            v("density", r, format!("(i+1)|I| = {lhs} < i·|S_e ∪ S̄ ↾ {m}| = {rhs}"));
        }
        if let Some(next) = records.iter().find(|q| q.e == r.e && q.i == r.i + 1) {
            if !next.elements.is_empty() && next.min() <= r.max() {
                v("ordering", r, format!("next interval starts at {}", next.min()));
            }
        }
    }
    let mut all: Vec<(u64, usize)> = records
        .iter()
        .enumerate()
        .flat_map(|(k, r)| r.elements.iter().map(move |&x| (x, k)))
        .collect();
    all.sort_unstable();
    for w in all.windows(2) {
        if w[0].0 == w[1].0 {
            let r = &records[w[0].1];
            out.push(ConditionViolation {
                condition: "disjointness".into(),
                e: r.e,
                i: r.i,
                detail: format!("{} is shared with ({}, {})", w[0].0, records[w[1].1].e, records[w[1].1].i),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    #[test]
    fn pairing_round_trips() {
        assert_eq!(pair(0, 0), 0);
        assert_eq!(pair(1, 0), 1);
        assert_eq!(pair(0, 1), 2);
        assert_eq!(pair(2, 0), 3);
        for z in 0..5000 {
            let (e, i) = unpair(z);
            assert_eq!(pair(e, i), z);
        }
    }

    #[test]
    fn slice_rule_counts_match_brute_force() {
        let rule = SliceRule::from_density(frac(5, 8)).unwrap();
        for e in 0..3 {
            for m in 0..300u64 {
                let brute = (0..m).filter(|&x| rule.eligible(e, x)).count() as u64;
                assert_eq!(rule.eligible_below(e, m), brute);
            }
        }
        assert!(SliceRule::new(vec![]).is_err());
        assert!(SliceRule::new(vec![2, 1]).is_err());
    }

    #[test]
    fn first_interval_is_one_element() {
        let rule = SliceRule::from_density(frac(1, 2)).unwrap();
        let iv = choose_interval(&rule, 0, 0, 10, 1000).unwrap();
        assert_eq!(iv.len(), 1);
        assert!(rule.eligible(0, iv[0]) && iv[0] >= 10);
    }

    #[test]
    fn second_interval_meets_half_density() {
        // S_0 = R_1 for r = 1/2
        let rule = SliceRule::from_density(frac(1, 2)).unwrap();
        let iv = choose_intervals(&rule, 0, 2, 1 << 20).unwrap();
        let m = iv[1].max() + 1;
        let count = (0..m).filter(|&x| rule.eligible(0, x)).count();
        assert!(2 * iv[1].elements.len() >= count);
        assert!(check_interval_conditions(&rule, &iv).is_empty());
    }

    #[test]
    fn plan_satisfies_all_conditions() {
        let rule = SliceRule::from_density(frac(1, 3)).unwrap();
        let plan = plan_intervals(rule.clone(), 3, 4, 1 << 24).unwrap();
        assert_eq!(plan.records.len(), 12);
        assert!(check_interval_conditions(&rule, &plan.records).is_empty());
        let mut bad = plan.records.clone();
        let x = bad[0].elements[0];
        bad[1].elements.push(x);
        bad[1].elements.sort_unstable();
        let v = check_interval_conditions(&rule, &bad);
        assert!(v.iter().any(|c| c.condition == "disjointness"));
    }

    #[test]
    fn cap_is_reported() {
        let rule = SliceRule::from_density(frac(1, 2)).unwrap();
        assert!(matches!(
            choose_interval(&rule, 0, 50, 50, 100),
            Err(Error::CapExceeded { .. })
        ));
    }
}
