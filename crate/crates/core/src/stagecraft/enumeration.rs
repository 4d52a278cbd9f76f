//! Stage-indexed monotone finite sets standing for c.e. sets.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitseq::BitPrefix;
use crate::error::{Error, Result};

/// `X_0 ⊆ X_1 ⊆ ...`, stored as the elements added at each stage.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Enumeration {
    additions: Vec<Vec<u64>>,
    entry: HashMap<u64, u64>,
}

impl Enumeration {
    /// `additions[s]` enters at stage `s`. An element may enter only once.
    pub fn from_additions(additions: Vec<Vec<u64>>) -> Result<Self> {
        let mut entry = HashMap::new();
        let mut out = Vec::with_capacity(additions.len());
        for (s, mut add) in additions.into_iter().enumerate() {
            add.sort_unstable();
            add.dedup();
            for &x in &add {
                if let Some(prev) = entry.insert(x, s as u64) {
                    return Err(Error::MalformedEnumeration(format!(
                        "{x} enters at stage {s} but is already present since stage {prev}"
                    )));
                }
            }
            out.push(add);
        }
        Ok(Enumeration {
            additions: out,
            entry,
        })
    }

    /// Full stage sets; each must contain its predecessor.
    pub fn from_stage_sets(sets: Vec<Vec<u64>>) -> Result<Self> {
        let mut prev: Vec<u64> = Vec::new();
        let mut additions = Vec::with_capacity(sets.len());
        for (s, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(x) = prev.iter().find(|x| set.binary_search(x).is_err()) {
                return Err(Error::MalformedEnumeration(format!(
                    "{x} leaves the set at stage {s}"
                )));
            }
            additions.push(set.iter().filter(|x| prev.binary_search(x).is_err()).copied().collect());
            prev = set;
        }
        Self::from_additions(additions)
    }

    /// JSON object mapping stage numbers to the elements added then.
    pub fn from_json(text: &str) -> Result<Self> {
        let map: BTreeMap<String, Vec<u64>> = serde_json::from_str(text)
            .map_err(|e| Error::MalformedEnumeration(e.to_string()))?;
        let mut by_stage = BTreeMap::new();
        for (k, v) in map {
            let s: usize = k
                .parse()
                .map_err(|_| Error::MalformedEnumeration(format!("stage key {k:?} is not a number")))?;
            by_stage.insert(s, v);
        }
        let len = by_stage.keys().next_back().map_or(0, |s| s + 1);
        let mut additions = vec![Vec::new(); len];
        for (s, v) in by_stage {
            additions[s] = v;
        }
        Self::from_additions(additions)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, &Vec<u64>> = self
            .additions
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_empty())
            .map(|(s, a)| (s.to_string(), a))
            .collect();
        serde_json::to_string(&map).expect("string keys serialize")
    }

    /// Nothing ever enters.
    pub fn empty(stages: u64) -> Self {
        Self::from_additions(vec![Vec::new(); stages as usize + 1]).unwrap()
    }

    /// `s` enters at stage `s`, for `1 <= s <= stages`.
    pub fn one_per_stage(stages: u64) -> Self {
        Self::from_additions((0..=stages).map(|s| if s == 0 { vec![] } else { vec![s] }).collect())
            .unwrap()
    }

    /// At each stage, with probability `rate`, one not-yet-present element
    /// below `universe` enters.
    pub fn random(seed: u64, stages: u64, universe: u64, rate: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let mut additions = vec![Vec::new()];
        for _ in 1..=stages {
            let mut add = Vec::new();
            if rng.gen_bool(rate) {
                let x = rng.gen_range(0..universe);
                if seen.insert(x) {
                    add.push(x);
                }
            }
            additions.push(add);
        }
        Self::from_additions(additions).unwrap()
    }

    /// Last stage with a recorded (possibly empty) addition list.
    pub fn horizon(&self) -> u64 {
        self.additions.len().saturating_sub(1) as u64
    }

    /// Elements entering at stage `s`, sorted. Empty past the horizon.
    pub fn entered_at(&self, s: u64) -> &[u64] {
        self.additions.get(s as usize).map_or(&[], |v| v.as_slice())
    }

    pub fn min_entered_at(&self, s: u64) -> Option<u64> {
        self.entered_at(s).first().copied()
    }

    pub fn entry_stage(&self, x: u64) -> Option<u64> {
        self.entry.get(&x).copied()
    }

    /// `x ∈ X_s`.
    pub fn contains_at(&self, x: u64, s: u64) -> bool {
        self.entry_stage(x).is_some_and(|t| t <= s)
    }

    /// `X_s` sorted.
    pub fn stage_set(&self, s: u64) -> Vec<u64> {
        let mut v: Vec<u64> = self
            .additions
            .iter()
            .take(s as usize + 1)
            .flatten()
            .copied()
            .collect();
        v.sort_unstable();
        v
    }

    /// Every element ever enumerated, sorted.
    pub fn elements(&self) -> Vec<u64> {
        self.stage_set(self.horizon())
    }

    pub fn len(&self) -> usize {
        self.entry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entry.is_empty()
    }

    /// `X_s ↾ len`.
    pub fn prefix_at(&self, s: u64, len: usize) -> BitPrefix {
        let mut out = BitPrefix::zeros(len);
        for (&x, &t) in &self.entry {
            if t <= s && (x as usize) < len {
                out.set(x as usize, true);
            }
        }
        out
    }

    pub fn final_prefix(&self, len: usize) -> BitPrefix {
        self.prefix_at(u64::MAX, len)
    }

    /// Appends a stage with the given additions.
    pub(crate) fn push_stage(&mut self, mut add: Vec<u64>) -> Result<()> {
        add.sort_unstable();
        add.dedup();
        let s = self.additions.len() as u64;
        for &x in &add {
            if let Some(prev) = self.entry.insert(x, s) {
                return Err(Error::MalformedEnumeration(format!(
                    "{x} enters at stage {s} but is already present since stage {prev}"
                )));
            }
        }
        self.additions.push(add);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_sets_round_trip() {
        let e = Enumeration::from_stage_sets(vec![vec![], vec![3], vec![3, 1], vec![1, 3]]).unwrap();
        assert_eq!(e.entered_at(2), &[1]);
        assert_eq!(e.entered_at(3), &[] as &[u64]);
        assert_eq!(e.stage_set(2), vec![1, 3]);
        assert!(e.contains_at(3, 1) && !e.contains_at(1, 1));
        assert_eq!(e.entry_stage(1), Some(2));
        assert_eq!(e.prefix_at(1, 5).to_string(), "00010");
        let back = Enumeration::from_json(&e.to_json()).unwrap();
        assert_eq!(back.elements(), e.elements());
        assert_eq!(back.entry_stage(1), Some(2));
    }

    #[test]
    fn rejects_non_monotone_input() {
        assert!(matches!(
            Enumeration::from_stage_sets(vec![vec![1], vec![2]]),
            Err(Error::MalformedEnumeration(_))
        ));
        assert!(Enumeration::from_additions(vec![vec![1], vec![1]]).is_err());
        assert!(Enumeration::from_json(r#"{"x": [1]}"#).is_err());
        assert!(Enumeration::from_json(r#"{"1": [1], "4": [1]}"#).is_err());
    }

    #[test]
    fn json_fills_missing_stages() {
        let e = Enumeration::from_json(r#"{"2": [5, 0], "5": [7]}"#).unwrap();
        assert_eq!(e.horizon(), 5);
        assert_eq!(e.min_entered_at(2), Some(0));
        assert_eq!(e.entered_at(4), &[] as &[u64]);
        assert_eq!(e.entered_at(99), &[] as &[u64]);
    }

    #[test]
    fn generators() {
        let e = Enumeration::one_per_stage(4);
        assert_eq!(e.elements(), vec![1, 2, 3, 4]);
        assert!(Enumeration::empty(5).is_empty());
        let r1 = Enumeration::random(3, 100, 50, 0.5);
        assert_eq!(r1, Enumeration::random(3, 100, 50, 0.5));
        assert!(r1.len() > 10);
    }
}
