//! Finite-horizon stage simulators for the two permitting constructions,
//! with the traces and checks that make their runs auditable.

mod enumeration;
mod intervals;
mod nonlow;
mod permitting;
mod trace;
mod verify;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use enumeration::Enumeration;
pub use intervals::{
    check_interval_conditions, choose_interval, choose_intervals, pair, plan_intervals, unpair,
    ConditionViolation, IntervalPlan, IntervalRecord, IntervalStatus, SliceRule,
};
pub use nonlow::{
    r_elem, r_index, run_nonlow_construction, select_interval, select_interval_capped, JumpProbe, NonlowConfig,
    DEFAULT_INTERVAL_CAP,
};
pub use permitting::{run_permitting_construction, PermittingConfig};
pub use trace::{Action, EntryCause, Search, Trace, TraceEvent};
pub use verify::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    Permitting,
    Nonlow,
}

/// `g(e, i, s)` for every requirement and stage `0..=stages`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GTable {
    requirements: Vec<(usize, usize)>,
    values: Vec<Vec<u8>>,
}

/// One requirement's `g` as its change points; the value is 0 before the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GChanges {
    pub e: usize,
    pub i: usize,
    pub changes: Vec<(u64, u8)>,
}

impl GTable {
    pub fn new(requirements: Vec<(usize, usize)>, stages: u64) -> Self {
        let values = vec![vec![0; stages as usize + 1]; requirements.len()];
        GTable {
            requirements,
            values,
        }
    }

    pub(crate) fn set(&mut self, slot: usize, s: u64, v: u8) {
        self.values[slot][s as usize] = v;
    }

    pub fn requirements(&self) -> &[(usize, usize)] {
        &self.requirements
    }

    pub fn get(&self, e: usize, i: usize, s: u64) -> Option<u8> {
        let slot = self.requirements.iter().position(|&r| r == (e, i))?;
        self.values[slot].get(s as usize).copied()
    }

    /// Value at the last stage.
    pub fn last(&self, e: usize, i: usize) -> Option<u8> {
        let slot = self.requirements.iter().position(|&r| r == (e, i))?;
        self.values[slot].last().copied()
    }

    pub fn change_points(&self) -> Vec<GChanges> {
        self.requirements
            .iter()
            .zip(&self.values)
            .map(|(&(e, i), row)| {
                let mut prev = 0;
                let mut changes = Vec::new();
                for (s, &v) in row.iter().enumerate() {
                    if v != prev {
                        changes.push((s as u64, v));
                        prev = v;
                    }
                }
                GChanges { e, i, changes }
            })
            .collect()
    }

    /// Rebuilds a table from change points.
    pub fn from_change_points(rows: &[GChanges], stages: u64) -> Self {
        let mut t = GTable::new(rows.iter().map(|r| (r.e, r.i)).collect(), stages);
        for (slot, r) in rows.iter().enumerate() {
            let mut cur = 0;
            let mut it = r.changes.iter().peekable();
            for s in 0..=stages {
                while let Some(&&(at, v)) = it.peek() {
                    if at > s {
                        break;
                    }
                    cur = v;
                    it.next();
                }
                t.values[slot][s as usize] = cur;
            }
        }
        t
    }
}

/// Everything a construction run produced.
#[derive(Debug, Clone)]
pub struct StageState {
    pub kind: ConstructionKind,
    pub stages: u64,
    /// The constructed set, stage by stage.
    pub a_enum: Enumeration,
    pub intervals: Vec<IntervalRecord>,
    /// Elements still restrained at the end.
    pub restraints: BTreeSet<u64>,
    /// Empty for the permitting construction.
    pub g: GTable,
    pub trace: Trace,
    /// Some search was abandoned at its cap.
    pub cap_limited: bool,
}

impl StageState {
    /// `A ↾ len` at the end of the run.
    pub fn a_prefix(&self, len: usize) -> crate::bitseq::BitPrefix {
        self.a_enum.final_prefix(len)
    }
}
