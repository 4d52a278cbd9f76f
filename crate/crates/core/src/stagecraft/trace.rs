//! Event log of a stage simulation, written as JSON lines.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Why elements entered `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryCause {
    /// The element is the current stage number.
    Alternate,
    /// Permitted by a change of the permitting set at or below it.
    Success,
    Cancel,
}

/// Which search hit its cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    Probe,
    /// The next interval would reach past the interval cap.
    Interval,
    Computation,
    Permission,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "data", rename_all = "snake_case")]
pub enum Action {
    Enter { elements: Vec<u64>, cause: EntryCause },
    ProbeConverged { use_bound: u64 },
    IntervalChosen { interval: usize, min: u64, max: u64, size: usize },
    /// Restraint on the interval's elements is lifted.
    Released { interval: usize },
    Cancelled { interval: usize, trigger: u64 },
    ComputationConverged { interval: usize },
    Successful { interval: usize, trigger: u64 },
    /// Of a pair, the element put into `A` when both choices disagree equally.
    PairChoice { even: u64, odd: u64, chose: u64 },
    GChange { value: u8 },
    CapHit { search: Search },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub stage: u64,
    /// `(e, i)`, absent for events not tied to a requirement.
    pub requirement: Option<(usize, usize)>,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, stage: u64, requirement: Option<(usize, usize)>, action: Action) {
        self.events.push(TraceEvent {
            stage,
            requirement,
            action,
        });
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TraceEvent> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(|e| Error::Descriptor(e.to_string()))?);
        }
        Ok(Trace { events })
    }
}
