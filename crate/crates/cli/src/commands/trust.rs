//! `coarse trust`: blockwise trust merge of a finite approximating family.

use std::io::Write;

use coarse_core::density::block_range;
use coarse_core::ratio::{self, Density};
use coarse_core::trust::{
    block_errors, bound_violations, merge_bound, miller_merge, plant_family, BoundViolation, WitnessFamily,
};
use coarse_core::{BitPrefix, GeneratorDescriptor};
use serde::{Deserialize, Serialize};

use super::command_config;
use crate::error::config_err;
use crate::{CliError, Loaded, OutDir, Outcome, Provenance, RunParams};

pub const DEFAULT_HORIZON: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Members `0..=max_index` planted from the target with the run seed.
    Planted { max_index: usize },
    Explicit { members: Vec<GeneratorDescriptor> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustConfig {
    /// The merge covers blocks `I_0..I_K` for the largest `K` with `2^(K+1) - 1 <= horizon`.
    pub run: RunParams,
    /// Required for planted families; enables the error columns otherwise.
    pub target: Option<GeneratorDescriptor>,
    pub family: FamilySpec,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            run: RunParams::default(),
            target: Some(GeneratorDescriptor::Random { seed: 0, p: "1/2".into() }),
            family: FamilySpec::Planted { max_index: 10 },
        }
    }
}

command_config!(TrustConfig, "trust");

/// Per member index `n`: blocks from which `d_k(A △ C) < 2^(3-n)` holds.
#[derive(Debug, Serialize)]
pub struct BoundCheck {
    pub n: usize,
    /// Promised start (planted families only).
    pub k0: Option<u32>,
    /// Least `k` from which the bound holds through `K`; `None` if it fails at `K`.
    pub holds_from: Option<u32>,
    #[serde(with = "ratio::serde_str")]
    pub bound: Density,
    pub holds: bool,
}

#[derive(Debug, Serialize)]
pub struct TrustResult {
    pub k_max: u32,
    pub merged_bits: usize,
    pub members: usize,
    pub chosen: Vec<usize>,
    /// `d_k(A △ C)` for the merged `C`, when a target is given.
    pub block_errors: Vec<String>,
    pub planting_k0: Option<Vec<u32>>,
    pub bound_checks: Vec<BoundCheck>,
    /// Input blocks where `d_k(A △ C_m) < 2^(1-m)` fails, from the
    /// planted settling block on (all blocks for explicit families).
    pub input_violations: Vec<BoundViolation>,
}

/// Largest `K` with `2^(K+1) - 1 <= horizon`.
fn k_max_for(horizon: usize) -> u32 {
    (usize::BITS - 1 - (horizon + 1).leading_zeros()) - 1
}

/// Writes `merged.bin`, `chosen.csv`, `block_errors.csv` (with a target), `report.json`.
pub fn run(loaded: &Loaded<TrustConfig>, out: &OutDir) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    let horizon = cfg.run.horizon_or(DEFAULT_HORIZON)?;
    let tail = cfg.run.tail_for(horizon)?;
    let k_max = k_max_for(horizon);
    let len = block_range(k_max).end;
    let target: Option<BitPrefix> =
        cfg.target.as_ref().map(|t| t.resolve(&loaded.base).map(|g| g.evaluate_prefix(len))).transpose()?;

    let (family, planted) = match &cfg.family {
        FamilySpec::Planted { max_index } => {
            let a = target.as_ref().ok_or_else(|| config_err("a planted family needs a target"))?;
            let p = plant_family(a, *max_index, k_max, cfg.run.seed)?;
            (p.family.clone(), Some(p))
        }
        FamilySpec::Explicit { members } => {
            if members.is_empty() {
                return Err(config_err("explicit family has no members"));
            }
            let gens: Vec<_> = members.iter().map(|d| d.resolve(&loaded.base)).collect::<Result<_, _>>()?;
            (WitnessFamily::from_generators(&gens, k_max)?, None)
        }
    };
    let report = miller_merge(&family, k_max)?;

    let mut result = TrustResult {
        k_max,
        merged_bits: report.merged.len(),
        members: family.members().len(),
        chosen: report.chosen.clone(),
        block_errors: Vec::new(),
        planting_k0: planted.as_ref().map(|p| p.planting_k0.clone()),
        bound_checks: Vec::new(),
        input_violations: Vec::new(),
    };
    if let Some(a) = &target {
        let errs = block_errors(a, &report.merged, k_max)?;
        result.block_errors = errs.values().map(|d| format!("{}/{}", d.numer(), d.denom())).collect();
        for n in 0..family.members().len() {
            let bound = merge_bound(n);
            let holds_from = (0..=k_max + 1).rev().take_while(|&k| k == k_max + 1 || errs.d(k) < bound).last();
            let holds_from = holds_from.filter(|&k| k <= k_max);
            let k0 = planted.as_ref().map(|p| p.merge_k0(n));
            let holds = match (k0, holds_from) {
                (Some(k0), Some(h)) => h <= k0,
                (None, h) => h.is_some(),
                (Some(_), None) => false,
            };
            result.bound_checks.push(BoundCheck { n, k0, holds_from, bound, holds });
        }
        let from_k = planted.as_ref().map_or(0, |p| p.planting_k0.iter().copied().max().unwrap_or(0));
        result.input_violations = bound_violations(a, &family, k_max, from_k)?;
        out.write_with("block_errors.csv", |w| errs.write_csv(w))?;
    }

    out.bits("merged.bin", &report.merged)?;
    out.write_with("chosen.csv", |w| {
        writeln!(w, "k,member")?;
        for (k, n) in report.chosen.iter().enumerate() {
            writeln!(w, "{k},{n}")?;
        }
        Ok(())
    })?;
    out.report(&Provenance::new(loaded, horizon, tail), &result)?;
    Ok(Outcome::Complete)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_max_fits_the_horizon() {
        assert_eq!(k_max_for(1), 0);
        assert_eq!(k_max_for(2), 0);
        assert_eq!(k_max_for(3), 1);
        assert_eq!(k_max_for(1 << 21), 20);
        assert_eq!(k_max_for((1 << 21) - 2), 19);
    }
}
