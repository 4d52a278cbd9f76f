//! `coarse stage`: runs one of the permitting constructions, verifies the
//! run against its own trace, and writes the trace, `A` and `g`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use coarse_core::density::{density_profile, estimate_liminf_limsup};
use coarse_core::stagecraft::{
    run_nonlow_construction, run_permitting_construction, verify_nonlow, verify_permitting, ConstructionKind,
    Enumeration, IntervalStatus, JumpProbe, NonlowConfig, PermittingConfig, VerificationReport, DEFAULT_INTERVAL_CAP,
};
use coarse_core::{DensityEstimate, GeneratorDescriptor, PartialDescriptor, PartialLibrary};
use serde::{Deserialize, Serialize};

use super::{command_config, parse_ratio};
use crate::error::config_err;
use crate::{CliError, Loaded, OutDir, Outcome, Provenance, RunParams};

pub const DEFAULT_STAGES: usize = 1000;

/// The permitting set: `B` for the permitting construction, `C` for the nonlow one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnumerationSpec {
    Empty,
    OnePerStage,
    /// Seeded; `seed` defaults to the run seed.
    Random {
        #[serde(default)]
        seed: Option<u64>,
        universe: u64,
        rate: f64,
    },
    /// Stage number to the elements entering then.
    Inline { stages: BTreeMap<u64, Vec<u64>> },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    /// `horizon` is the number of stages.
    pub run: RunParams,
    pub construction: ConstructionKind,
    pub enumeration: EnumerationSpec,
    /// Partial rules standing for `Φ_0, Φ_1, ...`.
    pub library: Vec<PartialDescriptor>,
    /// Permitting only: slice density and pre-chosen intervals per requirement.
    pub r: String,
    pub intervals_per_requirement: usize,
    pub scan_cap: u64,
    /// Nonlow only: one probe per `i`.
    pub probes: Vec<JumpProbe>,
    pub search_cap: u64,
    pub interval_cap: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            run: RunParams::default(),
            construction: ConstructionKind::Permitting,
            enumeration: EnumerationSpec::OnePerStage,
            library: vec![PartialDescriptor {
                values: GeneratorDescriptor::Zeros,
                domain: None,
                delay: Default::default(),
            }],
            r: "1/2".into(),
            intervals_per_requirement: 4,
            scan_cap: 1 << 24,
            probes: vec![JumpProbe::new(8, 2)],
            search_cap: 1 << 12,
            interval_cap: DEFAULT_INTERVAL_CAP,
        }
    }
}

command_config!(StageConfig, "stage");

#[derive(Debug, Serialize)]
pub struct StageResult {
    pub construction: ConstructionKind,
    pub stages: u64,
    pub successes: usize,
    pub cancelled: usize,
    pub pending: usize,
    pub elements: usize,
    pub trace_events: usize,
    pub cap_limited: bool,
    pub passed: bool,
    /// Density of `A ↾ (stages + 1)` over the window.
    pub estimate: DensityEstimate,
    pub a_bits: usize,
}

fn enumeration(spec: &EnumerationSpec, loaded: &Loaded<StageConfig>, stages: u64) -> Result<Enumeration, CliError> {
    Ok(match spec {
        EnumerationSpec::Empty => Enumeration::empty(stages),
        EnumerationSpec::OnePerStage => Enumeration::one_per_stage(stages),
        EnumerationSpec::Random { seed, universe, rate } => {
            if *universe == 0 || !(0.0..=1.0).contains(rate) {
                return Err(config_err("random enumeration needs universe >= 1 and rate in [0, 1]"));
            }
            Enumeration::random(seed.unwrap_or(loaded.run().seed), stages, *universe, *rate)
        }
        EnumerationSpec::Inline { stages } => {
            let mut additions = Vec::new();
            for (&s, xs) in stages {
                additions.resize(additions.len().max(s as usize + 1), Vec::new());
                additions[s as usize] = xs.clone();
            }
            Enumeration::from_additions(additions)?
        }
        EnumerationSpec::File { path } => Enumeration::load(&loaded.base.join(path))?,
    })
}

/// Writes `trace.jsonl`, `a.json`, `a.bin`, `intervals.json`, `g.json`,
/// `verification.json`, `report.json`.
pub fn run(loaded: &Loaded<StageConfig>, out: &OutDir) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    let stages = cfg.run.horizon_or(DEFAULT_STAGES)?;
    let tail = cfg.run.tail_for(stages + 1)?;
    if cfg.library.is_empty() {
        return Err(config_err("the library is empty"));
    }
    let lib = PartialLibrary::new(cfg.library.iter().map(|d| d.resolve(&loaded.base)).collect::<Result<_, _>>()?);
    let permit = enumeration(&cfg.enumeration, loaded, stages as u64)?;

    let mut prov = Provenance::new(loaded, stages, tail);
    let (state, verification): (_, VerificationReport) = match cfg.construction {
        ConstructionKind::Permitting => {
            let pc = PermittingConfig {
                r: parse_ratio("r", &cfg.r)?,
                intervals_per_requirement: cfg.intervals_per_requirement,
                stages: stages as u64,
                scan_cap: cfg.scan_cap,
            };
            prov = prov.cap("scan_cap", cfg.scan_cap);
            let (state, plan) = run_permitting_construction(&permit, &lib, &pc)?;
            let v = verify_permitting(&state, &plan, &permit, &lib);
            (state, v)
        }
        ConstructionKind::Nonlow => {
            if cfg.probes.is_empty() {
                return Err(config_err("the nonlow construction needs at least one probe"));
            }
            let nc = NonlowConfig {
                interval_cap: cfg.interval_cap,
                ..NonlowConfig::new(stages as u64, cfg.search_cap)
            };
            prov = prov.cap("search_cap", cfg.search_cap).cap("interval_cap", cfg.interval_cap);
            let state = run_nonlow_construction(&permit, &cfg.probes, &lib, &nc)?;
            let v = verify_nonlow(&state, &permit, &lib);
            (state, v)
        }
    };

    let top = state.a_enum.elements().last().map_or(0, |&x| x as usize + 1);
    let a_bits = top.max(stages + 1).min(cfg.run.prefix_cap);
    let a = state.a_prefix(a_bits);
    let estimate = estimate_liminf_limsup(&density_profile(&state.a_prefix(stages + 1))?, tail)?;
    let count = |s: IntervalStatus| state.intervals.iter().filter(|r| r.status == s).count();

    out.write_with("trace.jsonl", |w| state.trace.write_jsonl(w))?;
    out.write_with("a.json", |w| writeln!(w, "{}", state.a_enum.to_json()))?;
    out.bits("a.bin", &a)?;
    out.json("intervals.json", &state.intervals)?;
    out.json("g.json", &state.g.change_points())?;
    out.json("verification.json", &verification)?;
    let result = StageResult {
        construction: cfg.construction,
        stages: stages as u64,
        successes: count(IntervalStatus::Successful),
        cancelled: count(IntervalStatus::Cancelled),
        pending: count(IntervalStatus::Pending),
        elements: state.a_enum.len(),
        trace_events: state.trace.len(),
        cap_limited: state.cap_limited,
        passed: verification.passed(),
        estimate,
        a_bits,
    };
    out.report(&prov, &result)?;
    if !verification.passed() {
        return Err(CliError::Verification(format!(
            "{} violations, first: {}",
            verification.violations.len(),
            verification.violations[0].detail
        )));
    }
    if state.cap_limited {
        return Ok(Outcome::CapLimited("a stage search reached its cap".into()));
    }
    Ok(Outcome::Complete)
}
