//! `coarse adversary`: defeat schedule against an opponent library, its
//! re-verification, and optionally the non-extremal assembly on top of `Z`.

use coarse_core::adversary::{
    non_extremal_build, slice_union_density, slices_needed, verify_certificates, weak_generic_defeat,
    witness_q_description, CertificateCheck, DefeatTarget,
};
use coarse_core::density::{gamma_hat, GammaHat};
use coarse_core::ratio::{self, frac, Density};
use coarse_core::{pointwise, GeneratorDescriptor, GeneratorLibrary, SetOp};
use serde::{Deserialize, Serialize};

use super::{command_config, parse_ratio, resolve_library};
use crate::error::config_err;
use crate::{CliError, Loaded, OutDir, Outcome, Provenance, RunParams};

pub const DEFAULT_HORIZON: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonExtremalSpec {
    /// Target density of the slice union `S`.
    pub r: String,
    /// Agreement levels to exhibit witnesses for.
    #[serde(default)]
    pub qs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub run: RunParams,
    pub opponents: Vec<GeneratorDescriptor>,
    pub thresholds: Vec<String>,
    /// Shortest prefix a certificate may speak about.
    pub witness_len: usize,
    pub non_extremal: Option<NonExtremalSpec>,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            run: RunParams::default(),
            opponents: vec![
                GeneratorDescriptor::Zeros,
                GeneratorDescriptor::Evens,
                GeneratorDescriptor::Random { seed: 1, p: "1/2".into() },
            ],
            thresholds: vec!["1/4".into()],
            witness_len: 64,
            non_extremal: None,
        }
    }
}

command_config!(AdversaryConfig, "adversary");

/// Certificates of one target read against the estimation window.
#[derive(Debug, Serialize)]
pub struct ThresholdCheck {
    pub opponent: usize,
    #[serde(with = "ratio::serde_str")]
    pub threshold: Density,
    pub certificates: usize,
    /// Certificates at lengths inside the window.
    pub in_window: usize,
    /// The windowed liminf estimate of `ρ(Z ▽ C_e)` is below the threshold.
    pub estimate_below: bool,
}

#[derive(Debug, Serialize)]
pub struct WitnessRow {
    #[serde(with = "ratio::serde_str")]
    pub q: Density,
    /// Slices the witness copies from the library; `None` if the library is too small.
    pub slices: Option<usize>,
    #[serde(with = "ratio::serde_opt_str")]
    pub slice_density: Option<Density>,
    /// Windowed liminf of the witness's agreement with `A`.
    #[serde(with = "ratio::serde_opt_str")]
    pub agreement_liminf: Option<Density>,
}

/// `ρ_L(A ▽ C_e)` at the certificate length `L` against opponent `e` where it is least.
#[derive(Debug, Serialize)]
pub struct DipRow {
    pub opponent: usize,
    pub at: Option<usize>,
    #[serde(with = "ratio::serde_opt_str")]
    pub agreement: Option<Density>,
    pub below_r: bool,
}

#[derive(Debug, Serialize)]
pub struct NonExtremalResult {
    #[serde(with = "ratio::serde_str")]
    pub r: Density,
    pub a_bits: usize,
    /// Agreement of `A` with each opponent.
    pub gamma_hat: GammaHat,
    pub witnesses: Vec<WitnessRow>,
    pub dips: Vec<DipRow>,
}

#[derive(Debug, Serialize)]
pub struct AdversaryResult {
    pub z_bits: usize,
    pub witness_len: usize,
    pub rounds: usize,
    pub certificates: usize,
    pub uncovered: Vec<DefeatTarget>,
    pub all_certificates_hold: bool,
    pub gamma_hat: GammaHat,
    pub threshold_checks: Vec<ThresholdCheck>,
    pub non_extremal: Option<NonExtremalResult>,
}

/// Writes `z.bin`, `schedule.json`, `verification.json`, `report.json`, and
/// `a.bin` for the non-extremal assembly.
pub fn run(loaded: &Loaded<AdversaryConfig>, out: &OutDir) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    let horizon = cfg.run.horizon_or(DEFAULT_HORIZON)?;
    let tail = cfg.run.tail_for(horizon)?;
    if cfg.opponents.is_empty() {
        return Err(config_err("no opponents"));
    }
    let thresholds: Vec<Density> =
        cfg.thresholds.iter().map(|t| parse_ratio("thresholds", t)).collect::<Result<_, _>>()?;
    let lib = resolve_library(&cfg.opponents, &loaded.base)?;

    let (z, schedule) = weak_generic_defeat(&lib, &thresholds, cfg.witness_len, horizon)?;
    let checks = verify_certificates(&z, &lib, &schedule)?;
    let gh = gamma_hat(&z, &lib, tail)?;
    let threshold_checks = schedule
        .targets
        .iter()
        .map(|t| {
            let certs: Vec<_> = schedule
                .certificates
                .iter()
                .filter(|c| c.opponent == t.opponent && c.threshold == t.threshold)
                .collect();
            ThresholdCheck {
                opponent: t.opponent,
                threshold: t.threshold,
                certificates: certs.len(),
                in_window: certs.iter().filter(|c| c.length >= tail).count(),
                estimate_below: gh.estimates[t.opponent].liminf_est < t.threshold,
            }
        })
        .collect();

    let non_extremal = match &cfg.non_extremal {
        None => None,
        Some(spec) => {
            let r = parse_ratio("non_extremal.r", &spec.r)?;
            let a = non_extremal_build(r, &lib, &z, horizon)?;
            out.bits("a.bin", &a)?;
            let mut witnesses = Vec::new();
            for q in &spec.qs {
                let q = parse_ratio("non_extremal.qs", q)?;
                let n = slices_needed(r, q, lib.len())?;
                let (slice_density, agreement_liminf) = match n {
                    Some(n) => {
                        let w = GeneratorLibrary::new(vec![witness_q_description(r, &lib, n)?]);
                        let est = gamma_hat(&a, &w, tail)?;
                        (Some(slice_union_density(r, n)?), Some(est.value))
                    }
                    None => (None, None),
                };
                witnesses.push(WitnessRow { q, slices: n, slice_density, agreement_liminf });
            }
            let mut dips = Vec::new();
            for (e, c) in lib.iter().enumerate() {
                let agree = pointwise(SetOp::SymAgree, &a, &c.evaluate_prefix(a.len()))?;
                let best = schedule
                    .certificates_for(e)
                    .map(|cert| (cert.length, frac(agree.rank(cert.length) as u64, cert.length as u64)))
                    .min_by(|x, y| x.1.cmp(&y.1));
                dips.push(DipRow {
                    opponent: e,
                    at: best.map(|b| b.0),
                    agreement: best.map(|b| b.1),
                    below_r: best.is_some_and(|b| b.1 < r),
                });
            }
            let gamma_hat = gamma_hat(&a, &lib, tail)?;
            Some(NonExtremalResult { r, a_bits: a.len(), gamma_hat, witnesses, dips })
        }
    };

    out.bits("z.bin", &z)?;
    out.json("schedule.json", &schedule)?;
    out.json("verification.json", &checks)?;
    let all_hold = checks.iter().all(|c: &CertificateCheck| c.holds);
    let result = AdversaryResult {
        z_bits: z.len(),
        witness_len: cfg.witness_len,
        rounds: schedule.rounds,
        certificates: schedule.certificates.len(),
        uncovered: schedule.uncovered.clone(),
        all_certificates_hold: all_hold,
        gamma_hat: gh,
        threshold_checks,
        non_extremal,
    };
    out.report(&Provenance::new(loaded, horizon, tail), &result)?;
    if !all_hold {
        return Err(CliError::Verification("a certificate failed re-verification".into()));
    }
    if !schedule.uncovered.is_empty() {
        return Ok(Outcome::CapLimited(format!(
            "{} targets have no certificate below horizon {horizon}",
            schedule.uncovered.len()
        )));
    }
    Ok(Outcome::Complete)
}
