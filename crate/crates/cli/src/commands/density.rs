//! `coarse density`: profile, dyadic blocks and window estimate of one generator.

use coarse_core::density::{density_profile, dyadic_densities, estimate_liminf_limsup, exact_density};
use coarse_core::ratio::{self, Density};
use coarse_core::{DensityEstimate, GeneratorDescriptor, GeneratorKind};
use serde::{Deserialize, Serialize};

use super::command_config;
use crate::{CliError, Loaded, OutDir, Outcome, Provenance, RunParams};

pub const DEFAULT_HORIZON: usize = 1 << 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub run: RunParams,
    pub generator: GeneratorDescriptor,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            run: RunParams::default(),
            generator: GeneratorDescriptor::Random { seed: 0, p: "1/2".into() },
        }
    }
}

command_config!(DensityConfig, "density");

#[derive(Debug, Serialize)]
pub struct DensityResult {
    pub kind: GeneratorKind,
    /// Known only for eventually periodic generators.
    #[serde(with = "ratio::serde_opt_str")]
    pub exact_density: Option<Density>,
    #[serde(with = "ratio::serde_str")]
    pub rho_at_horizon: Density,
    pub estimate: DensityEstimate,
    pub dyadic_blocks: u32,
    pub prefix_bits: usize,
}

/// Writes `prefix.bin`, `density.csv`, `dyadic.csv`, `report.json`.
pub fn run(loaded: &Loaded<DensityConfig>, out: &OutDir) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    let horizon = cfg.run.horizon_or(DEFAULT_HORIZON)?;
    let tail = cfg.run.tail_for(horizon)?;
    let g = cfg.generator.resolve(&loaded.base)?;
    let a = g.evaluate_prefix(horizon);
    let profile = density_profile(&a)?;
    let dyadic = dyadic_densities(&a)?;

    out.bits("prefix.bin", &a)?;
    out.write_with("density.csv", |w| profile.write_csv(w))?;
    out.write_with("dyadic.csv", |w| dyadic.write_csv(w))?;
    let result = DensityResult {
        kind: g.kind(),
        exact_density: exact_density(&g),
        rho_at_horizon: profile.rho(horizon),
        estimate: estimate_liminf_limsup(&profile, tail)?,
        dyadic_blocks: dyadic.k_max() + 1,
        prefix_bits: horizon,
    };
    out.report(&Provenance::new(loaded, horizon, tail), &result)?;
    Ok(Outcome::Complete)
}
