//! `coarse spectrum`: pushes `A` and a library through a monotone map and
//! compares the agreement spectra before and after.

use std::io::Write;

use coarse_core::codings::{spectrum_transform, MonotoneMap, MonotoneMapDescriptor};
use coarse_core::density::{gamma_hat, prefix_density, GammaHat};
use coarse_core::ratio::{self, frac, Density};
use coarse_core::{BitPrefix, Generator, GeneratorDescriptor, GeneratorLibrary};
use serde::{Deserialize, Serialize};

use super::{command_config, resolve_library};
use crate::error::config_err;
use crate::{CliError, Loaded, OutDir, Outcome, Provenance, RunParams};

pub const DEFAULT_HORIZON: usize = 1 << 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// `horizon` and `tail_start` refer to the image side.
    pub run: RunParams,
    pub a: GeneratorDescriptor,
    pub map: MonotoneMapDescriptor,
    pub library: Vec<GeneratorDescriptor>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            run: RunParams::default(),
            a: GeneratorDescriptor::Random { seed: 0, p: "1/2".into() },
            map: MonotoneMapDescriptor::Affine { a: 2, b: 0 },
            library: vec![
                GeneratorDescriptor::Zeros,
                GeneratorDescriptor::Evens,
                GeneratorDescriptor::Random { seed: 1, p: "1/2".into() },
                GeneratorDescriptor::Random { seed: 2, p: "1/4".into() },
            ],
        }
    }
}

command_config!(SpectrumConfig, "spectrum");

#[derive(Debug, Serialize)]
pub struct SpectrumResult {
    /// Density of `range(h)`: exact for affine maps, else `ρ_N(range h)`.
    #[serde(with = "ratio::serde_str")]
    pub s: Density,
    pub s_exact: bool,
    pub a_bits: usize,
    pub a_tail_start: usize,
    pub gamma_a: GammaHat,
    pub gamma_b: GammaHat,
    /// `s · γ̂(A) + (1 - s)`.
    #[serde(with = "ratio::serde_str")]
    pub predicted: Density,
    /// `|γ̂(B) - predicted|` as a float.
    pub deviation: f64,
}

/// Writes `a.bin`, `b.bin`, `gamma.csv`, `report.json`.
pub fn run(loaded: &Loaded<SpectrumConfig>, out: &OutDir) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    let horizon = cfg.run.horizon_or(DEFAULT_HORIZON)?;
    let tail = cfg.run.tail_for(horizon)?;
    if cfg.library.is_empty() {
        return Err(config_err("the library is empty"));
    }
    let h = cfg.map.resolve(&loaded.base)?;
    let range = h.range_generator();
    let preimage = |u: usize| {
        h.least_preimage(u as u64).map(|g| g as usize).ok_or_else(|| {
            CliError::Precondition(format!("the map's table ends below position {u}"))
        })
    };
    let a_len = preimage(horizon)?;
    if a_len == 0 {
        return Err(CliError::Precondition(format!("no element of range h lies below {horizon}")));
    }
    // the preimage of the image window, so both estimates read the same stretch of A
    let a_tail = preimage(tail)?.clamp(1, a_len);

    let (s, s_exact) = match &h {
        MonotoneMap::Affine { a, .. } => (frac(1, *a), true),
        _ => (prefix_density(&range.evaluate_prefix(horizon), horizon)?, false),
    };

    let lib = resolve_library(&cfg.library, &loaded.base)?;
    let transform = |x: &BitPrefix| spectrum_transform(x, &h, &range, horizon);
    let a = cfg.a.resolve(&loaded.base)?.evaluate_prefix(a_len);
    let b = transform(&a)?;
    let lib_hat = GeneratorLibrary::new(
        lib.iter()
            .map(|c| transform(&c.evaluate_prefix(a_len)).map(Generator::table))
            .collect::<Result<_, _>>()?,
    );
    let gamma_a = gamma_hat(&a, &lib, a_tail)?;
    let gamma_b = gamma_hat(&b, &lib_hat, tail)?;
    let shift = |g: Density| s * g + (frac(1, 1) - s);
    let predicted = shift(gamma_a.value);

    out.bits("a.bin", &a)?;
    out.bits("b.bin", &b)?;
    out.write_with("gamma.csv", |w| {
        writeln!(w, "e,liminf_a,liminf_b,predicted_b")?;
        for (e, (ea, eb)) in gamma_a.estimates.iter().zip(&gamma_b.estimates).enumerate() {
            let p = shift(ea.liminf_est);
            writeln!(w, "{e},{},{},{}", ea.liminf_est, eb.liminf_est, p)?;
        }
        Ok(())
    })?;
    let deviation = (ratio::to_f64(&gamma_b.value) - ratio::to_f64(&predicted)).abs();
    let result = SpectrumResult { s, s_exact, a_bits: a_len, a_tail_start: a_tail, gamma_a, gamma_b, predicted, deviation };
    out.report(&Provenance::new(loaded, horizon, tail), &result)?;
    Ok(Outcome::Complete)
}
