//! `coarse code-decode`: factorial-interval code of `A`, seeded corruption,
//! majority decoding and a per-block correctness table.

use std::collections::BTreeMap;

use coarse_core::codings::{factorial, interval_code};
use coarse_core::decoders::{block_table, corrupt_blocks, decode_prefix, required_code_len, BlockDecode};
use coarse_core::density::prefix_density;
use coarse_core::ratio::{self, frac, Density};
use coarse_core::{pointwise, GeneratorDescriptor, SetOp};
use serde::{Deserialize, Serialize};

use super::{command_config, parse_ratio};
use crate::error::config_err;
use crate::{CliError, Loaded, OutDir, Outcome, Provenance, RunParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Corruption {
    None,
    /// `floor(density · size)` flips in every block.
    Uniform { density: String },
    /// Per-block densities keyed by block index; other blocks are left intact.
    Blocks { densities: BTreeMap<String, String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeDecodeConfig {
    /// `horizon` defaults to `(n_max + 1)!`, the shortest decodable code.
    pub run: RunParams,
    pub a: GeneratorDescriptor,
    pub n_max: u32,
    pub corruption: Corruption,
    /// Reference set for the agreement rows of the report.
    pub compare: Option<GeneratorDescriptor>,
}

impl Default for CodeDecodeConfig {
    fn default() -> Self {
        CodeDecodeConfig {
            run: RunParams::default(),
            a: GeneratorDescriptor::Random { seed: 0, p: "1/2".into() },
            n_max: 6,
            corruption: Corruption::None,
            compare: None,
        }
    }
}

command_config!(CodeDecodeConfig, "code-decode");

/// `ρ_{(n+1)!}(I(A) ▽ C)` next to the bound `(1 + 1/(n+1)) / 2`.
#[derive(Debug, Serialize)]
pub struct AgreementRow {
    pub n: u32,
    pub length: u64,
    #[serde(with = "ratio::serde_str")]
    pub agreement: Density,
    #[serde(with = "ratio::serde_str")]
    pub bound: Density,
    pub within_bound: bool,
}

#[derive(Debug, Serialize)]
pub struct CodeDecodeResult {
    pub n_max: u32,
    pub required_len: u64,
    pub code_len: usize,
    /// Flips per block `1..=n_max`.
    pub flips: Vec<usize>,
    /// `A ↾ [0, n_max]` and its decoding, as bit strings; bit 0 is 0 in both.
    pub expected: String,
    pub decoded: String,
    pub incorrect_blocks: Vec<u32>,
    pub recovered: bool,
    pub agreement: Vec<AgreementRow>,
}

fn flip_densities(c: &Corruption, n_max: u32) -> Result<Vec<Density>, CliError> {
    let mut out = vec![frac(0, 1); n_max as usize + 1];
    match c {
        Corruption::None => {}
        Corruption::Uniform { density } => {
            let d = parse_ratio("corruption.density", density)?;
            out.iter_mut().for_each(|x| *x = d);
        }
        Corruption::Blocks { densities } => {
            for (key, d) in densities {
                let n: u32 = key.parse().map_err(|_| config_err(format!("corruption block {key:?} is not a number")))?;
                if n == 0 || n > n_max {
                    return Err(config_err(format!("corruption block {n} outside [1, {n_max}]")));
                }
                out[n as usize] = parse_ratio("corruption.densities", d)?;
            }
        }
    }
    if let Some(d) = out.iter().find(|d| **d > frac(1, 1)) {
        return Err(config_err(format!("corruption density {d} above 1")));
    }
    Ok(out)
}

/// Writes `a.bin`, `code.bin`, `corrupted.bin`, `decoded.bin`, `blocks.csv`, `report.json`.
pub fn run(loaded: &Loaded<CodeDecodeConfig>, out: &OutDir) -> Result<Outcome, CliError> {
    let cfg = &loaded.config;
    if cfg.n_max == 0 {
        return Err(config_err("n_max must be positive"));
    }
    let required = required_code_len(cfg.n_max)
        .filter(|&r| r <= cfg.run.prefix_cap as u64)
        .ok_or_else(|| config_err(format!("({} + 1)! exceeds the prefix cap", cfg.n_max)))?;
    let horizon = cfg.run.horizon_or(required as usize)?;
    if (horizon as u64) < required {
        return Err(CliError::Precondition(format!(
            "horizon {horizon} is below ({} + 1)! = {required}, the code length needed to decode blocks 1..={}",
            cfg.n_max, cfg.n_max
        )));
    }
    let tail = cfg.run.tail_for(horizon)?;
    let densities = flip_densities(&cfg.corruption, cfg.n_max)?;
    let a = cfg.a.resolve(&loaded.base)?;
    let compare = cfg.compare.as_ref().map(|c| c.resolve(&loaded.base)).transpose()?;

    let code = interval_code(&a, horizon)?;
    let mut flips = Vec::new();
    let corrupted = corrupt_blocks(&code, cfg.n_max, cfg.run.seed, |n, size| {
        let d = densities[n as usize];
        let k = (*d.numer() as u128 * size as u128 / *d.denom() as u128) as usize;
        flips.push(k);
        k
    })?;
    let decoded = decode_prefix(&corrupted, cfg.n_max)?;
    let table = block_table(&corrupted, cfg.n_max, Some(&a))?;
    let expected = a.evaluate_prefix(cfg.n_max as usize + 1);
    let mut expected_bits = expected.clone();
    expected_bits.set(0, false);

    let mut agreement = Vec::new();
    if let Some(c) = &compare {
        let agree = pointwise(SetOp::SymAgree, &code, &c.evaluate_prefix(horizon))?;
        for n in 1.. {
            let Some(len) = factorial(n + 1).filter(|&l| l <= horizon as u64) else { break };
            let rho = prefix_density(&agree, len as usize)?;
            let bound = frac(n as u64 + 2, 2 * (n as u64 + 1));
            agreement.push(AgreementRow { n, length: len, agreement: rho, bound, within_bound: rho <= bound });
        }
    }

    out.bits("a.bin", &expected)?;
    out.bits("code.bin", &code)?;
    out.bits("corrupted.bin", &corrupted)?;
    out.bits("decoded.bin", &decoded)?;
    out.write_with("blocks.csv", |w| write_blocks(w, &table))?;
    let incorrect_blocks: Vec<u32> = table.iter().filter(|b| b.correct == Some(false)).map(|b| b.n).collect();
    let result = CodeDecodeResult {
        n_max: cfg.n_max,
        required_len: required,
        code_len: horizon,
        flips,
        expected: expected_bits.to_string(),
        decoded: decoded.to_string(),
        recovered: incorrect_blocks.is_empty(),
        incorrect_blocks,
        agreement,
    };
    out.report(&Provenance::new(loaded, horizon, tail), &result)?;
    Ok(Outcome::Complete)
}

fn write_blocks(w: &mut impl std::io::Write, table: &[BlockDecode]) -> std::io::Result<()> {
    let opt = |b: Option<bool>| b.map_or(String::new(), |b| (b as u8).to_string());
    writeln!(w, "n,start,size,ones,decoded,expected,correct")?;
    for b in table {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            b.n,
            b.start,
            b.size,
            b.ones,
            b.decoded as u8,
            opt(b.expected),
            opt(b.correct)
        )?;
    }
    Ok(())
}
