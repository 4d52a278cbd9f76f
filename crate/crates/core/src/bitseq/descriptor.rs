//! JSON descriptors for generators.
//!
//! ```json
//! {"kind": "periodic", "preamble": "111", "period": "0001"}
//! {"kind": "random", "seed": 7, "p": "1/2"}
//! {"kind": "union", "of": [{"kind": "rn", "n": 1}, {"kind": "evens"}]}
//! {"kind": "table", "path": "bits.bin", "len": 4096}
//! ```
//!
//! Table files hold raw bits in little-endian bit order (bit `i` is bit
//! `i % 8` of byte `i / 8`); relative paths resolve against a base directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generator::{DelayRule, Formula, Generator, PartialGenerator};
use super::prefix::BitPrefix;
use crate::error::{Error, Result};
use crate::ratio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorDescriptor {
    Zeros,
    Ones,
    Evens,
    Odds,
    Periodic {
        #[serde(default)]
        preamble: String,
        period: String,
    },
    Random {
        seed: u64,
        #[serde(default = "half")]
        p: String,
    },
    Rn {
        n: u32,
    },
    RCode {
        set: Vec<u32>,
    },
    Residue {
        modulus: u64,
        residue: u64,
    },
    AffineRange {
        a: u64,
        b: u64,
    },
    Complement {
        of: Box<GeneratorDescriptor>,
    },
    Union {
        of: Vec<GeneratorDescriptor>,
    },
    Intersect {
        of: Vec<GeneratorDescriptor>,
    },
    Table {
        path: PathBuf,
        #[serde(default)]
        len: Option<usize>,
    },
}

fn half() -> String {
    "1/2".to_string()
}

impl GeneratorDescriptor {
    pub fn resolve(&self, base: &Path) -> Result<Generator> {
        use GeneratorDescriptor as D;
        Ok(match self {
            D::Zeros => Generator::zeros(),
            D::Ones => Generator::ones(),
            D::Evens => Generator::evens(),
            D::Odds => Generator::odds(),
            D::Periodic { preamble, period } => Generator::periodic(preamble, period)?,
            D::Random { seed, p } => {
                let p = ratio::parse(p)?;
                Generator::random(*seed, *p.numer(), *p.denom())?
            }
            D::Rn { n } => Generator::rn(*n),
            D::RCode { set } => {
                let mut set = set.clone();
                set.sort_unstable();
                set.dedup();
                Generator::Formula(Formula::RCode(set))
            }
            D::Residue { modulus, residue } => {
                if *modulus == 0 || residue >= modulus {
                    return Err(Error::Descriptor(format!(
                        "residue {residue} mod {modulus} is not a valid class"
                    )));
                }
                Generator::Formula(Formula::Residue {
                    modulus: *modulus,
                    residue: *residue,
                })
            }
            D::AffineRange { a, b } => {
                if *a == 0 {
                    return Err(Error::Descriptor("affine_range needs a >= 1".into()));
                }
                Generator::Formula(Formula::AffineRange { a: *a, b: *b })
            }
            D::Complement { of } => Generator::complement(of.resolve(base)?),
            D::Union { of } => Generator::union(
                of.iter().map(|d| d.resolve(base)).collect::<Result<_>>()?,
            ),
            D::Intersect { of } => Generator::intersect(
                of.iter().map(|d| d.resolve(base)).collect::<Result<_>>()?,
            ),
            D::Table { path, len } => {
                let path = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let bytes = std::fs::read(&path).map_err(|e| {
                    Error::Descriptor(format!("cannot read table {}: {e}", path.display()))
                })?;
                Generator::table(BitPrefix::from_le_bytes(&bytes, *len)?)
            }
        })
    }
}

/// Descriptor for a [`PartialGenerator`].
///
/// ```json
/// {"values": {"kind": "zeros"}, "domain": {"kind": "evens"}, "delay": {"constant": 3}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialDescriptor {
    pub values: GeneratorDescriptor,
    #[serde(default)]
    pub domain: Option<GeneratorDescriptor>,
    #[serde(default)]
    pub delay: DelayRule,
}

impl PartialDescriptor {
    pub fn resolve(&self, base: &Path) -> Result<PartialGenerator> {
        Ok(PartialGenerator::new(
            self.values.resolve(base)?,
            self.domain.as_ref().map(|d| d.resolve(base)).transpose()?,
            self.delay.clone(),
        ))
    }
}
