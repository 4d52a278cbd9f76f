use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use coarse_core::BitPrefix;
use serde::Serialize;

use crate::config::{CommandConfig, Loaded};
use crate::error::CliError;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "COARSE_OUT_DIR";

pub(crate) fn resolve_out_dir(flag: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("coarse-out"), PathBuf::from);
    root.join(command)
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&root).map_err(|source| CliError::Io { path: root.clone(), source })?;
        Ok(OutDir { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
        let path = self.root.join(name);
        let io_err = |source| CliError::Io { path: path.clone(), source };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        f(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    /// Raw little-endian bits; the bit count is recorded in the report.
    pub fn bits(&self, name: &str, p: &BitPrefix) -> Result<(), CliError> {
        self.write_with(name, |w| w.write_all(&p.to_le_bytes()))
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    /// `report.json`: provenance next to the command's result.
    pub fn report<T: Serialize>(&self, provenance: &Provenance, result: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Report<'a, T> {
            provenance: &'a Provenance,
            result: &'a T,
        }
        self.json("report.json", &Report { provenance, result })
    }
}

/// Everything needed to reproduce or interpret a run's numbers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub horizon: usize,
    pub tail_start: usize,
    pub seed: u64,
    pub caps: BTreeMap<String, u64>,
}

impl Provenance {
    pub fn new<C: CommandConfig>(loaded: &Loaded<C>, horizon: usize, tail_start: usize) -> Self {
        let run = loaded.run();
        let mut caps = BTreeMap::new();
        caps.insert("prefix_cap".to_string(), run.prefix_cap as u64);
        Provenance {
            command: C::NAME.to_string(),
            config_hash: loaded.hash.clone(),
            horizon,
            tail_start,
            seed: run.seed,
            caps,
        }
    }

    pub fn cap(mut self, name: &str, value: u64) -> Self {
        self.caps.insert(name.to_string(), value);
        self
    }
}
