use std::path::{Path, PathBuf};

use coarse_core::bitseq::DEFAULT_PREFIX_CAP;
use coarse_core::density::default_tail;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, CliError};

/// Parameters shared by every command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    /// Prefix length (stage count for `stage`); each command has its own default.
    pub horizon: Option<usize>,
    /// First index of the estimation window; `horizon / 2` when absent.
    pub tail_start: Option<usize>,
    pub seed: u64,
    /// Largest prefix any command may materialize.
    pub prefix_cap: usize,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            horizon: None,
            tail_start: None,
            seed: 0,
            prefix_cap: DEFAULT_PREFIX_CAP,
        }
    }
}

impl RunParams {
    /// The horizon, or `default`, checked against `1..=prefix_cap`.
    pub fn horizon_or(&self, default: usize) -> Result<usize, CliError> {
        let n = self.horizon.unwrap_or(default);
        if n == 0 {
            return Err(config_err("horizon must be positive"));
        }
        if n > self.prefix_cap {
            return Err(config_err(format!("horizon {n} exceeds the prefix cap {}", self.prefix_cap)));
        }
        Ok(n)
    }

    pub fn tail_for(&self, horizon: usize) -> Result<usize, CliError> {
        let t = self.tail_start.unwrap_or_else(|| default_tail(horizon));
        if t == 0 || t > horizon {
            return Err(config_err(format!("tail_start {t} outside [1, {horizon}]")));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub horizon: Option<usize>,
    pub tail_start: Option<usize>,
    pub seed: Option<u64>,
}

pub trait CommandConfig: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;
    fn run_params(&self) -> &RunParams;
    fn run_params_mut(&mut self) -> &mut RunParams;
}

/// A resolved config: file contents plus overrides.
#[derive(Debug, Clone)]
pub struct Loaded<C> {
    pub config: C,
    /// Directory relative descriptor paths resolve against.
    pub base: PathBuf,
    /// SHA-256 of the command name and the resolved config, hex.
    pub hash: String,
}

impl<C: CommandConfig> Loaded<C> {
    pub fn run(&self) -> &RunParams {
        self.config.run_params()
    }
}

pub fn load<C: CommandConfig>(path: Option<&Path>, ov: &Overrides) -> Result<Loaded<C>, CliError> {
    let (mut config, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
            let c: C = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (c, base)
        }
        None => (C::default(), PathBuf::new()),
    };
    let run = config.run_params_mut();
    if ov.horizon.is_some() {
        run.horizon = ov.horizon;
    }
    if ov.tail_start.is_some() {
        run.tail_start = ov.tail_start;
    }
    if let Some(s) = ov.seed {
        run.seed = s;
    }
    let hash = config_hash(C::NAME, &config);
    Ok(Loaded { config, base, hash })
}

pub fn config_hash<C: Serialize>(name: &str, config: &C) -> String {
    let body = serde_json::to_vec(&serde_json::json!({ "command": name, "config": config }))
        .expect("configs serialize");
    hex::encode(Sha256::digest(&body))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct Toy {
        run: RunParams,
        k: u32,
    }

    impl CommandConfig for Toy {
        const NAME: &'static str = "toy";
        fn run_params(&self) -> &RunParams {
            &self.run
        }
        fn run_params_mut(&mut self) -> &mut RunParams {
            &mut self.run
        }
    }

    #[test]
    fn overrides_change_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("toy.json");
        std::fs::write(&p, r#"{"run": {"horizon": 64}, "k": 3}"#).unwrap();
        let a = load::<Toy>(Some(&p), &Overrides::default()).unwrap();
        assert_eq!(a.config.run.horizon, Some(64));
        assert_eq!(a.base, dir.path());
        let b = load::<Toy>(Some(&p), &Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_eq!(b.config.run.seed, 9);
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, load::<Toy>(Some(&p), &Overrides::default()).unwrap().hash);
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("toy.json");
        std::fs::write(&p, r#"{"run": {"horizn": 64}}"#).unwrap();
        let e = load::<Toy>(Some(&p), &Overrides::default()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn horizon_and_tail_bounds() {
        let r = RunParams { prefix_cap: 100, ..Default::default() };
        assert_eq!(r.horizon_or(50).unwrap(), 50);
        assert!(r.horizon_or(101).is_err());
        assert!(r.horizon_or(0).is_err());
        assert_eq!(r.tail_for(50).unwrap(), 25);
        let r = RunParams { tail_start: Some(60), ..r };
        assert!(r.tail_for(50).is_err());
    }
}
