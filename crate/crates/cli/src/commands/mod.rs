//! One module per subcommand. Each exposes its config type and a `run`.

pub mod adversary;
pub mod code_decode;
pub mod density;
pub mod spectrum;
pub mod stage;
pub mod trust;

use coarse_core::ratio::{self, Density};
use coarse_core::{GeneratorDescriptor, GeneratorLibrary};
use std::path::Path;

use crate::error::{config_err, CliError};

macro_rules! command_config {
    ($ty:ty, $name:literal) => {
        impl $crate::config::CommandConfig for $ty {
            const NAME: &'static str = $name;
            fn run_params(&self) -> &$crate::config::RunParams {
                &self.run
            }
            fn run_params_mut(&mut self) -> &mut $crate::config::RunParams {
                &mut self.run
            }
        }
    };
}
pub(crate) use command_config;

pub(crate) fn parse_ratio(field: &str, s: &str) -> Result<Density, CliError> {
    ratio::parse(s).map_err(|e| config_err(format!("{field}: {e}")))
}

pub(crate) fn resolve_library(descs: &[GeneratorDescriptor], base: &Path) -> Result<GeneratorLibrary, CliError> {
    Ok(GeneratorLibrary::new(descs.iter().map(|d| d.resolve(base)).collect::<Result<_, _>>()?))
}
