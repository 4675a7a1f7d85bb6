//! Optional TOML overrides for the cache model and energy table.
//!
//! ```toml
//! [cache]
//! l1_size = 32768
//! l2_size = 524288
//! line_size = 64
//! l1_assoc = 8
//! l2_assoc = 16
//!
//! [epi]            # nanojoules per instruction
//! rf = 0.45
//! l1 = 0.88
//! l2 = 7.72
//! mem_rd = 52.14
//! mem_wr = 62.14
//!
//! [energy]
//! scaling = "total_width"   # or "mantissa_only"
//! ```
//!
//! Every key is optional; missing ones keep their defaults.

use std::path::Path;

use dpscale::energy::{EpiTable, ScalingModel};
use dpscale::{CacheConfig, RunSettings};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    cache: CacheConfig,
    epi: EpiTable,
    energy: EnergySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EnergySection {
    scaling: ScalingModel,
}

pub fn parse(text: &str, origin: &Path) -> Result<RunSettings, CliError> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| CliError::Data(format!("{}: {e}", origin.display())))?;
    file.cache
        .validate()
        .map_err(|e| CliError::Data(format!("{}: {e}", origin.display())))?;
    file.epi
        .validate()
        .map_err(|e| CliError::Data(format!("{}: {e}", origin.display())))?;
    Ok(RunSettings {
        cache: file.cache,
        epi: file.epi,
        scaling: file.energy.scaling,
    })
}

pub fn load(path: Option<&Path>) -> Result<RunSettings, CliError> {
    match path {
        None => Ok(RunSettings::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            parse(&text, p)
        }
    }
}
