//! Scenario files.
//!
//! A scenario file is TOML. The optional top-level `profile` key picks the
//! base configuration (`"desk"` or `"full"`); every other key overrides the
//! matching field of that base, recursively for nested tables. A `layout`
//! table that names a `kind` replaces the base layout as a whole.

use std::fs;
use std::path::{Path, PathBuf};

use cellcache_core::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot encode configuration: {0}")]
    Encode(#[from] toml::ser::Error),
    #[error("unknown profile {0:?}, expected \"desk\" or \"full\"")]
    UnknownProfile(String),
    #[error("`profile` must be a string")]
    ProfileType,
}

/// Named base configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Full,
}

impl Profile {
    pub fn config(self) -> ScenarioConfig {
        match self {
            Profile::Desk => ScenarioConfig::desk(),
            Profile::Full => ScenarioConfig::full(),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(ConfigError::UnknownProfile(other.to_string())),
        }
    }
}

/// Parses a scenario file. Field validation is left to
/// [`ScenarioConfig::validate`].
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut overrides: toml::Table = text.parse()?;
    let profile = match overrides.remove("profile") {
        None => Profile::Desk,
        Some(toml::Value::String(s)) => s.parse()?,
        Some(_) => return Err(ConfigError::ProfileType),
    };
    let toml::Value::Table(mut base) = toml::Value::try_from(profile.config())? else {
        unreachable!("a struct encodes as a table")
    };
    merge(&mut base, overrides);
    Ok(toml::Value::Table(base).try_into()?)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

/// The full configuration as a scenario file.
pub fn config_to_toml(config: &ScenarioConfig) -> Result<String, ConfigError> {
    Ok(toml::to_string(config)?)
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}
