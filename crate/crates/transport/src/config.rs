use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("speed must be positive and finite, got {0}")]
    Speed(f64),
}

/// Server settings, read from TOML:
///
/// ```toml
/// library = "library"
/// listen = "127.0.0.1:8080"
/// default_seed = 42
/// speed = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub library: PathBuf,
    pub listen: String,
    /// Seed for sessions that do not ask for one; `None` keeps the song's.
    pub default_seed: Option<u64>,
    /// Playback rate multiplier; 2.0 plays bars twice as fast.
    pub speed: f64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            library: PathBuf::from("library"),
            listen: "127.0.0.1:8080".into(),
            default_seed: None,
            speed: 1.0,
        }
    }
}

impl ServeConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        let cfg: ServeConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(ConfigError::Speed(self.speed));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("serve.toml");
        std::fs::write(&p, "default_seed = 9\nspeed = 4.0\n").unwrap();
        let cfg = ServeConfig::load(&p).unwrap();
        assert_eq!(cfg.default_seed, Some(9));
        assert_eq!(cfg.speed, 4.0);
        assert_eq!(cfg.listen, "127.0.0.1:8080");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_speed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("serve.toml");
        std::fs::write(&p, "port = 1\n").unwrap();
        assert!(matches!(ServeConfig::load(&p), Err(ConfigError::Parse { .. })));
        std::fs::write(&p, "speed = 0.0\n").unwrap();
        assert!(matches!(ServeConfig::load(&p), Err(ConfigError::Speed(_))));
    }
}
