//! Run configuration: command-line flags over a JSON config file over the
//! `KWS_DATA_DIR` environment variable over built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::command::StreamConfig;
use crate::train::{AdamConfig, AugmentConfig, TrainConfig};
use crate::Error;

pub const DATA_DIR_ENV: &str = "KWS_DATA_DIR";

/// One layer of settings; `None` means "not set here". Config files use
/// the flag names (`batch-size`, `hop-ms`, ...).
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigLayer {
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub no_augment: Option<bool>,
    pub no_balance: Option<bool>,
    pub no_timing: Option<bool>,
    pub threshold: Option<f32>,
    pub hop_ms: Option<u64>,
    pub refractory_ms: Option<u64>,
    pub gesture_table: Option<PathBuf>,
}

macro_rules! pick {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        ConfigLayer { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl ConfigLayer {
    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        pick!(
            self, lower, data_dir, out, epochs, batch_size, lr, seed, no_augment, no_balance, no_timing, threshold,
            hop_ms, refractory_ms, gesture_table
        )
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_env_value(data_dir: Option<String>) -> Self {
        ConfigLayer {
            data_dir: data_dir.filter(|d| !d.is_empty()).map(PathBuf::from),
            ..Default::default()
        }
    }

    pub fn from_env() -> Self {
        Self::from_env_value(std::env::var(DATA_DIR_ENV).ok())
    }
}

/// Fully resolved settings; every field has a value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub augment: bool,
    pub balance_unknown: bool,
    pub record_timing: bool,
    pub threshold: f32,
    pub hop_ms: u64,
    pub refractory_ms: u64,
    pub gesture_table: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_layer(ConfigLayer::default())
    }
}

impl RunConfig {
    pub fn from_layer(l: ConfigLayer) -> Self {
        let train = TrainConfig::default();
        let stream = StreamConfig::default();
        RunConfig {
            data_dir: l.data_dir,
            out: l.out,
            epochs: l.epochs.unwrap_or(train.epochs),
            batch_size: l.batch_size.unwrap_or(train.batch_size),
            lr: l.lr.unwrap_or(train.adam.lr),
            seed: l.seed.unwrap_or(train.seed),
            augment: !l.no_augment.unwrap_or(false),
            balance_unknown: !l.no_balance.unwrap_or(false),
            record_timing: !l.no_timing.unwrap_or(false),
            threshold: l.threshold.unwrap_or(stream.decision_threshold),
            hop_ms: l.hop_ms.unwrap_or(stream.hop_ms),
            refractory_ms: l.refractory_ms.unwrap_or(stream.refractory_ms),
            gesture_table: l.gesture_table,
        }
    }

    /// Merges flags > file > environment > defaults.
    pub fn resolve(flags: ConfigLayer, file: Option<ConfigLayer>, env: ConfigLayer) -> Self {
        RunConfig::from_layer(flags.over(file.unwrap_or_default()).over(env))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            adam: AdamConfig {
                lr: self.lr,
                ..Default::default()
            },
            augment: self.augment.then(AugmentConfig::default),
            balance_unknown: self.balance_unknown,
            dropout: true,
            record_timing: self.record_timing,
            out_dir: self.out.clone(),
        }
    }

    pub fn stream_config(&self) -> StreamConfig {
        StreamConfig {
            hop_ms: self.hop_ms,
            decision_threshold: self.threshold,
            refractory_ms: self.refractory_ms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.seed), (90, 64, 17));
        assert_eq!(c.lr, 1e-3);
        assert!(c.augment && c.balance_unknown && c.record_timing);
        assert_eq!(c.stream_config(), StreamConfig::default());
    }

    #[test]
    fn flag_beats_file_beats_env() {
        let flags = ConfigLayer {
            seed: Some(1),
            ..Default::default()
        };
        let file = ConfigLayer::from_json(r#"{"seed": 2, "epochs": 5, "data-dir": "/file"}"#).unwrap();
        let env = ConfigLayer::from_env_value(Some("/env".into()));
        let c = RunConfig::resolve(flags.clone(), Some(file), env.clone());
        assert_eq!((c.seed, c.epochs), (1, 5));
        assert_eq!(c.data_dir.as_deref(), Some(Path::new("/file")));

        let c = RunConfig::resolve(flags, None, env);
        assert_eq!(c.data_dir.as_deref(), Some(Path::new("/env")));
        assert_eq!(c.epochs, 90);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigLayer::from_json(r#"{"batch_size": 3}"#).is_err());
        assert_eq!(ConfigLayer::from_json(r#"{"batch-size": 3}"#).unwrap().batch_size, Some(3));
    }
}
