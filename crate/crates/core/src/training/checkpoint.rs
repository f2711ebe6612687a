//! Model checkpoints: schema-versioned JSON holding parameters and the config
//! needed to reproduce the fold split they were trained on.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::model::ModelParams;

pub const CHECKPOINT_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u64,
    pub config: TrainConfig,
    /// Held-out fold this model never saw.
    pub fold: usize,
    pub n_rois: usize,
    pub params: ModelParams,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u64,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, fold: usize, n_rois: usize, params: ModelParams) -> Self {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config,
            fold,
            n_rois,
            params,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let parse = |e: serde_json::Error| TrainError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        let probe: VersionProbe = serde_json::from_str(text).map_err(parse)?;
        if probe.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(TrainError::UnsupportedVersion {
                found: probe.schema_version,
                supported: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(parse)?;
        ckpt.config.validate()?;
        ckpt.params.validate(crate::graph_data::NUM_FEATURES)?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ckpt() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams::init(10, &[4, 4], 9, 0.5, &mut rng).unwrap();
        Checkpoint::new(TrainConfig::default(), 2, 9, params)
    }

    #[test]
    fn round_trip() {
        let c = ckpt();
        assert_eq!(Checkpoint::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_other_versions_and_garbage() {
        let text = ckpt()
            .to_json()
            .replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(
            Checkpoint::from_json(&text),
            Err(TrainError::UnsupportedVersion { found: 2, .. })
        ));
        assert!(matches!(
            Checkpoint::from_json("{\"schema_version\": 1,"),
            Err(TrainError::Parse { .. })
        ));
    }
}
