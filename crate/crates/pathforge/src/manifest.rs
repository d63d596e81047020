//! Run manifests: a record of what produced an output directory, with a
//! deterministic hash of the canonicalized inputs. The timestamp is the only
//! field allowed to differ between identical runs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::Model;
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: String,
    pub scenario: String,
    pub command: String,
    /// SHA-256 over the canonical JSON of the resolved model plus the
    /// command arguments; identical inputs give identical hashes.
    pub config_hash: String,
    pub tool_version: String,
    /// Unix seconds; excluded from determinism comparisons.
    pub created_unix: u64,
    pub outputs: Vec<String>,
}

/// Hashes the resolved model (scenario overrides already applied) together
/// with the command-line arguments that shape the run.
pub fn config_hash(model: &Model, command: &str, args: &[(&str, String)]) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(model)?);
    hasher.update(command.as_bytes());
    for (k, v) in args {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b";");
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new(
        dataset: &Path,
        scenario: &str,
        command: &str,
        model: &Model,
        args: &[(&str, String)],
    ) -> Result<Self> {
        Ok(RunManifest {
            dataset: dataset.display().to_string(),
            scenario: scenario.to_string(),
            command: command.to_string(),
            config_hash: config_hash(model, command, args)?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::tiny_model;

    #[test]
    fn hash_is_deterministic_and_input_sensitive() {
        let model = tiny_model();
        let args = [("seed", "42".to_string())];
        let a = config_hash(&model, "pathway", &args).unwrap();
        let b = config_hash(&model, "pathway", &args).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);

        let mut changed = model.clone();
        changed.scenario.seed = 43;
        assert_ne!(a, config_hash(&changed, "pathway", &args).unwrap());
        assert_ne!(a, config_hash(&model, "analyze", &args).unwrap());
        assert_ne!(
            a,
            config_hash(&model, "pathway", &[("seed", "7".to_string())]).unwrap()
        );
    }
}
