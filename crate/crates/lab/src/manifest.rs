use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Fully resolved settings, defaults included.
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    /// Output file names, relative to the manifest.
    pub outputs: Vec<String>,
    pub duration_secs: f64,
    /// Worker cap in effect; outputs do not depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| LabError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            subcommand: "bias".into(),
            config: BTreeMap::from([("n".to_string(), "20".to_string())]),
            seed: 7,
            version: "0.1.0".into(),
            outputs: vec!["bias.csv".into()],
            duration_secs: 0.25,
            threads: None,
        };
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }
}
