use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageProgress {
    pub completed: BTreeSet<usize>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub stages: BTreeMap<String, StageProgress>,
}

impl Checkpoint {
    pub fn new(config_hash: String) -> Checkpoint {
        Checkpoint {
            config_hash,
            stages: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Option<Checkpoint>, PipelineError> {
        match fs::read(path) {
            Ok(b) => Ok(Some(serde_json::from_slice(&b).map_err(|e| {
                PipelineError::Data(format!("corrupt checkpoint {}: {e}", path.display()))
            })?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        write_atomic(path, &serde_json::to_vec_pretty(self).expect("checkpoint serializes"))
    }

    pub fn stage(&mut self, name: &str) -> &mut StageProgress {
        self.stages.entry(name.to_string()).or_default()
    }

    pub fn is_done(&self, name: &str) -> bool {
        self.stages.get(name).is_some_and(|s| s.done)
    }

    pub fn is_shard_done(&self, name: &str, shard: usize) -> bool {
        self.stages.get(name).is_some_and(|s| s.completed.contains(&shard))
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
