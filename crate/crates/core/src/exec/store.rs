//! Write-once on-disk checkpoint store.
//!
//! Layout under the store root:
//!
//! ```text
//! <species>/<stixel-id>.result   one JSON-encoded TaskResult per finished task
//! manifest.csv                   task_id,attempts,cpu_seconds
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plan::TaskId;
use super::ExecError;
use crate::model::TrainOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: TaskId,
    pub outcome: TrainOutcome,
    /// CPU seconds of the attempt that produced this result.
    pub cpu_seconds: f64,
    /// Digest of the task spec the result was computed from.
    pub spec_digest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManifestEntry {
    pub attempts: u32,
    /// CPU seconds over every attempt, including preempted ones.
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutOutcome {
    Written,
    AlreadyPresent,
}

#[derive(Debug, Clone)]
pub struct CheckpointStore {
    root: PathBuf,
}

pub const MANIFEST_HEADER: &str = "task_id,attempts,cpu_seconds";

impl CheckpointStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ExecError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| ExecError::store(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn result_path(&self, task: &TaskId) -> PathBuf {
        self.root.join(task.species.as_str()).join(format!("{}.result", task.stixel))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.csv")
    }

    pub fn get(&self, task: &TaskId) -> Result<Option<TaskResult>, ExecError> {
        let path = self.result_path(task);
        match fs::read(&path) {
            Ok(bytes) => {
                let r: TaskResult = serde_json::from_slice(&bytes)
                    .map_err(|e| ExecError::Corrupt { path: path.clone(), message: e.to_string() })?;
                if &r.task != task {
                    return Err(ExecError::Corrupt { path, message: format!("holds result for {}", r.task) });
                }
                Ok(Some(r))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ExecError::store(&path, e)),
        }
    }

    pub fn contains(&self, task: &TaskId) -> bool {
        self.result_path(task).is_file()
    }

    /// Commit a result. Re-committing an identical result is a no-op; a
    /// different result for a stored task id is refused.
    pub fn put(&self, result: &TaskResult) -> Result<PutOutcome, ExecError> {
        let path = self.result_path(&result.task);
        let bytes = serde_json::to_vec(result).expect("task result serialization cannot fail");
        if let Some(existing) = self.get(&result.task)? {
            if existing == *result {
                return Ok(PutOutcome::AlreadyPresent);
            }
            return Err(ExecError::StoreConflict(result.task.to_string()));
        }
        let dir = path.parent().expect("result path has a parent");
        fs::create_dir_all(dir).map_err(|e| ExecError::store(dir, e))?;
        let tmp = path.with_extension("result.tmp");
        fs::write(&tmp, &bytes).map_err(|e| ExecError::store(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ExecError::store(&path, e))?;
        Ok(PutOutcome::Written)
    }

    pub fn read_manifest(&self) -> Result<BTreeMap<String, ManifestEntry>, ExecError> {
        let path = self.manifest_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
            Err(e) => return Err(ExecError::store(&path, e)),
        };
        let corrupt = |message: String| ExecError::Corrupt { path: path.clone(), message };
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(corrupt("bad manifest header".into()));
        }
        let mut out = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            let [task, attempts, cpu] = fields[..] else {
                return Err(corrupt(format!("line {}: expected 3 fields", n + 2)));
            };
            let entry = ManifestEntry {
                attempts: attempts.parse().map_err(|_| corrupt(format!("line {}: bad attempts", n + 2)))?,
                cpu_seconds: cpu.parse().map_err(|_| corrupt(format!("line {}: bad cpu_seconds", n + 2)))?,
            };
            out.insert(task.to_string(), entry);
        }
        Ok(out)
    }

    pub fn write_manifest(&self, entries: &BTreeMap<String, ManifestEntry>) -> Result<(), ExecError> {
        let path = self.manifest_path();
        let tmp = path.with_extension("csv.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| ExecError::store(&tmp, e))?;
        let mut text = String::from(MANIFEST_HEADER);
        text.push('\n');
        for (task, e) in entries {
            text.push_str(&format!("{task},{},{}\n", e.attempts, e.cpu_seconds));
        }
        f.write_all(text.as_bytes()).map_err(|e| ExecError::store(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, &path).map_err(|e| ExecError::store(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SpeciesId;
    use crate::model::StixelId;

    fn task(col: u32) -> TaskId {
        TaskId { species: SpeciesId::new("sp").unwrap(), stixel: StixelId { layer: 0, row: 1, col, window: 2 } }
    }

    fn result(col: u32, n: usize) -> TaskResult {
        TaskResult {
            task: task(col),
            outcome: TrainOutcome::InsufficientData { stixel: task(col).stixel, n_train: n },
            cpu_seconds: 2.5,
            spec_digest: 7,
        }
    }

    #[test]
    fn write_once_semantics() {
        let dir = tempfile::tempdir().unwrap();
        let store = CheckpointStore::open(dir.path()).unwrap();
        assert_eq!(store.get(&task(0)).unwrap(), None);
        assert_eq!(store.put(&result(0, 3)).unwrap(), PutOutcome::Written);
        assert!(store.result_path(&task(0)).ends_with("sp/L0-r1-c0-w2.result"));
        assert_eq!(store.put(&result(0, 3)).unwrap(), PutOutcome::AlreadyPresent);
        assert!(matches!(store.put(&result(0, 4)), Err(ExecError::StoreConflict(_))));
        assert_eq!(store.get(&task(0)).unwrap(), Some(result(0, 3)));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = CheckpointStore::open(dir.path()).unwrap();
        assert!(store.read_manifest().unwrap().is_empty());
        let mut m = BTreeMap::new();
        m.insert(task(0).to_string(), ManifestEntry { attempts: 2, cpu_seconds: 3.25 });
        m.insert(task(1).to_string(), ManifestEntry { attempts: 1, cpu_seconds: 0.1 + 0.2 });
        store.write_manifest(&m).unwrap();
        let text = std::fs::read_to_string(store.manifest_path()).unwrap();
        assert!(text.starts_with("task_id,attempts,cpu_seconds\nsp/L0-r1-c0-w2,2,3.25\n"));
        assert_eq!(store.read_manifest().unwrap(), m);
    }

    #[test]
    fn corrupt_result_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = CheckpointStore::open(dir.path()).unwrap();
        let path = store.result_path(&task(0));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, b"{not json").unwrap();
        assert!(matches!(store.get(&task(0)), Err(ExecError::Corrupt { .. })));
    }
}
