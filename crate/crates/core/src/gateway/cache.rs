use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::prompt_digest;

/// One persisted response, stored as a JSONL line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub model_id: String,
    pub prompt_hash: String,
    pub raw: String,
}

type Key = (String, String);

/// Completion cache keyed by (model id, prompt hash). Optionally backed by
/// `<dir>/responses.jsonl`, appended on insert.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: Mutex<HashMap<Key, String>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl ResponseCache {
    pub const FILE_NAME: &'static str = "responses.jsonl";

    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (creating if needed) the on-disk cache in `dir`. Unreadable lines are skipped.
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(Self::FILE_NAME);
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) => {
                        entries.entry((e.model_id, e.prompt_hash)).or_insert(e.raw);
                    }
                    Err(err) => tracing::warn!(%err, "skipping corrupt cache line"),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            entries: Mutex::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model_id: &str, prompt: &str) -> Option<String> {
        self.get_by_hash(model_id, &prompt_digest(prompt))
    }

    pub fn get_by_hash(&self, model_id: &str, prompt_hash: &str) -> Option<String> {
        self.entries
            .lock()
            .expect("cache lock")
            .get(&(model_id.to_string(), prompt_hash.to_string()))
            .cloned()
    }

    /// Store a response. Re-inserting a known key is a no-op.
    pub fn insert(&self, model_id: &str, prompt: &str, raw: &str) -> io::Result<()> {
        let prompt_hash = prompt_digest(prompt);
        let key = (model_id.to_string(), prompt_hash.clone());
        {
            let mut entries = self.entries.lock().expect("cache lock");
            if entries.contains_key(&key) {
                return Ok(());
            }
            entries.insert(key, raw.to_string());
        }
        if let Some(file) = &self.file {
            let entry = CacheEntry {
                model_id: model_id.to_string(),
                prompt_hash,
                raw: raw.to_string(),
            };
            let mut line = serde_json::to_vec(&entry).expect("cache entry encodes");
            line.push(b'\n');
            file.lock().expect("cache file lock").write_all(&line)?;
        }
        Ok(())
    }
}
