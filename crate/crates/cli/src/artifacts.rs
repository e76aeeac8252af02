//! Versioned JSON artifacts and their on-disk layout.

use std::fs;
use std::path::{Path, PathBuf};

use drugsense::{FeatureSet, Tissue};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const ARTIFACT_VERSION: u32 = 1;

/// Envelope shared by every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub version: u32,
    pub config_digest: String,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Deserialize)]
struct Header {
    version: u32,
    config_digest: String,
}

/// Output directory layout: `<out>/<tissue>/<feature slug>/...`.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tissue(&self, tissue: &Tissue) -> PathBuf {
        self.root.join(tissue.code())
    }

    pub fn cell(&self, tissue: &Tissue, fs: FeatureSet) -> PathBuf {
        self.tissue(tissue).join(fs.slug())
    }
}

/// Write `bytes` unless the file already holds exactly them. Returns whether it wrote.
pub fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(false);
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(true)
}

pub fn encode<T: Serialize>(digest: &str, body: &T) -> Vec<u8> {
    let artifact = Artifact {
        version: ARTIFACT_VERSION,
        config_digest: digest.to_string(),
        body,
    };
    let mut out = serde_json::to_vec_pretty(&artifact).expect("artifact encodes");
    out.push(b'\n');
    out
}

pub fn save<T: Serialize>(path: &Path, digest: &str, body: &T) -> Result<()> {
    if write_if_changed(path, &encode(digest, body))? {
        tracing::debug!(path = %path.display(), "wrote artifact");
    }
    Ok(())
}

/// Read an upstream artifact, refusing ones written under a different configuration.
pub fn load<T: DeserializeOwned>(path: &Path, digest: &str, producer: &str) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::io(
            path,
            std::io::Error::new(e.kind(), format!("missing; run `{producer}` first")),
        ),
        _ => CliError::io(path, e),
    })?;
    let bad = |e: serde_json::Error| CliError::invalid(format!("{}: {e}", path.display()));
    let header: Header = serde_json::from_slice(&bytes).map_err(bad)?;
    if header.version != ARTIFACT_VERSION {
        return Err(CliError::invalid(format!(
            "{}: unsupported artifact version {}",
            path.display(),
            header.version
        )));
    }
    if header.config_digest != digest {
        return Err(CliError::invalid(format!(
            "{}: produced under a different configuration (digest {}); re-run `{producer}`",
            path.display(),
            short(&header.config_digest)
        )));
    }
    let artifact: Artifact<T> = serde_json::from_slice(&bytes).map_err(bad)?;
    Ok(artifact.body)
}

pub fn short(digest: &str) -> &str {
    &digest[..digest.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Body {
        n: u32,
    }

    #[test]
    fn round_trip_and_digest_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x/a.json");
        save(&path, "abc", &Body { n: 3 }).unwrap();
        assert_eq!(load::<Body>(&path, "abc", "p").unwrap(), Body { n: 3 });
        let err = load::<Body>(&path, "def", "p").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("different configuration"));
        let err = load::<Body>(&dir.path().join("none.json"), "abc", "p").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unchanged_content_not_rewritten() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f");
        assert!(write_if_changed(&path, b"1").unwrap());
        assert!(!write_if_changed(&path, b"1").unwrap());
        assert!(write_if_changed(&path, b"2").unwrap());
    }
}
