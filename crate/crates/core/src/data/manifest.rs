//! Dataset manifest and checksum-verified download.
//!
//! ```toml
//! [[dataset]]
//! name = "a9a"
//! url = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/a9a"
//! sha256 = "..."
//! ```

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub url: String,
    /// Expected digest; when absent the computed digest is logged instead.
    pub sha256: Option<String>,
    /// File name under the output directory; defaults to `name`.
    pub file: Option<String>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("manifest: {0}")]
    Manifest(#[from] toml::de::Error),
    #[error("{name}: checksum mismatch (expected {expected}, got {actual})")]
    Checksum {
        name: String,
        expected: String,
        actual: String,
    },
    #[error("{name}: download failed: {reason}")]
    Download { name: String, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FetchStatus {
    Downloaded(PathBuf),
    AlreadyPresent(PathBuf),
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, FetchError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FetchError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn download(entry: &ManifestEntry) -> Result<Vec<u8>, FetchError> {
    if let Some(path) = entry.url.strip_prefix("file://") {
        return Ok(fs::read(path)?);
    }
    let fail = |reason: String| FetchError::Download {
        name: entry.name.clone(),
        reason,
    };
    let mut response = ureq::get(&entry.url).call().map_err(|e| fail(e.to_string()))?;
    let mut bytes = Vec::new();
    response
        .body_mut()
        .as_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| fail(e.to_string()))?;
    Ok(bytes)
}

/// Downloads every manifest entry into `out_dir`, skipping files whose
/// checksum already matches.
pub fn fetch_all(manifest: &Manifest, out_dir: &Path) -> Result<Vec<FetchStatus>, FetchError> {
    fs::create_dir_all(out_dir)?;
    let mut report = Vec::with_capacity(manifest.datasets.len());
    for entry in &manifest.datasets {
        let target = out_dir.join(entry.file.as_deref().unwrap_or(&entry.name));
        let expected = entry.sha256.as_ref().map(|s| s.to_ascii_lowercase());
        if let Ok(existing) = fs::read(&target) {
            if expected.as_ref().is_none_or(|e| sha256_hex(&existing) == *e) {
                report.push(FetchStatus::AlreadyPresent(target));
                continue;
            }
        }
        let bytes = download(entry)?;
        let actual = sha256_hex(&bytes);
        match expected {
            Some(expected) if actual != expected => {
                return Err(FetchError::Checksum {
                    name: entry.name.clone(),
                    expected,
                    actual,
                })
            }
            Some(_) => {}
            None => log::warn!("{}: no checksum in manifest; sha256 = {actual}", entry.name),
        }
        fs::write(&target, &bytes)?;
        log::info!("fetched {} -> {}", entry.name, target.display());
        report.push(FetchStatus::Downloaded(target));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fetches_local_file_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.txt");
        fs::write(&src, b"1 1:1\n").unwrap();
        let sum = sha256_hex(b"1 1:1\n");
        let text = format!(
            "[[dataset]]\nname = \"tiny\"\nurl = \"file://{}\"\nsha256 = \"{}\"\n",
            src.display(),
            sum
        );
        let manifest = Manifest::parse(&text).unwrap();
        let out = dir.path().join("out");
        let r = fetch_all(&manifest, &out).unwrap();
        assert!(matches!(r[0], FetchStatus::Downloaded(_)));
        let r = fetch_all(&manifest, &out).unwrap();
        assert!(matches!(r[0], FetchStatus::AlreadyPresent(_)));

        let bad = Manifest {
            datasets: vec![ManifestEntry {
                sha256: Some("00".into()),
                file: Some("other".into()),
                ..manifest.datasets[0].clone()
            }],
        };
        assert!(matches!(fetch_all(&bad, &out), Err(FetchError::Checksum { .. })));
    }

    #[test]
    fn missing_checksum_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.txt");
        fs::write(&src, b"-1 2:1\n").unwrap();
        let text = format!("[[dataset]]\nname = \"t\"\nurl = \"file://{}\"\n", src.display());
        let manifest = Manifest::parse(&text).unwrap();
        let r = fetch_all(&manifest, &dir.path().join("out")).unwrap();
        assert!(matches!(r[0], FetchStatus::Downloaded(_)));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(Manifest::parse("[[dataset]]\nname='a'\nurl='b'\nsha256='c'\nextra=1\n").is_err());
    }
}
