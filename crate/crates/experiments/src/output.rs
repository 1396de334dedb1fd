//! Output directories: staged writes and the content-hash manifest.

use crate::error::{ExpError, ExpResult};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.txt";

pub fn write_file(path: &Path, bytes: &[u8]) -> ExpResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ExpError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| ExpError::io(path, e))
}

fn is_nonempty_dir(path: &Path) -> bool {
    std::fs::read_dir(path).map(|mut d| d.next().is_some()).unwrap_or(false)
}

/// A target directory populated through a sibling `<name>.partial` staging
/// directory.
pub struct OutputDir {
    target: PathBuf,
    staging: PathBuf,
    force: bool,
}

impl OutputDir {
    pub fn stage(target: &Path, force: bool) -> ExpResult<Self> {
        if target.exists() && !target.is_dir() {
            return Err(ExpError::io(target, "exists and is not a directory"));
        }
        if is_nonempty_dir(target) && !force {
            return Err(ExpError::OutputExists(target.to_path_buf()));
        }
        let mut name = target.file_name().ok_or_else(|| ExpError::io(target, "not a directory name"))?.to_os_string();
        name.push(".partial");
        let staging = target.with_file_name(name);
        if staging.exists() {
            // Left behind by an interrupted run.
            std::fs::remove_dir_all(&staging).map_err(|e| ExpError::io(&staging, e))?;
        }
        std::fs::create_dir_all(&staging).map_err(|e| ExpError::io(&staging, e))?;
        Ok(Self { target: target.to_path_buf(), staging, force })
    }

    pub fn staging(&self) -> &Path {
        &self.staging
    }

    /// Writes the manifest and moves the staged tree into place.
    pub fn commit(self) -> ExpResult<()> {
        write_manifest(&self.staging)?;
        if self.target.exists() {
            if self.force || !is_nonempty_dir(&self.target) {
                std::fs::remove_dir_all(&self.target).map_err(|e| ExpError::io(&self.target, e))?;
            } else {
                return Err(ExpError::OutputExists(self.target.clone()));
            }
        }
        std::fs::rename(&self.staging, &self.target).map_err(|e| ExpError::io(&self.target, e))
    }

    /// Removes everything written so far.
    pub fn abandon(self) {
        let _ = std::fs::remove_dir_all(&self.staging);
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> ExpResult<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| ExpError::io(dir, e))? {
        let path = entry.map_err(|e| ExpError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

/// `<sha256>  <relative path>` for every file except the manifest, sorted by
/// path.
pub fn manifest(root: &Path) -> ExpResult<String> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    let mut rows: Vec<(String, String)> = files
        .into_iter()
        .map(|rel| {
            let name = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/");
            (name, rel)
        })
        .filter(|(name, _)| name != MANIFEST)
        .map(|(name, rel)| {
            let bytes = std::fs::read(root.join(&rel)).map_err(|e| ExpError::io(root.join(&rel), e))?;
            Ok((name, hex::encode(Sha256::digest(&bytes))))
        })
        .collect::<ExpResult<_>>()?;
    rows.sort();
    Ok(rows.into_iter().map(|(name, hash)| format!("{hash}  {name}\n")).collect())
}

pub fn write_manifest(root: &Path) -> ExpResult<()> {
    let text = manifest(root)?;
    write_file(&root.join(MANIFEST), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_files_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        write_file(&dir.path().join("b/x.csv"), b"abc").unwrap();
        write_file(&dir.path().join("a.txt"), b"").unwrap();
        write_manifest(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].ends_with("  a.txt"));
        assert_eq!(lines[1], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  b/x.csv");
    }

    #[test]
    fn staged_output_is_atomic() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        let out = OutputDir::stage(&target, false).unwrap();
        write_file(&out.staging().join("f"), b"1").unwrap();
        out.abandon();
        assert!(!target.exists());
        assert!(!dir.path().join("run.partial").exists());

        let out = OutputDir::stage(&target, false).unwrap();
        write_file(&out.staging().join("f"), b"1").unwrap();
        out.commit().unwrap();
        assert!(target.join("f").exists() && target.join(MANIFEST).exists());
        assert!(matches!(OutputDir::stage(&target, false), Err(ExpError::OutputExists(_))));
        let out = OutputDir::stage(&target, true).unwrap();
        write_file(&out.staging().join("g"), b"2").unwrap();
        out.commit().unwrap();
        assert!(!target.join("f").exists() && target.join("g").exists());
    }
}
