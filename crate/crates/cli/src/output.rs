use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

use crate::run::Artifact;

/// Writes every artifact into `dir`. All contents are staged in temporary
/// files first and only renamed into place once every write succeeded, so
/// a failed run leaves no partial outputs.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut staged = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let mut tmp = NamedTempFile::new_in(dir)
            .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
        tmp.write_all(a.contents.as_bytes())
            .and_then(|()| tmp.flush())
            .with_context(|| format!("writing {}", a.name))?;
        staged.push((tmp, dir.join(&a.name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path)
            .with_context(|| format!("renaming into {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
