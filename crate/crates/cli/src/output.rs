use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use tempfile::TempDir;

/// Outputs are written to a hidden directory inside `--out` and moved into
/// place only when the whole command succeeds.
pub struct Staging {
    dir: TempDir,
    out: PathBuf,
    created_out: bool,
    files: Vec<String>,
}

impl Staging {
    pub fn new(out: &Path) -> anyhow::Result<Self> {
        let created_out = !out.exists();
        fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".vigilkit-staging-")
            .tempdir_in(out)
            .with_context(|| format!("staging in {}", out.display()))?;
        Ok(Self {
            dir,
            out: out.to_path_buf(),
            created_out,
            files: Vec::new(),
        })
    }

    /// Staged location of the output `rel`; parent directories are created.
    pub fn path(&mut self, rel: &str) -> anyhow::Result<PathBuf> {
        let p = self.dir.path().join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(p)
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, bytes).with_context(|| format!("writing {rel}"))
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn commit(self) -> anyhow::Result<Vec<String>> {
        for rel in &self.files {
            let dest = self.out.join(rel);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(self.dir.path().join(rel), &dest).with_context(|| format!("moving {rel} into place"))?;
        }
        Ok(self.files.clone())
    }

    /// Removes staged files, and the output directory too when this run
    /// created it and it is still empty.
    pub fn abandon(self) {
        let (out, created) = (self.out.clone(), self.created_out);
        drop(self.dir);
        if created {
            let _ = fs::remove_dir(out);
        }
    }
}

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes; `None` becomes an empty cell.
pub fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}
