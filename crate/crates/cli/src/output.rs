//! Output directory bookkeeping and the per-run manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use smpci_core::io;
use smpci_core::{DetectorImage, ProjectedObject, Result};

/// Collects every file a command writes so the manifest is complete.
pub struct OutputDir {
    root: PathBuf,
    previews: bool,
    files: BTreeSet<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path, previews: bool) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            previews,
            files: BTreeSet::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn record(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(paths);
    }

    pub fn image(&mut self, name: &str, img: &DetectorImage) -> Result<PathBuf> {
        let stem = self.path(name);
        let written = io::write_image(img, &stem, self.previews)?;
        self.record(written);
        Ok(io::header_path(&stem))
    }

    pub fn object(&mut self, name: &str, obj: &ProjectedObject) -> Result<PathBuf> {
        let stem = self.path(name);
        let written = io::write_object(obj, &stem)?;
        self.record(written);
        Ok(io::header_path(&stem))
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let path = self.path(name);
        io::write_csv(&path, header, rows)?;
        self.record([path.clone()]);
        Ok(path)
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents)?;
        self.record([path.clone()]);
        Ok(path)
    }

    /// Writes `manifest-<command>.sha256` in `sha256sum` format, sorted by
    /// path, and returns its location.
    pub fn finish(self, command: &str) -> Result<PathBuf> {
        let mut lines = String::new();
        for path in &self.files {
            let digest = Sha256::digest(fs::read(path)?);
            let rel = path.strip_prefix(&self.root).unwrap_or(path);
            lines.push_str(&format!("{}  {}\n", hex::encode(digest), rel.display()));
        }
        let manifest = self.root.join(format!("manifest-{command}.sha256"));
        fs::write(&manifest, lines)?;
        Ok(manifest)
    }
}
