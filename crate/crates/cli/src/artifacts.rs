//! Artifact directory management: staged writes, a manifest echoing the
//! resolved configuration, and cleanup of partial outputs on failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Config;

pub struct ArtifactSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl ArtifactSet {
    pub fn create(dir: &Path) -> std::io::Result<ArtifactSet> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactSet { dir: dir.to_path_buf(), written: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_file(&mut self, name: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Manifest with the full resolved config, run parameters and code
    /// version; the timestamp sits on its own line so artifact diffs can
    /// exclude it.
    pub fn write_manifest(
        &mut self,
        experiment: &str,
        config: &Config,
        seed: u64,
        workers: usize,
    ) -> std::io::Result<()> {
        let mut out = Vec::new();
        writeln!(out, "experiment = {experiment}")?;
        writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "seed = {seed}")?;
        writeln!(out, "workers = {workers}")?;
        for (section, key, value) in config.resolved() {
            writeln!(out, "{section}.{key} = {value}")?;
        }
        let ts = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# generated-at = {ts}")?;
        self.write_file("manifest.txt", &out)?;
        Ok(())
    }

    /// Keep the outputs.
    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for ArtifactSet {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

/// Reals in artifacts carry 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}
