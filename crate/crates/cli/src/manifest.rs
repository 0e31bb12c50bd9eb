//! Dataset manifests. Paths inside the manifest directory are stored
//! relative to it; everything else is stored absolute.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparse_radar::geometry::ArrayKind;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    /// Feature images per Doppler rank.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<PathBuf>,
    /// Range-channel matrices per Doppler rank.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub range_channel: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArrayKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_v: Option<usize>,
    pub entries: Vec<Entry>,
}

fn map_paths(e: &mut Entry, f: impl Fn(&Path) -> PathBuf) {
    for p in [&mut e.scene, &mut e.cube, &mut e.ground_truth].into_iter().flatten() {
        *p = f(p);
    }
    for p in e.features.iter_mut().chain(&mut e.range_channel).chain(&mut e.images) {
        *p = f(p);
    }
}

impl Manifest {
    /// Reads a manifest and makes every path absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut m: Manifest = sparse_radar::io::read_json(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = std::fs::canonicalize(if dir.as_os_str().is_empty() { Path::new(".") } else { &dir })
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        for e in &mut m.entries {
            map_paths(e, |p| if p.is_absolute() { p.to_path_buf() } else { dir.join(p) });
        }
        if m.entries.is_empty() {
            return Err(CliError::Config(format!("{}: manifest has no entries", path.display())));
        }
        Ok(m)
    }

    /// Writes to `dir/manifest.json`; `dir` must be canonical.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let mut m = self.clone();
        for e in &mut m.entries {
            map_paths(e, |p| p.strip_prefix(dir).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf()));
        }
        let path = dir.join("manifest.json");
        sparse_radar::io::write_json(&path, &m)?;
        Ok(path)
    }
}
