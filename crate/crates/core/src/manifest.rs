//! Dataset manifest: JSON listing color/depth pairs and an optional
//! replacement background. Relative paths resolve against the manifest's
//! own directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColorFrame, DepthFrame};
use crate::io;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub color: PathBuf,
    pub depth: PathBuf,
    pub depth_width: usize,
    pub depth_height: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<PathBuf>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, background: Option<PathBuf>) -> Self {
        Self {
            entries,
            background,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks that every listed file exists and every depth file has exactly
    /// `depth_width * depth_height * 4` bytes.
    pub fn validate(&self) -> Result<()> {
        for entry in &self.entries {
            let color = self.resolve(&entry.color);
            std::fs::metadata(&color).map_err(|e| Error::io(&color, e))?;
            let depth = self.resolve(&entry.depth);
            let len = std::fs::metadata(&depth)
                .map_err(|e| Error::io(&depth, e))?
                .len();
            let expected = (entry.depth_width * entry.depth_height * 4) as u64;
            if len != expected {
                return Err(Error::SizeMismatch {
                    path: depth,
                    width: entry.depth_width,
                    height: entry.depth_height,
                    expected,
                    actual: len,
                });
            }
        }
        if let Some(bg) = &self.background {
            let bg = self.resolve(bg);
            std::fs::metadata(&bg).map_err(|e| Error::io(&bg, e))?;
        }
        Ok(())
    }

    pub fn load_color(&self, index: usize) -> Result<ColorFrame> {
        let entry = &self.entries[index];
        io::load_color(self.resolve(&entry.color))
    }

    pub fn load_depth(&self, index: usize) -> Result<DepthFrame> {
        let entry = &self.entries[index];
        io::load_depth(
            self.resolve(&entry.depth),
            entry.depth_width,
            entry.depth_height,
        )
    }

    pub fn load_background(&self) -> Result<Option<ColorFrame>> {
        self.background
            .as_ref()
            .map(|bg| io::load_color(self.resolve(bg)))
            .transpose()
    }
}
