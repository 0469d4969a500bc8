use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Region;
use crate::error::{Error, Result};
use crate::grid::{read_grd1, GridTensor};

/// Per-file sidecar (`<basename>.json` next to each GRD1 file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub variable: String,
    pub units: String,
    pub bounds: Region,
    pub source: String,
    pub timestamp: String,
}

/// Metadata and ordered sample index of one data product. Sample paths are
/// stored relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub variables: Vec<String>,
    /// Degrees per cell as `(lat, lon)`.
    pub native_resolution: (f64, f64),
    pub region: Region,
    pub sample_files: Vec<PathBuf>,
    pub split_tags: Vec<String>,
    /// Sample count of the full product, informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_count: Option<u64>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(
        name: impl Into<String>,
        variables: Vec<String>,
        native_resolution: (f64, f64),
        region: Region,
        sample_files: Vec<PathBuf>,
        split_tags: Vec<String>,
    ) -> Result<Self> {
        let m = Self {
            name: name.into(),
            variables,
            native_resolution,
            region,
            sample_files,
            split_tags,
            declared_count: None,
            base_dir: PathBuf::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_files.is_empty() {
            return Err(Error::Metadata(format!("manifest {} lists no samples", self.name)));
        }
        if self.split_tags.len() != self.sample_files.len() {
            return Err(Error::Metadata(format!(
                "manifest {}: {} split tags for {} samples",
                self.name,
                self.split_tags.len(),
                self.sample_files.len()
            )));
        }
        if self.variables.is_empty() {
            return Err(Error::Metadata(format!("manifest {} declares no variables", self.name)));
        }
        self.region.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Metadata(format!("{}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.validate()?;
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        self.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn sample_path(&self, i: usize) -> PathBuf {
        self.base_dir.join(&self.sample_files[i])
    }

    /// Indices of samples carrying `tag`, in manifest order.
    pub fn indices_with_tag(&self, tag: &str) -> Vec<usize> {
        (0..self.split_tags.len()).filter(|&i| self.split_tags[i] == tag).collect()
    }

    /// Reads every sample tagged `tag` (all samples when `tag` is `None`),
    /// checking each sidecar against the manifest.
    pub fn load_samples(&self, tag: Option<&str>) -> Result<Vec<(GridTensor, SampleMeta)>> {
        let idx = match tag {
            Some(t) => self.indices_with_tag(t),
            None => (0..self.sample_files.len()).collect(),
        };
        idx.into_iter()
            .map(|i| {
                let (g, meta) = ingest(&self.sample_path(i))?;
                if !self.variables.contains(&meta.variable) {
                    return Err(Error::Metadata(format!(
                        "{}: variable {} is not declared by manifest {}",
                        self.sample_path(i).display(),
                        meta.variable,
                        self.name
                    )));
                }
                Ok((g, meta))
            })
            .collect()
    }
}

pub fn sidecar_path(grd: &Path) -> PathBuf {
    grd.with_extension("json")
}

/// Reads a GRD1 file and its sidecar metadata.
pub fn ingest(path: &Path) -> Result<(GridTensor, SampleMeta)> {
    let grid = read_grd1(path)?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(Error::MissingSidecar(side));
    }
    let meta: SampleMeta = serde_json::from_str(&fs::read_to_string(&side)?)
        .map_err(|e| Error::Metadata(format!("{}: {e}", side.display())))?;
    meta.bounds.validate()?;
    Ok((grid, meta))
}

pub fn write_sample(path: &Path, grid: &GridTensor, meta: &SampleMeta) -> Result<()> {
    crate::grid::write_grd1(path, grid)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}
