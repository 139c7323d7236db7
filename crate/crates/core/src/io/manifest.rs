//! Per-volume and dataset manifests. A volume manifest holds every sampled
//! model parameter, so labels can be rebuilt without the RNG.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::geometry::{DatasetConfig, Scene};
use crate::render::{RenderConfig, RenderStats};
use crate::voxelize::RasterStats;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VolumeFiles {
    pub labels: String,
    pub skeleton: String,
    #[serde(default)]
    pub image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeManifest {
    pub version: u32,
    pub volume_index: usize,
    pub seed: u64,
    pub config_digest: String,
    pub scene: Scene,
    pub raster: RasterStats,
    pub files: VolumeFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEntry {
    pub index: usize,
    pub dir: String,
    pub seed: u64,
    pub instances: usize,
    pub foreground_voxels: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub config_digest: String,
    pub config: DatasetConfig,
    pub total_instances: usize,
    pub volumes: Vec<VolumeEntry>,
}

impl DatasetManifest {
    /// The aggregate count agrees with the per-volume entries.
    pub fn is_consistent(&self) -> bool {
        self.volumes.iter().map(|v| v.instances).sum::<usize>() == self.total_instances
    }
}

/// Written next to each rendered image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    pub seed: u64,
    pub config_digest: String,
    pub config: RenderConfig,
    pub stats: RenderStats,
}

pub fn write_manifest<T: Serialize>(path: &Path, manifest: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn read_manifest<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    let mut de = serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::Schema {
            path: format!("{}:{field}", path.display()),
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: inner.to_string(),
        }
    })
}
