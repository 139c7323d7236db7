//! Persistence: multipage TIFF stacks, raw volumes with JSON sidecars,
//! scene manifests and configuration files.

pub mod config;
pub mod manifest;
pub mod raw;
pub mod tiff;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{config_digest, parse_config, parse_config_str, ParsedConfig};
pub use manifest::{read_manifest, write_manifest, DatasetManifest, RenderRecord, VolumeEntry, VolumeFiles, VolumeManifest, MANIFEST_VERSION};
pub use raw::{read_raw, sidecar_path, write_raw};
pub use tiff::{read_tiff, write_tiff};

use crate::error::{Error, Result};
use crate::render::QuantizedVolume;
use crate::volume::{Shape, Spacing, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U16,
    U32,
    F32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::U32 | Dtype::F32 => 4,
        }
    }
}

/// A volume of any storable element type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    U8(Volume<u8>),
    U16(Volume<u16>),
    U32(Volume<u32>),
    F32(Volume<f32>),
}

macro_rules! each {
    ($self:expr, $v:ident => $body:expr) => {
        match $self {
            AnyVolume::U8($v) => $body,
            AnyVolume::U16($v) => $body,
            AnyVolume::U32($v) => $body,
            AnyVolume::F32($v) => $body,
        }
    };
}

impl AnyVolume {
    pub fn dtype(&self) -> Dtype {
        match self {
            AnyVolume::U8(_) => Dtype::U8,
            AnyVolume::U16(_) => Dtype::U16,
            AnyVolume::U32(_) => Dtype::U32,
            AnyVolume::F32(_) => Dtype::F32,
        }
    }

    pub fn shape(&self) -> Shape {
        each!(self, v => v.shape())
    }

    pub fn spacing(&self) -> Spacing {
        each!(self, v => v.spacing())
    }

    pub fn set_spacing(&mut self, spacing: Spacing) {
        each!(self, v => v.set_spacing(spacing))
    }

    pub fn to_f32(&self) -> Volume<f32> {
        match self {
            AnyVolume::U8(v) => v.map(|&x| f32::from(x)),
            AnyVolume::U16(v) => v.map(|&x| f32::from(x)),
            AnyVolume::U32(v) => v.map(|&x| x as f32),
            AnyVolume::F32(v) => v.clone(),
        }
    }

    /// Integer volumes widen to `u32` labels; float volumes are rejected.
    pub fn into_labels(self) -> Result<Volume<u32>> {
        match self {
            AnyVolume::U8(v) => Ok(v.map(|&x| u32::from(x))),
            AnyVolume::U16(v) => Ok(v.map(|&x| u32::from(x))),
            AnyVolume::U32(v) => Ok(v),
            AnyVolume::F32(_) => Err(Error::Domain("expected an integer label volume, found f32".into())),
        }
    }

    /// Little-endian payload in z-major order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            AnyVolume::U8(v) => v.data().to_vec(),
            AnyVolume::U16(v) => v.data().iter().flat_map(|x| x.to_le_bytes()).collect(),
            AnyVolume::U32(v) => v.data().iter().flat_map(|x| x.to_le_bytes()).collect(),
            AnyVolume::F32(v) => v.data().iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    pub fn from_le_bytes(dtype: Dtype, shape: Shape, spacing: Spacing, bytes: &[u8]) -> Result<Self> {
        let expected = (crate::volume::voxel_count(shape) * dtype.size()) as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: bytes.len() as u64,
            });
        }
        Ok(match dtype {
            Dtype::U8 => AnyVolume::U8(Volume::from_vec(shape, spacing, bytes.to_vec())?),
            Dtype::U16 => AnyVolume::U16(Volume::from_vec(
                shape,
                spacing,
                bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect(),
            )?),
            Dtype::U32 => AnyVolume::U32(Volume::from_vec(
                shape,
                spacing,
                bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect(),
            )?),
            Dtype::F32 => AnyVolume::F32(Volume::from_vec(
                shape,
                spacing,
                bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect(),
            )?),
        })
    }
}

impl From<Volume<u8>> for AnyVolume {
    fn from(v: Volume<u8>) -> Self {
        AnyVolume::U8(v)
    }
}

impl From<Volume<u16>> for AnyVolume {
    fn from(v: Volume<u16>) -> Self {
        AnyVolume::U16(v)
    }
}

impl From<Volume<u32>> for AnyVolume {
    fn from(v: Volume<u32>) -> Self {
        AnyVolume::U32(v)
    }
}

impl From<Volume<f32>> for AnyVolume {
    fn from(v: Volume<f32>) -> Self {
        AnyVolume::F32(v)
    }
}

impl From<QuantizedVolume> for AnyVolume {
    fn from(q: QuantizedVolume) -> Self {
        match q {
            QuantizedVolume::U8(v) => AnyVolume::U8(v),
            QuantizedVolume::U16(v) => AnyVolume::U16(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub shape: Shape,
    pub dtype: Dtype,
    pub spacing: Spacing,
    pub endianness: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config_digest: Option<String>,
}

impl VolumeHeader {
    pub fn describe(vol: &AnyVolume) -> Self {
        Self {
            shape: vol.shape(),
            dtype: vol.dtype(),
            spacing: vol.spacing(),
            endianness: "little".into(),
            seed: None,
            config_digest: None,
        }
    }

    pub fn with_provenance(mut self, seed: u64, digest: &str) -> Self {
        self.seed = Some(seed);
        self.config_digest = Some(digest.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Tiff,
    Raw,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Tiff => "tif",
            Format::Raw => "raw",
        }
    }

    pub fn detect(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("tif") | Some("tiff") => Ok(Format::Tiff),
            Some("raw") => Ok(Format::Raw),
            _ => Err(Error::Domain(format!(
                "cannot infer volume format from {}; expected .tif, .tiff or .raw",
                path.display()
            ))),
        }
    }
}

/// Write `vol` to `stem.<ext>`, returning the path written.
pub fn write_volume(stem: &Path, vol: &AnyVolume, header: &VolumeHeader, format: Format) -> Result<PathBuf> {
    let path = stem.with_extension(format.extension());
    match format {
        Format::Tiff => write_tiff(&path, vol, Some(header))?,
        Format::Raw => write_raw(&path, vol, header)?,
    }
    Ok(path)
}

pub fn read_volume(path: &Path) -> Result<(AnyVolume, Option<VolumeHeader>)> {
    match Format::detect(path)? {
        Format::Tiff => read_tiff(path),
        Format::Raw => read_raw(path).map(|(v, h)| (v, Some(h))),
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
