use std::path::{Path, PathBuf};

use super::{read_file, write_file, AnyVolume, VolumeHeader};
use crate::error::{Error, Result};

/// `labels.raw` keeps its header in `labels.raw.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_raw(path: &Path, vol: &AnyVolume, header: &VolumeHeader) -> Result<()> {
    let mut header = header.clone();
    header.shape = vol.shape();
    header.dtype = vol.dtype();
    header.spacing = vol.spacing();
    header.endianness = "little".into();
    let json = serde_json::to_vec_pretty(&header).expect("header serializes");
    write_file(path, &vol.to_le_bytes())?;
    write_file(&sidecar_path(path), &json)
}

pub fn read_raw(path: &Path) -> Result<(AnyVolume, VolumeHeader)> {
    let side = sidecar_path(path);
    let bad = |message: String| Error::BadSidecar {
        path: side.clone(),
        message,
    };
    let text = read_file(&side)?;
    let header: VolumeHeader = serde_json::from_slice(&text).map_err(|e| bad(e.to_string()))?;
    if header.endianness != "little" {
        return Err(bad(format!("unsupported endianness `{}`", header.endianness)));
    }
    if header.shape.contains(&0) {
        return Err(bad(format!("shape {:?} has a zero extent", header.shape)));
    }
    header.spacing.validate().map_err(|e| bad(e.to_string()))?;
    let bytes = read_file(path)?;
    let vol = AnyVolume::from_le_bytes(header.dtype, header.shape, header.spacing, &bytes)?;
    Ok((vol, header))
}
