//! Baseline multipage TIFF: one grayscale page per z-slice, one strip per
//! page, no compression. The volume header travels as JSON in the first
//! page's ImageDescription.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder, TiffValue};
use tiff::tags::Tag;
use tiff::{ColorType, TiffError};

use super::{AnyVolume, VolumeHeader};
use crate::error::{Error, Result};
use crate::volume::{Spacing, Volume};

fn map_err(path: &Path, e: TiffError) -> Error {
    match e {
        TiffError::IoError(io) => Error::io(path, io),
        TiffError::UnsupportedError(u) => Error::UnsupportedTiff(u.to_string()),
        other => Error::CorruptHeader(other.to_string()),
    }
}

fn write_pages<C: colortype::ColorType>(
    enc: &mut TiffEncoder<BufWriter<File>>,
    shape: [usize; 3],
    data: &[C::Inner],
    description: &str,
) -> std::result::Result<(), TiffError>
where
    [C::Inner]: TiffValue,
{
    let [nz, ny, nx] = shape;
    let page = ny * nx;
    for z in 0..nz {
        let mut img = enc.new_image::<C>(nx as u32, ny as u32)?;
        img.rows_per_strip(ny as u32)?;
        if z == 0 {
            img.encoder().write_tag(Tag::ImageDescription, description)?;
        }
        img.write_data(&data[z * page..(z + 1) * page])?;
    }
    Ok(())
}

pub fn write_tiff(path: &Path, vol: &AnyVolume, header: Option<&VolumeHeader>) -> Result<()> {
    let mut header = header.cloned().unwrap_or_else(|| VolumeHeader::describe(vol));
    header.shape = vol.shape();
    header.dtype = vol.dtype();
    header.spacing = vol.spacing();
    let description = serde_json::to_string(&header).expect("header serializes");
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(|e| map_err(path, e))?;
    let shape = vol.shape();
    let res = match vol {
        AnyVolume::U8(v) => write_pages::<colortype::Gray8>(&mut enc, shape, v.data(), &description),
        AnyVolume::U16(v) => write_pages::<colortype::Gray16>(&mut enc, shape, v.data(), &description),
        AnyVolume::U32(v) => write_pages::<colortype::Gray32>(&mut enc, shape, v.data(), &description),
        AnyVolume::F32(v) => write_pages::<colortype::Gray32Float>(&mut enc, shape, v.data(), &description),
    };
    res.map_err(|e| map_err(path, e))?;
    drop(enc);
    Ok(())
}

enum Pages {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
    F32(Vec<f32>),
}

impl Pages {
    fn append(&mut self, page: DecodingResult) -> Result<()> {
        match (self, page) {
            (Pages::U8(a), DecodingResult::U8(b)) => a.extend(b),
            (Pages::U16(a), DecodingResult::U16(b)) => a.extend(b),
            (Pages::U32(a), DecodingResult::U32(b)) => a.extend(b),
            (Pages::F32(a), DecodingResult::F32(b)) => a.extend(b),
            _ => return Err(Error::UnsupportedTiff("pages differ in sample type".into())),
        }
        Ok(())
    }
}

fn check_page(dec: &mut Decoder<BufReader<File>>, path: &Path) -> Result<()> {
    let compression: Option<u16> = dec.find_tag_unsigned(Tag::Compression).map_err(|e| map_err(path, e))?;
    if let Some(c) = compression.filter(|&c| c != 1) {
        return Err(Error::UnsupportedTiff(format!("compressed data (compression scheme {c})")));
    }
    if dec.find_tag(Tag::TileWidth).map_err(|e| map_err(path, e))?.is_some() {
        return Err(Error::UnsupportedTiff("tiled layout".into()));
    }
    match dec.colortype().map_err(|e| map_err(path, e))? {
        ColorType::Gray(8 | 16 | 32) => Ok(()),
        other => Err(Error::UnsupportedTiff(format!("color type {other:?}; only 8, 16 or 32 bit grayscale is read"))),
    }
}

/// Read a grayscale stack written by this crate or by external tools.
/// Returns the embedded header when the first page carries one.
pub fn read_tiff(path: &Path) -> Result<(AnyVolume, Option<VolumeHeader>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file)).map_err(|e| map_err(path, e))?;

    let header: Option<VolumeHeader> = dec
        .find_tag(Tag::ImageDescription)
        .map_err(|e| map_err(path, e))?
        .and_then(|v| v.into_string().ok())
        .and_then(|s| serde_json::from_str(s.trim_end_matches('\0')).ok());

    let mut dims = None;
    let mut pages: Option<Pages> = None;
    let mut nz = 0;
    loop {
        check_page(&mut dec, path)?;
        let (w, h) = dec.dimensions().map_err(|e| map_err(path, e))?;
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(Error::UnsupportedTiff(format!(
                    "page {nz} is {w}x{h}, first page is {}x{}",
                    d.0, d.1
                )))
            }
            _ => {}
        }
        let data = dec.read_image().map_err(|e| map_err(path, e))?;
        match &mut pages {
            None => {
                pages = Some(match data {
                    DecodingResult::U8(v) => Pages::U8(v),
                    DecodingResult::U16(v) => Pages::U16(v),
                    DecodingResult::U32(v) => Pages::U32(v),
                    DecodingResult::F32(v) => Pages::F32(v),
                    _ => return Err(Error::UnsupportedTiff("sample format other than u8, u16, u32 or f32".into())),
                })
            }
            Some(p) => p.append(data)?,
        }
        nz += 1;
        if !dec.more_images() {
            break;
        }
        dec.next_image().map_err(|e| map_err(path, e))?;
    }

    let (w, h) = dims.expect("at least one page");
    let shape = [nz, h as usize, w as usize];
    if let Some(hd) = &header {
        if hd.shape != shape {
            return Err(Error::CorruptHeader(format!(
                "embedded header declares shape {:?}, file holds {:?}",
                hd.shape, shape
            )));
        }
    }
    let spacing = header.as_ref().map_or(Spacing::ISOTROPIC, |h| h.spacing);
    let vol = match pages.expect("at least one page") {
        Pages::U8(d) => AnyVolume::U8(Volume::from_vec(shape, spacing, d)?),
        Pages::U16(d) => AnyVolume::U16(Volume::from_vec(shape, spacing, d)?),
        Pages::U32(d) => AnyVolume::U32(Volume::from_vec(shape, spacing, d)?),
        Pages::F32(d) => AnyVolume::F32(Volume::from_vec(shape, spacing, d)?),
    };
    if let Some(hd) = &header {
        if hd.dtype != vol.dtype() {
            return Err(Error::CorruptHeader(format!(
                "embedded header declares {:?}, pages hold {:?}",
                hd.dtype,
                vol.dtype()
            )));
        }
    }
    Ok((vol, header))
}
