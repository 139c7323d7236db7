use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use myosim::io::{config_digest, read_volume, AnyVolume};
use myosim::Error;
use serde::Serialize;

use crate::announce;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreviewMode {
    /// Label mode for integer volumes, intensity mode otherwise.
    Auto,
    Label,
    Intensity,
}

#[derive(Args)]
pub struct PreviewArgs {
    #[arg(long)]
    input: PathBuf,
    /// z index, or `mid`.
    #[arg(long, default_value = "mid")]
    slice: String,
    #[arg(long, value_enum, default_value = "auto")]
    mode: PreviewMode,
    /// Output .pgm path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Distinct gray levels for ids 1..=255; 97 is coprime to 255.
pub fn label_gray(id: u32) -> u8 {
    if id == 0 {
        0
    } else {
        (1 + (u64::from(id - 1) * 97) % 255) as u8
    }
}

fn stretch(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect()
}

pub fn preview(args: &PreviewArgs) -> Result<()> {
    let (vol, header) = read_volume(&args.input)?;
    let [nz, ny, nx] = vol.shape();
    let z = match args.slice.as_str() {
        "mid" => nz / 2,
        s => s
            .parse::<usize>()
            .map_err(|_| Error::Domain(format!("slice must be an index or `mid`, got `{s}`")))?,
    };
    if z >= nz {
        return Err(Error::Domain(format!("slice {z} out of range for {nz} z-slices")).into());
    }
    announce(header.as_ref().and_then(|h| h.seed), &config_digest(&(z, args.mode == PreviewMode::Label)));
    let label_mode = match args.mode {
        PreviewMode::Label => true,
        PreviewMode::Intensity => false,
        PreviewMode::Auto => !matches!(vol, AnyVolume::F32(_)),
    };
    let pixels: Vec<u8> = if label_mode {
        let labels = vol.into_labels()?;
        labels.slice_z(z)?.iter().map(|&l| label_gray(l)).collect()
    } else {
        let f = vol.to_f32();
        stretch(&f.slice_z(z)?.iter().map(|&v| f64::from(v)).collect::<Vec<_>>())
    };
    let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    bytes.extend_from_slice(&pixels);
    fs::write(&args.out, bytes).map_err(|e| Error::io(&args.out, e))?;
    println!("slice {z} ({ny} x {nx}) -> {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    shape: [usize; 3],
    dtype: String,
    spacing: [f64; 3],
    min: f64,
    max: f64,
    mean: f64,
    variance: f64,
    nonzero: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distinct_labels: Option<usize>,
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let (vol, header) = read_volume(&args.input)?;
    announce(
        header.as_ref().and_then(|h| h.seed),
        header.as_ref().and_then(|h| h.config_digest.as_deref()).unwrap_or("none"),
    );
    let values = vol.to_f32();
    let n = values.len() as f64;
    let (mut sum, mut min, mut max, mut nonzero) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY, 0u64);
    for &v in values.data() {
        let v = f64::from(v);
        sum += v;
        min = min.min(v);
        max = max.max(v);
        nonzero += u64::from(v != 0.0);
    }
    let mean = sum / n;
    let variance = values.data().iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
    let distinct_labels = match &vol {
        AnyVolume::U32(labels) => Some(labels.data().iter().filter(|&&l| l != 0).collect::<BTreeSet<_>>().len()),
        _ => None,
    };
    let summary = Summary {
        shape: vol.shape(),
        dtype: format!("{:?}", vol.dtype()).to_lowercase(),
        spacing: vol.spacing().0,
        min,
        max,
        mean,
        variance,
        nonzero,
        distinct_labels,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
