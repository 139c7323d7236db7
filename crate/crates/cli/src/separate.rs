use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use myosim::io::{config_digest, read_volume, write_manifest, write_volume, AnyVolume, Format, VolumeHeader};
use myosim::watershed::{separate_instances, WatershedParams};
use myosim::{Error, ProbabilityVolume};

use crate::{announce, FormatArg};

#[derive(Args)]
pub struct WatershedArgs {
    /// Foreground probability volume (f32, values in [0, 1]).
    #[arg(long)]
    fg: PathBuf,
    /// Centerline probability volume (f32, values in [0, 1]).
    #[arg(long)]
    cl: PathBuf,
    /// Output path stem; the extension follows --format.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau_fg: f64,
    #[arg(long, default_value_t = 0.5)]
    tau_cl: f64,
    /// Seed components smaller than this are discarded.
    #[arg(long, default_value_t = 5)]
    min_seed_size: usize,
    #[arg(long, value_enum, default_value = "tiff")]
    format: FormatArg,
}

fn load_probability(path: &Path) -> Result<ProbabilityVolume> {
    match read_volume(path)?.0 {
        AnyVolume::F32(v) => {
            v.check_probability()?;
            Ok(v)
        }
        other => Err(Error::Domain(format!(
            "{}: probability volumes must be f32, found {:?}",
            path.display(),
            other.dtype()
        ))
        .into()),
    }
}

pub fn run(args: &WatershedArgs) -> Result<()> {
    let params = WatershedParams {
        tau_fg: args.tau_fg,
        tau_cl: args.tau_cl,
        min_seed_size: args.min_seed_size,
    };
    announce(None, &config_digest(&params));
    let fg = load_probability(&args.fg)?;
    let cl = load_probability(&args.cl)?;
    let (out, report) = separate_instances(&fg, &cl, &params)?;
    let labels = AnyVolume::U32(out.labels);
    let path = write_volume(&args.out, &labels, &VolumeHeader::describe(&labels), Format::from(args.format))?;
    let report_path = args.out.with_extension("report.json");
    write_manifest(&report_path, &report)?;
    println!(
        "{} instances from {} seeds; {} unreachable mask voxels; labels -> {}",
        report.region_sizes.len(),
        report.seeds,
        report.unreachable_voxels,
        path.display()
    );
    Ok(())
}
