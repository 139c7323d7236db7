use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use myosim::geometry::{build_scene, DatasetConfig};
use myosim::io::{
    config_digest, read_manifest, read_volume, write_manifest, write_volume, AnyVolume, DatasetManifest, Format,
    RenderRecord, VolumeEntry, VolumeFiles, VolumeHeader, VolumeManifest, MANIFEST_VERSION,
};
use myosim::render::{render_fluorescence, RenderConfig};
use myosim::rng::StreamKey;
use myosim::voxelize::rasterize;
use rayon::prelude::*;

use crate::{announce, GenerateArgs, RenderArgs};

const DATASET_FILE: &str = "dataset.json";
const MANIFEST_FILE: &str = "manifest.json";
const RENDER_FILE: &str = "render.json";

fn volume_dir(index: usize) -> String {
    format!("vol_{index:03}")
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| myosim::Error::io(path, e))?;
    Ok(())
}

fn print_plan(cfg: &DatasetConfig) {
    let counts: Vec<usize> = (0..cfg.n_volumes).map(|v| cfg.instances_in_volume(v)).collect();
    let [z, y, x] = cfg.grid_shape;
    let voxels = (z * y * x) as u64;
    println!("plan: dataset `{}`", cfg.name);
    println!("  volumes: {}", cfg.n_volumes);
    println!("  shape: ({z}, {y}, {x})");
    println!("  spacing: {:?}", cfg.spacing.0);
    println!("  expected instances: {}", counts.iter().sum::<usize>());
    println!("  instances per volume: {counts:?}");
    println!(
        "  bytes per volume: labels {} + skeleton {} + image {}",
        voxels * 4,
        voxels * 4,
        voxels * if cfg.render.quantization.max_value() > 255.0 { 2 } else { 1 }
    );
}

/// Render one volume from its labels and manifest into `out_dir`.
fn render_volume(
    out_dir: &Path,
    manifest: &VolumeManifest,
    labels: &myosim::LabelVolume,
    cfg: &RenderConfig,
    digest: &str,
    format: Format,
) -> Result<()> {
    let seed = StreamKey::new(manifest.seed, "render", 0).derive_seed();
    let rendered = render_fluorescence(labels, &manifest.scene, cfg, seed)
        .with_context(|| format!("rendering volume {}", manifest.volume_index))?;
    let image = AnyVolume::from(rendered.stack);
    let header = VolumeHeader::describe(&image).with_provenance(seed, digest);
    write_volume(&out_dir.join("image"), &image, &header, format)?;
    let record = RenderRecord {
        seed,
        config_digest: digest.to_string(),
        config: cfg.clone(),
        stats: rendered.stats,
    };
    write_manifest(&out_dir.join(RENDER_FILE), &record)?;
    Ok(())
}

pub fn generate(args: &GenerateArgs, with_render: bool) -> Result<()> {
    let mut cfg = args.source.load()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let digest = config_digest(&cfg);
    announce(Some(cfg.seed), &digest);
    if args.dry_run {
        print_plan(&cfg);
        return Ok(());
    }
    let out = args.out.as_ref().expect("clap enforces --out without --dry-run");
    let format = Format::from(args.format);
    let render_digest = config_digest(&cfg.render);
    create_dir(out)?;

    let entries = (0..cfg.n_volumes)
        .into_par_iter()
        .map(|v| -> Result<VolumeEntry> {
            let scene = build_scene(&cfg.volume_scene(v)).with_context(|| format!("sampling volume {v}"))?;
            let raster = rasterize(&scene)?;
            let dir_name = volume_dir(v);
            let dir = out.join(&dir_name);
            create_dir(&dir)?;
            let seed = scene.config.seed;
            let labels = AnyVolume::U32(raster.labels);
            let skeleton = AnyVolume::U32(raster.skeleton);
            let header = VolumeHeader::describe(&labels).with_provenance(seed, &digest);
            let labels_path = write_volume(&dir.join("labels"), &labels, &header, format)?;
            let skeleton_path = write_volume(&dir.join("skeleton"), &skeleton, &header, format)?;
            let file_name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
            let manifest = VolumeManifest {
                version: MANIFEST_VERSION,
                volume_index: v,
                seed,
                config_digest: digest.clone(),
                files: VolumeFiles {
                    labels: file_name(&labels_path),
                    skeleton: file_name(&skeleton_path),
                    image: None,
                },
                raster: raster.stats,
                scene,
            };
            write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
            if with_render {
                let AnyVolume::U32(labels) = labels else { unreachable!() };
                render_volume(&dir, &manifest, &labels, &cfg.render, &render_digest, format)?;
            }
            Ok(VolumeEntry {
                index: v,
                dir: dir_name,
                seed,
                instances: manifest.scene.models.len(),
                foreground_voxels: manifest.raster.foreground_voxels,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dataset = DatasetManifest {
        version: MANIFEST_VERSION,
        config_digest: digest,
        total_instances: entries.iter().map(|e| e.instances).sum(),
        config: cfg,
        volumes: entries,
    };
    write_manifest(&out.join(DATASET_FILE), &dataset)?;
    println!(
        "wrote {} volumes, {} instances to {}",
        dataset.volumes.len(),
        dataset.total_instances,
        out.display()
    );
    Ok(())
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let dataset: DatasetManifest = read_manifest(&args.input.join(DATASET_FILE))?;
    let cfg = if args.source.given() {
        args.source.load()?.render
    } else {
        dataset.config.render.clone()
    };
    cfg.validate("render")?;
    let digest = config_digest(&cfg);
    announce(Some(dataset.config.seed), &digest);
    let out = args.out.clone().unwrap_or_else(|| args.input.clone());
    let format = Format::from(args.format);

    dataset.volumes.par_iter().try_for_each(|entry| -> Result<()> {
        let src = args.input.join(&entry.dir);
        let manifest: VolumeManifest = read_manifest(&src.join(MANIFEST_FILE))?;
        let (labels, _) = read_volume(&src.join(&manifest.files.labels))?;
        let labels = labels.into_labels()?;
        let dir = out.join(&entry.dir);
        create_dir(&dir)?;
        render_volume(&dir, &manifest, &labels, &cfg, &digest, format)
    })?;
    println!("rendered {} volumes into {}", dataset.volumes.len(), out.display());
    Ok(())
}
