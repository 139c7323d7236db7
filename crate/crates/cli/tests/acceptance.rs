//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use myosim::geometry::{build_scene, chebyshev_t, ChebyshevSeries, DatasetConfig};
use myosim::io::{read_manifest, read_volume, write_volume, AnyVolume, Format, VolumeHeader, VolumeManifest};
use myosim::metrics::{injective_match, ipq_sparse, t_two_sided_p, IpqOptions};
use myosim::render::blur::gaussian_blur_separable;
use myosim::render::noise::{apply_poisson, apply_read_noise, defect_map, moments, Defect};
use myosim::rng::Stream;
use myosim::volume::{Spacing, Volume};
use myosim::voxelize::rasterize;
use myosim::watershed::{blurred_instance_probability, separate_instances, WatershedParams};
use myosim::Vec3;
use sha2::{Digest, Sha256};

const CHEB_TOL: f64 = 1e-10;
const CHEB_SECONDS: f64 = 1.0;
const DAMPING_SLOPE: f64 = -2.0;
const DAMPING_TOL: f64 = 0.1;
const RASTER_SCENES: u64 = 50;
const RASTER_SECONDS: f64 = 60.0;
const PRESET_INSTANCE_TOL: f64 = 0.10;
const DESK_SECONDS: f64 = 60.0;
const POISSON_VAR_TOL: f64 = 0.10;
const READ_NOISE_TOL: f64 = 0.05;
const NOISE_VOXELS: usize = 100_000;
const BLUR_MASS_TOL: f64 = 1e-3;
const BLUR_DENSE_TOL: f64 = 1e-6;
const CROSSING_IOU: f64 = 0.8;
const CHAIN_IOU: f64 = 0.9;
const CHAIN_INSTANCES: usize = 10;
const CHAIN_SKELETON_RADIUS: f64 = 1.5;
const MATCH_MATRICES: u64 = 100;
const P_TOL: f64 = 1e-6;

type Outcome = (bool, String);
type Criterion<'a> = (&'static str, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_myosim")
}

fn run_cli(args: &[&str]) -> (bool, String) {
    let o = Command::new(bin()).args(args).output().expect("binary runs");
    let mut text = String::from_utf8_lossy(&o.stdout).into_owned();
    text.push_str(&String::from_utf8_lossy(&o.stderr));
    (o.status.success(), text)
}

fn c1_chebyshev() -> Outcome {
    let start = Instant::now();
    let mut s = Stream::keyed(1, "acceptance-cheb", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = s.uniform(-1.0, 1.0);
        for k in 0..=12 {
            worst = worst.max((chebyshev_t(k, t) - (k as f64 * t.acos()).cos()).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (worst < CHEB_TOL && secs < CHEB_SECONDS, format!("max |err| {worst:.2e}, {secs:.3} s"))
}

fn c2_damping() -> Outcome {
    let (degree, n) = (10, 20_000u64);
    let mut acc = vec![(0.0, 0.0); degree + 1];
    for i in 0..n {
        let series = ChebyshevSeries::sample_damped(degree, 2.0, 1.0, &mut Stream::keyed(2, "acceptance-damping", i));
        for (k, c) in series.coeffs.iter().enumerate() {
            acc[k].0 += c;
            acc[k].1 += c * c;
        }
    }
    let nf = n as f64;
    let pts: Vec<(f64, f64)> = acc
        .iter()
        .enumerate()
        .map(|(k, &(s, q))| {
            let var = (q - s * s / nf) / (nf - 1.0);
            (((k + 1) as f64).ln(), 0.5 * var.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    ((slope - DAMPING_SLOPE).abs() <= DAMPING_TOL, format!("slope {slope:.4} over {n} series"))
}

fn c3_rasterizer() -> Outcome {
    let start = Instant::now();
    let mut mismatched = 0usize;
    let mut voxels = 0usize;
    for k in 0..RASTER_SCENES {
        let scene = build_scene(&common::random_scene_config(k)).unwrap();
        let fast = rasterize(&scene).unwrap();
        let (labels, skeleton) = common::oracle_rasterize(&scene);
        mismatched += fast.labels.data().iter().zip(labels.data()).filter(|(a, b)| a != b).count();
        mismatched += fast.skeleton.data().iter().zip(skeleton.data()).filter(|(a, b)| a != b).count();
        voxels += labels.len();
    }
    let secs = start.elapsed().as_secs_f64();
    (
        mismatched == 0 && secs < RASTER_SECONDS,
        format!("{RASTER_SCENES} scenes, {voxels} voxels, {mismatched} mismatched, {secs:.1} s"),
    )
}

fn c4_presets(work: &Path) -> Outcome {
    let (ok, text) = run_cli(&["synth", "--preset", "paper-train", "--dry-run"]);
    let volumes = text.contains("volumes: 30");
    let shape = text.contains("(128, 1024, 1024)");
    let expected: Option<f64> = text
        .lines()
        .find_map(|l| l.trim_start().strip_prefix("expected instances: "))
        .and_then(|v| v.trim().parse().ok());
    let instances_ok = expected.is_some_and(|e| (e - 200.0).abs() <= PRESET_INSTANCE_TOL * 200.0);
    let start = Instant::now();
    let (desk_ok, desk_text) = run_cli(&["synth", "--preset", "desk", "--out", work.join("desk").to_str().unwrap()]);
    let secs = start.elapsed().as_secs_f64();
    if !desk_ok {
        return (false, format!("desk synth failed: {desk_text}"));
    }
    (
        ok && volumes && shape && instances_ok && secs < DESK_SECONDS,
        format!("dry-run volumes={volumes} shape={shape} expected={expected:?}; desk generate+render {secs:.1} s"),
    )
}

fn c5_noise() -> Outcome {
    let shape = [8, 128, 128];
    let n = shape.iter().product::<usize>();
    assert!(n >= NOISE_VOXELS);
    let stats = |data: &[f32]| {
        let (s, q) = moments(data);
        let m = s / n as f64;
        (m, (q - n as f64 * m * m) / (n as f64 - 1.0))
    };
    let mut worst_poisson: f64 = 0.0;
    for (level, photons) in [(4.0f32, 0.5), (20.0, 1.0), (150.0, 0.5), (500.0, 2.0)] {
        let mut v = Volume::filled(shape, Spacing::ISOTROPIC, level);
        apply_poisson(&mut v, photons, 31);
        let (_, var) = stats(v.data());
        worst_poisson = worst_poisson.max((var / (f64::from(level) / photons) - 1.0).abs());
    }
    let mut v = Volume::filled(shape, Spacing::ISOTROPIC, 300f32);
    apply_read_noise(&mut v, 12.0, 32);
    let read_err = (stats(v.data()).1.sqrt() / 12.0 - 1.0).abs();
    let p_salt = 1e-3;
    let big = 1 << 20;
    let salt = defect_map(big, p_salt, 5e-4, 33).iter().filter(|&&d| d == Defect::Salt).count() as f64;
    let z = (salt - big as f64 * p_salt) / (big as f64 * p_salt * (1.0 - p_salt)).sqrt();
    (
        worst_poisson < POISSON_VAR_TOL && read_err < READ_NOISE_TOL && z.abs() <= 3.0,
        format!("poisson var err {worst_poisson:.3}, read std err {read_err:.4}, salt z {z:.2}"),
    )
}

fn c6_blur() -> Outcome {
    let mut worst_mass: f64 = 0.0;
    for seed in 0..10u64 {
        let sigmas = [0.8 + 0.2 * seed as f64, 1.0, 1.6];
        let pad: Vec<usize> = sigmas.iter().map(|s| (4.0 * s).ceil() as usize).collect();
        let shape = [16 + 2 * pad[0], 24 + 2 * pad[1], 24 + 2 * pad[2]];
        let mut s = Stream::keyed(seed, "acceptance-mass", 0);
        let vol = Volume::from_fn(shape, Spacing::ISOTROPIC, |z, y, x| {
            let inner = (pad[0]..shape[0] - pad[0]).contains(&z)
                && (pad[1]..shape[1] - pad[1]).contains(&y)
                && (pad[2]..shape[2] - pad[2]).contains(&x);
            if inner { s.uniform(0.0, 1000.0) as f32 } else { 0.0 }
        });
        let before: f64 = vol.data().iter().map(|&v| f64::from(v)).sum();
        let after: f64 = gaussian_blur_separable(&vol, sigmas).data().iter().map(|&v| f64::from(v)).sum();
        worst_mass = worst_mass.max(((after - before) / before).abs());
    }
    let mut worst_dense: f64 = 0.0;
    for (seed, sigmas) in [(1u64, [1.0, 1.0, 1.0]), (2, [1.5, 0.8, 2.0])] {
        let mut s = Stream::keyed(seed, "acceptance-dense", 0);
        let vol = Volume::from_fn([17, 17, 17], Spacing::ISOTROPIC, |_, _, _| s.uniform(0.0, 1.0) as f32);
        let fast = gaussian_blur_separable(&vol, sigmas);
        let dense = common::dense_blur(&vol, sigmas);
        for (&a, &b) in fast.data().iter().zip(&dense) {
            worst_dense = worst_dense.max((f64::from(a) - b).abs());
        }
    }
    (
        worst_mass < BLUR_MASS_TOL && worst_dense < BLUR_DENSE_TOL,
        format!("mass rel err {worst_mass:.2e}, dense max err {worst_dense:.2e} on 17^3"),
    )
}

fn chain(scene: &myosim::geometry::Scene) -> (usize, Vec<f64>, usize) {
    let raster = rasterize(scene).unwrap();
    let p_fg = blurred_instance_probability(&raster.labels, 1.0);
    let p_cl = blurred_instance_probability(&raster.skeleton, 1.0);
    let (out, report) = separate_instances(&p_fg, &p_cl, &WatershedParams::default()).unwrap();
    let r = ipq_sparse(&out.labels, &raster.labels, IpqOptions::default()).unwrap();
    (report.region_sizes.len(), r.scores(), r.matches.unmatched_gt.len())
}

fn c7a_crossing() -> Outcome {
    let mut config = DatasetConfig::preset("desk").unwrap().volume_scene(0);
    config.grid_shape = [32, 64, 64];
    config.skeleton_radius = CHAIN_SKELETON_RADIUS;
    config.n_instances = 2;
    let scene = myosim::geometry::Scene {
        config,
        models: vec![
            myosim::geometry::MyotubeModel::straight(1, Vec3::new(32.0, 32.0, 13.0), Vec3::X, 26.0, 4.0),
            myosim::geometry::MyotubeModel::straight(2, Vec3::new(32.0, 32.0, 19.0), Vec3::Y, 26.0, 4.0),
        ],
    };
    let (n, scores, _) = chain(&scene);
    (
        n == 2 && scores.len() == 2 && scores.iter().all(|&s| s >= CROSSING_IOU),
        format!("{n} instances, IoU {scores:.3?}"),
    )
}

fn c7b_chain() -> Outcome {
    let mut config = DatasetConfig::preset("desk").unwrap().volume_scene(0);
    config.n_instances = CHAIN_INSTANCES;
    config.skeleton_radius = CHAIN_SKELETON_RADIUS;
    let scene = build_scene(&config).unwrap();
    let (n, scores, unmatched) = chain(&scene);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let matched: Vec<f64> = scores.iter().copied().filter(|&s| s > 0.0).collect();
    let matched_mean = matched.iter().sum::<f64>() / matched.len().max(1) as f64;
    (
        mean >= CHAIN_IOU,
        format!(
            "{} GT, {n} predicted, {unmatched} GT unmatched, mean IoU {mean:.3} (matched only {matched_mean:.3}; need >= {CHAIN_IOU})",
            scores.len()
        ),
    )
}

fn c8_matching() -> Outcome {
    let mut bad = 0;
    for k in 0..MATCH_MATRICES {
        let mut s = Stream::keyed(8, "acceptance-match", k);
        let (rows, cols) = (s.uniform_int(1, 6) as usize, s.uniform_int(1, 6) as usize);
        let w: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| if s.unit() < 0.3 { 0.0 } else { s.uniform_int(1, 64) as f64 / 64.0 }).collect())
            .collect();
        let (best, expected) = common::exhaustive(&w);
        let got = injective_match(&w);
        let total: f64 = got.iter().enumerate().filter_map(|(r, c)| c.map(|c| w[r][c])).sum();
        if total != best || got != expected {
            bad += 1;
        }
    }
    (bad == 0, format!("{MATCH_MATRICES} matrices up to 6x6, {bad} differ from exhaustive optimum"))
}

fn c9_ipq() -> Outcome {
    let gt = Volume::filled([1, 10, 10], Spacing::ISOTROPIC, 1u32);
    let empty = Volume::zeros([1, 10, 10], Spacing::ISOTROPIC);
    let split = Volume::from_fn([1, 10, 10], Spacing::ISOTROPIC, |_, y, _| if y < 5 { 3 } else { 4 });
    let score = |p: &Volume<u32>| ipq_sparse(p, &gt, IpqOptions::default()).unwrap().mean;
    let (a, b, c) = (score(&gt), score(&empty), score(&split));
    (a == 1.0 && b == 0.0 && c == 0.5, format!("identity {a}, empty {b}, 50/50 split {c}"))
}

fn c10_pvalues() -> Outcome {
    let mut worst: f64 = 0.0;
    for df in [5.0, 10.0, 39.0] {
        for i in 0..=40 {
            let t = i as f64 * 0.2;
            worst = worst.max((t_two_sided_p(t, df) - common::quadrature_p(t, df)).abs());
        }
    }
    (worst < P_TOL, format!("max |dp| {worst:.2e} for df 5, 10, 39"))
}

fn tree_hash(root: &Path) -> (String, usize) {
    let mut files = BTreeMap::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.unwrap();
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            files.insert(rel, hex::encode(Sha256::digest(std::fs::read(entry.path()).unwrap())));
        }
    }
    let mut h = Sha256::new();
    for (k, v) in &files {
        h.update(k.as_bytes());
        h.update(v.as_bytes());
    }
    (hex::encode(h.finalize()), files.len())
}

fn c11_determinism(work: &Path) -> Outcome {
    let mut hashes = Vec::new();
    for threads in ["1", "3", "8"] {
        let out: PathBuf = work.join(format!("threads_{threads}"));
        let (ok, text) = run_cli(&["--threads", threads, "synth", "--preset", "desk", "--seed", "7", "--out", out.to_str().unwrap()]);
        if !ok {
            return (false, format!("synth failed: {text}"));
        }
        hashes.push(tree_hash(&out));
    }
    let same = hashes.windows(2).all(|w| w[0] == w[1]);
    (same, format!("threads 1/3/8: {} files, tree sha256 {}", hashes[0].1, &hashes[0].0[..16]))
}

fn c12_io(work: &Path) -> Outcome {
    let dir = work.join("io");
    std::fs::create_dir_all(&dir).unwrap();
    let mut s = Stream::keyed(12, "acceptance-io", 0);
    let shape = [5, 17, 23];
    let spacing = Spacing([3.0, 0.5, 0.5]);
    let vols = [
        AnyVolume::U8(Volume::from_fn(shape, spacing, |_, _, _| s.next_u64() as u8)),
        AnyVolume::U16(Volume::from_fn(shape, spacing, |_, _, _| s.next_u64() as u16)),
        AnyVolume::U32(Volume::from_fn(shape, spacing, |_, _, _| s.next_u64() as u32)),
        AnyVolume::F32(Volume::from_fn(shape, spacing, |_, _, _| s.normal() as f32)),
    ];
    let mut roundtrips = 0;
    for (i, v) in vols.iter().enumerate() {
        for format in [Format::Tiff, Format::Raw] {
            let path = write_volume(&dir.join(format!("v{i}")), v, &VolumeHeader::describe(v), format).unwrap();
            let (back, _) = read_volume(&path).unwrap();
            if back.to_le_bytes() == v.to_le_bytes() && back.shape() == v.shape() && back.spacing() == v.spacing() {
                roundtrips += 1;
            }
        }
    }
    // labels of the desk dataset written in criterion 4, rebuilt from manifests
    let mut rebuilt_ok = 0;
    let mut total = 0;
    for entry in std::fs::read_dir(work.join("desk")).unwrap() {
        let dir = entry.unwrap().path();
        if !dir.is_dir() {
            continue;
        }
        total += 1;
        let m: VolumeManifest = read_manifest(&dir.join("manifest.json")).unwrap();
        let raster = rasterize(&m.scene).unwrap();
        let (stored, _) = read_volume(&dir.join(&m.files.labels)).unwrap();
        if AnyVolume::U32(raster.labels).to_le_bytes() == stored.to_le_bytes() {
            rebuilt_ok += 1;
        }
    }
    (
        roundtrips == 8 && total > 0 && rebuilt_ok == total,
        format!("{roundtrips}/8 dtype x format round trips, {rebuilt_ok}/{total} volumes rebuilt from manifest"),
    )
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let criteria: Vec<Criterion> = vec![
        ("1", "chebyshev recurrence", Box::new(c1_chebyshev)),
        ("2", "damping law", Box::new(c2_damping)),
        ("3", "rasterizer oracle", Box::new(c3_rasterizer)),
        ("4", "preset fidelity", Box::new(move || c4_presets(w))),
        ("5", "noise statistics", Box::new(c5_noise)),
        ("6", "blur conservation", Box::new(c6_blur)),
        ("7a", "watershed crossing tubes", Box::new(c7a_crossing)),
        ("7b", "watershed desk chain", Box::new(c7b_chain)),
        ("8", "matching optimality", Box::new(c8_matching)),
        ("9", "ipq hand cases", Box::new(c9_ipq)),
        ("10", "t-test p-values", Box::new(c10_pvalues)),
        ("11", "thread-count determinism", Box::new(move || c11_determinism(w))),
        ("12", "io round trips", Box::new(move || c12_io(w))),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in &criteria {
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("criterion {id:>3} {name:<26} {}  {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(*id);
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
