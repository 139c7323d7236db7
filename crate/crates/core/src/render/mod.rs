//! Synthetic fluorescence rendering.
//!
//! Stage order is fixed: base signal with texture and dimmed bulge
//! interiors, halo, debris, PSF blur, shot noise, read noise, hot/dead
//! pixels, then offset, clamping and quantization. Disabling every stage
//! reproduces the clean signal.

pub mod blur;
pub mod noise;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use blur::gaussian_blur_separable;
pub use noise::{apply_poisson, apply_read_noise};

use crate::error::{Error, Result};
use crate::geometry::{EllipsoidKind, Scene};
use crate::rng::Stream;
use crate::vec3::{Frame, Vec3};
use crate::volume::{IntensityVolume, LabelVolume, Volume};
use crate::voxelize::{rasterize_ellipsoid, Ellipsoid};
use noise::Defect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantization {
    U8,
    #[default]
    U16,
}

impl Quantization {
    pub fn max_value(self) -> f64 {
        match self {
            Quantization::U8 => f64::from(u8::MAX),
            Quantization::U16 => f64::from(u16::MAX),
        }
    }
}

/// Degradation parameters. Sigmas are in voxels, `(z, y, x)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub intensity_range: [f64; 2],
    /// Multiplier applied inside hollow bulges.
    pub interior_dim: f64,
    pub texture_sigma: f64,
    pub texture_gain: f64,
    pub halo_sigmas: [f64; 3],
    pub halo_gain: f64,
    pub debris_count_mean: f64,
    pub debris_size_range: [f64; 2],
    pub debris_intensity_range: [f64; 2],
    pub psf_sigmas: [f64; 3],
    /// Photons per intensity unit; `null` disables shot noise.
    pub photons_per_unit: Option<f64>,
    pub read_noise_sigma: f64,
    pub p_salt: f64,
    pub p_pepper: f64,
    pub background_offset: f64,
    pub quantization: Quantization,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            intensity_range: [400.0, 1200.0],
            interior_dim: 0.45,
            texture_sigma: 2.0,
            texture_gain: 0.25,
            halo_sigmas: [5.0, 3.0, 3.0],
            halo_gain: 180.0,
            debris_count_mean: 6.0,
            debris_size_range: [1.0, 3.5],
            debris_intensity_range: [150.0, 900.0],
            psf_sigmas: [1.6, 0.8, 0.8],
            photons_per_unit: Some(0.5),
            read_noise_sigma: 12.0,
            p_salt: 2e-4,
            p_pepper: 2e-4,
            background_offset: 100.0,
            quantization: Quantization::U16,
        }
    }
}

impl RenderConfig {
    /// Every stage off: output equals the base signal, rounded.
    pub fn clean() -> Self {
        Self {
            intensity_range: [100.0, 100.0],
            interior_dim: 1.0,
            texture_sigma: 0.0,
            texture_gain: 0.0,
            halo_sigmas: [0.0; 3],
            halo_gain: 0.0,
            debris_count_mean: 0.0,
            debris_size_range: [1.0, 1.0],
            debris_intensity_range: [0.0, 0.0],
            psf_sigmas: [0.0; 3],
            photons_per_unit: None,
            read_noise_sigma: 0.0,
            p_salt: 0.0,
            p_pepper: 0.0,
            background_offset: 0.0,
            quantization: Quantization::U16,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let err = |field: &str, msg: &str| Err(Error::schema(format!("{prefix}.{field}"), msg));
        let pair_ok = |p: [f64; 2]| p[0].is_finite() && p[1].is_finite() && p[0] <= p[1];
        if !pair_ok(self.intensity_range) || self.intensity_range[0] < 0.0 {
            return err("intensity_range", "must be a non-negative [min, max] pair");
        }
        if !(0.0..=1.0).contains(&self.interior_dim) {
            return err("interior_dim", "must lie in [0, 1]");
        }
        if self.texture_sigma < 0.0 || self.texture_gain < 0.0 {
            return err("texture_gain", "texture sigma and gain must be non-negative");
        }
        if self.halo_sigmas.iter().any(|s| !(*s >= 0.0)) || self.halo_gain < 0.0 {
            return err("halo_sigmas", "halo sigmas and gain must be non-negative");
        }
        if !(self.debris_count_mean >= 0.0) {
            return err("debris_count_mean", "must be non-negative");
        }
        if !pair_ok(self.debris_size_range) || self.debris_size_range[0] <= 0.0 {
            return err("debris_size_range", "must be a positive [min, max] pair");
        }
        if !pair_ok(self.debris_intensity_range) {
            return err("debris_intensity_range", "must be a [min, max] pair");
        }
        if self.psf_sigmas.iter().any(|s| !(*s >= 0.0)) {
            return err("psf_sigmas", "must be non-negative");
        }
        if let Some(p) = self.photons_per_unit {
            if !(p > 0.0 && p.is_finite()) {
                return err("photons_per_unit", "must be positive (or null to disable)");
            }
        }
        if !(self.read_noise_sigma >= 0.0) {
            return err("read_noise_sigma", "must be non-negative");
        }
        if !(0.0..=0.01).contains(&self.p_salt) {
            return err("p_salt", "must lie in [0, 0.01]");
        }
        if !(0.0..=0.01).contains(&self.p_pepper) {
            return err("p_pepper", "must lie in [0, 0.01]");
        }
        if !(self.background_offset >= 0.0) {
            return err("background_offset", "must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantizedVolume {
    U8(Volume<u8>),
    U16(Volume<u16>),
}

impl QuantizedVolume {
    pub fn shape(&self) -> [usize; 3] {
        match self {
            QuantizedVolume::U8(v) => v.shape(),
            QuantizedVolume::U16(v) => v.shape(),
        }
    }

    pub fn to_f32(&self) -> Volume<f32> {
        match self {
            QuantizedVolume::U8(v) => v.map(|&x| f32::from(x)),
            QuantizedVolume::U16(v) => v.map(|&x| f32::from(x)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderStats {
    /// Base intensity drawn for each instance.
    pub instance_intensity: BTreeMap<u32, f64>,
    pub debris_count: u64,
    pub negative_clamped: u64,
    pub salt_voxels: u64,
    pub pepper_voxels: u64,
    pub saturated_voxels: u64,
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub stack: QuantizedVolume,
    pub stats: RenderStats,
}

/// Stage 1: per-instance signal with multiplicative texture, dimmed inside
/// hollow bulges.
pub fn base_signal(labels: &LabelVolume, scene: &Scene, cfg: &RenderConfig, seed: u64) -> (IntensityVolume, BTreeMap<u32, f64>) {
    let intensity: BTreeMap<u32, f64> = scene
        .models
        .iter()
        .map(|m| {
            let mut s = Stream::keyed(seed, "intensity", u64::from(m.instance_id));
            let [lo, hi] = cfg.intensity_range;
            (m.instance_id, s.uniform(lo, hi))
        })
        .collect();

    let texture = (cfg.texture_gain > 0.0).then(|| {
        let white = noise::white_noise(labels.shape(), labels.spacing(), seed);
        let s = cfg.texture_sigma;
        let smooth = gaussian_blur_separable(&white, [s, s, s]);
        let n = smooth.len() as f64;
        let (sum, sq) = noise::moments(smooth.data());
        let mean = sum / n;
        let std = ((sq / n) - mean * mean).max(0.0).sqrt();
        let scale = if std > 0.0 { 1.0 / std } else { 0.0 };
        smooth.map(|&g| ((f64::from(g) - mean) * scale) as f32)
    });

    let mut signal: IntensityVolume = Volume::zeros(labels.shape(), labels.spacing());
    signal
        .data_mut()
        .par_iter_mut()
        .zip(labels.data().par_iter())
        .enumerate()
        .for_each(|(i, (v, &l))| {
            if l == 0 {
                return;
            }
            let base = intensity.get(&l).copied().unwrap_or(0.0);
            let tex = texture
                .as_ref()
                .map_or(1.0, |t| 1.0 + cfg.texture_gain * f64::from(t.data()[i]));
            *v = (base * tex).max(0.0) as f32;
        });

    if cfg.interior_dim < 1.0 {
        for m in &scene.models {
            for e in m.ellipsoids.iter().filter(|e| e.kind == EllipsoidKind::HollowShaft) {
                let (Ok(center), Ok(frame)) = (m.ellipsoid_center(e), m.ellipsoid_frame(e)) else {
                    continue;
                };
                let inner = Ellipsoid {
                    center,
                    semi_axes: e.semi_axes,
                    frame,
                }
                .scaled(e.shell_fraction);
                for i in rasterize_ellipsoid(&inner, labels.shape(), labels.spacing()) {
                    if labels.data()[i] == m.instance_id {
                        signal.data_mut()[i] *= cfg.interior_dim as f32;
                    }
                }
            }
        }
    }
    (signal, intensity)
}

/// Stage 2: blurred foreground glow added to background voxels only.
pub fn add_halo(signal: &mut IntensityVolume, labels: &LabelVolume, sigmas: [f64; 3], gain: f64) {
    if gain <= 0.0 {
        return;
    }
    let indicator = labels.map(|&l| if l != 0 { 1f32 } else { 0.0 });
    let glow = gaussian_blur_separable(&indicator, sigmas);
    signal
        .data_mut()
        .par_iter_mut()
        .zip(labels.data().par_iter().zip(glow.data().par_iter()))
        .for_each(|(v, (&l, &g))| {
            if l == 0 {
                *v += (gain * f64::from(g)) as f32;
            }
        });
}

/// Stage 3: Poisson-many small bright ellipsoids anywhere in the volume.
pub fn add_debris(signal: &mut IntensityVolume, cfg: &RenderConfig, seed: u64) -> u64 {
    let mut count_stream = Stream::keyed(seed, "debris-count", 0);
    let count = noise::poisson(cfg.debris_count_mean, &mut count_stream);
    let [nz, ny, nx] = signal.shape();
    let sp = signal.spacing();
    for j in 0..count {
        let mut s = Stream::keyed(seed, "debris", j);
        let center = Vec3::new(
            s.unit() * (nx - 1) as f64 * sp.0[2],
            s.unit() * (ny - 1) as f64 * sp.0[1],
            s.unit() * (nz - 1) as f64 * sp.0[0],
        );
        let size = s.uniform(cfg.debris_size_range[0], cfg.debris_size_range[1]);
        let semi_axes = [size * s.uniform(0.6, 1.0), size * s.uniform(0.6, 1.0), size * s.uniform(0.6, 1.0)];
        let dir = Vec3::new(s.normal(), s.normal(), s.normal());
        let frame = if dir.norm() > 0.0 { Frame::from_tangent(dir) } else { Frame::identity() };
        let value = s.uniform(cfg.debris_intensity_range[0], cfg.debris_intensity_range[1]) as f32;
        let e = Ellipsoid {
            center,
            semi_axes,
            frame,
        };
        for i in rasterize_ellipsoid(&e, signal.shape(), sp) {
            signal.data_mut()[i] += value;
        }
    }
    count
}

fn check_inputs(labels: &LabelVolume, scene: &Scene) -> Result<()> {
    if labels.shape() != scene.config.grid_shape {
        return Err(Error::ShapeMismatch {
            expected: scene.config.grid_shape,
            found: labels.shape(),
        });
    }
    let known: std::collections::BTreeSet<u32> = scene.models.iter().map(|m| m.instance_id).collect();
    if let Some(&l) = labels.data().iter().find(|&&l| l != 0 && !known.contains(&l)) {
        return Err(Error::GridMismatch(format!(
            "label {l} has no model in the scene manifest"
        )));
    }
    Ok(())
}

/// Stages 1 through 6 in floating point, before defects and quantization.
pub fn render_analog(labels: &LabelVolume, scene: &Scene, cfg: &RenderConfig, seed: u64) -> Result<(IntensityVolume, RenderStats)> {
    check_inputs(labels, scene)?;
    let mut stats = RenderStats::default();
    let (mut signal, intensity) = base_signal(labels, scene, cfg, seed);
    stats.instance_intensity = intensity;
    add_halo(&mut signal, labels, cfg.halo_sigmas, cfg.halo_gain);
    if cfg.debris_count_mean > 0.0 {
        stats.debris_count = add_debris(&mut signal, cfg, seed);
    }
    if cfg.psf_sigmas.iter().any(|&s| s > 0.0) {
        signal = gaussian_blur_separable(&signal, cfg.psf_sigmas);
    }
    if let Some(photons) = cfg.photons_per_unit {
        stats.negative_clamped = apply_poisson(&mut signal, photons, seed);
    }
    apply_read_noise(&mut signal, cfg.read_noise_sigma, seed);
    Ok((signal, stats))
}

/// Full degradation chain, quantized to the configured integer type.
pub fn render_fluorescence(labels: &LabelVolume, scene: &Scene, cfg: &RenderConfig, seed: u64) -> Result<Rendered> {
    cfg.validate("render")?;
    let (analog, mut stats) = render_analog(labels, scene, cfg, seed)?;
    let defects = noise::defect_map(analog.len(), cfg.p_salt, cfg.p_pepper, seed);
    let max = cfg.quantization.max_value();
    let offset = cfg.background_offset;

    let levels: Vec<f64> = analog
        .data()
        .par_iter()
        .zip(defects.par_iter())
        .map(|(&v, &d)| match d {
            Defect::Salt => max,
            Defect::Pepper => 0.0,
            Defect::None => (f64::from(v) + offset).round().clamp(0.0, max),
        })
        .collect();
    stats.salt_voxels = defects.iter().filter(|&&d| d == Defect::Salt).count() as u64;
    stats.pepper_voxels = defects.iter().filter(|&&d| d == Defect::Pepper).count() as u64;
    stats.saturated_voxels = levels.iter().filter(|&&v| v >= max).count() as u64;

    let (shape, spacing) = (analog.shape(), analog.spacing());
    let stack = match cfg.quantization {
        Quantization::U8 => QuantizedVolume::U8(Volume::from_vec(shape, spacing, levels.iter().map(|&v| v as u8).collect())?),
        Quantization::U16 => QuantizedVolume::U16(Volume::from_vec(shape, spacing, levels.iter().map(|&v| v as u16).collect())?),
    };
    Ok(Rendered { stack, stats })
}
