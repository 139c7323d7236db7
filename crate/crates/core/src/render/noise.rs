//! Per-voxel noise stages. Every voxel draws from its own stream keyed by
//! its linear index, so results do not depend on how work is split.

use rayon::prelude::*;

use crate::rng::{Stream, StreamKey};
use crate::volume::Volume;

/// Means below this use inversion; above it a continuity-corrected normal
/// approximation.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

/// Poisson sample with the given mean.
pub fn poisson(mean: f64, stream: &mut Stream) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < POISSON_INVERSION_LIMIT {
        let u = stream.unit();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    } else {
        let z = stream.normal();
        (mean + mean.sqrt() * z + 0.5).floor().max(0.0) as u64
    }
}

fn voxel_stream(seed: u64, tag: &str, index: usize) -> Stream {
    Stream::new(StreamKey::new(seed, tag, index as u64))
}

/// Shot noise: `v <- Poisson(v * photons) / photons`. Negative inputs are
/// clamped to zero first; the number of clamped voxels is returned.
pub fn apply_poisson(vol: &mut Volume<f32>, photons_per_unit: f64, seed: u64) -> u64 {
    vol.data_mut()
        .par_iter_mut()
        .enumerate()
        .map(|(i, v)| {
            let clamped = *v < 0.0;
            let mean = f64::from(v.max(0.0)) * photons_per_unit;
            let mut s = voxel_stream(seed, "shot-noise", i);
            *v = (poisson(mean, &mut s) as f64 / photons_per_unit) as f32;
            u64::from(clamped)
        })
        .sum()
}

/// Additive Gaussian read noise.
pub fn apply_read_noise(vol: &mut Volume<f32>, sigma: f64, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    vol.data_mut().par_iter_mut().enumerate().for_each(|(i, v)| {
        let mut s = voxel_stream(seed, "read-noise", i);
        *v = (f64::from(*v) + sigma * s.normal()) as f32;
    });
}

/// Unit-variance Gaussian white noise.
pub fn white_noise(shape: [usize; 3], spacing: crate::volume::Spacing, seed: u64) -> Volume<f32> {
    let mut v: Volume<f32> = Volume::zeros(shape, spacing);
    v.data_mut().par_iter_mut().enumerate().for_each(|(i, x)| {
        *x = voxel_stream(seed, "texture", i).normal() as f32;
    });
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defect {
    None,
    Salt,
    Pepper,
}

/// Hot (salt) and dead (pepper) pixel map.
pub fn defect_map(len: usize, p_salt: f64, p_pepper: f64, seed: u64) -> Vec<Defect> {
    (0..len)
        .into_par_iter()
        .map(|i| {
            if p_salt <= 0.0 && p_pepper <= 0.0 {
                return Defect::None;
            }
            let u = voxel_stream(seed, "salt-pepper", i).unit();
            if u < p_salt {
                Defect::Salt
            } else if u < p_salt + p_pepper {
                Defect::Pepper
            } else {
                Defect::None
            }
        })
        .collect()
}

/// `(sum, sum of squares)` over fixed-size chunks combined in order, so
/// the result does not depend on the thread count.
pub fn moments(data: &[f32]) -> (f64, f64) {
    data.par_chunks(1 << 16)
        .map(|c| {
            c.iter().fold((0.0, 0.0), |(s, q), &x| {
                let x = f64::from(x);
                (s + x, q + x * x)
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(s, q), (a, b)| (s + a, q + b))
}
