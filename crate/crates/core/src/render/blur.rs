//! Separable Gaussian filtering with border renormalization.

use rayon::prelude::*;

use crate::volume::Volume;

/// Sampled Gaussian on `[-R, R]`, `R = ceil(4 sigma)`, unnormalized.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// For every position along an axis of length `n`, the reciprocal of the
/// kernel mass that falls inside the grid.
fn inverse_norms(kernel: &[f64], n: usize) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    (0..n as isize)
        .map(|i| {
            let mass: f64 = (-r..=r)
                .filter(|k| (0..n as isize).contains(&(i + k)))
                .map(|k| kernel[(k + r) as usize])
                .sum();
            1.0 / mass
        })
        .collect()
}

/// One pass along a strided axis. `planes` is the number of independent
/// blocks, each holding `n` lines of `inner` contiguous values.
fn convolve_axis(data: &[f32], n: usize, inner: usize, kernel: &[f64]) -> Vec<f32> {
    let r = (kernel.len() / 2) as isize;
    let inv = inverse_norms(kernel, n);
    let block = n * inner;
    let mut out = vec![0f32; data.len()];
    out.par_chunks_mut(block)
        .zip(data.par_chunks(block))
        .for_each(|(dst, src)| {
            let mut acc = vec![0f64; inner];
            for i in 0..n {
                acc.iter_mut().for_each(|a| *a = 0.0);
                for k in -r..=r {
                    let j = i as isize + k;
                    if j < 0 || j >= n as isize {
                        continue;
                    }
                    let w = kernel[(k + r) as usize];
                    let line = &src[j as usize * inner..(j as usize + 1) * inner];
                    for (a, &v) in acc.iter_mut().zip(line) {
                        *a += w * f64::from(v);
                    }
                }
                let s = inv[i];
                for (d, a) in dst[i * inner..(i + 1) * inner].iter_mut().zip(&acc) {
                    *d = (a * s) as f32;
                }
            }
        });
    out
}

/// Blur along z, then y, then x. `sigmas` are in voxels, `(sz, sy, sx)`;
/// a zero sigma leaves that axis untouched.
pub fn gaussian_blur_separable(vol: &Volume<f32>, sigmas: [f64; 3]) -> Volume<f32> {
    let [nz, ny, nx] = vol.shape();
    let mut data = vol.data().to_vec();
    // (length along axis, stride of one step along it)
    let layout = [(nz, ny * nx), (ny, nx), (nx, 1)];
    for (axis, &(n, inner)) in layout.iter().enumerate() {
        let sigma = sigmas[axis];
        if !(sigma > 0.0) {
            continue;
        }
        let kernel = gaussian_kernel(sigma);
        data = if inner == 1 {
            convolve_rows(&data, n, &kernel)
        } else {
            convolve_axis(&data, n, inner, &kernel)
        };
    }
    Volume::from_vec(vol.shape(), vol.spacing(), data).expect("shape preserved")
}

/// Pass along the contiguous axis, one row at a time.
fn convolve_rows(data: &[f32], n: usize, kernel: &[f64]) -> Vec<f32> {
    let r = (kernel.len() / 2) as isize;
    let inv = inverse_norms(kernel, n);
    let mut out = vec![0f32; data.len()];
    out.par_chunks_mut(n)
        .zip(data.par_chunks(n))
        .for_each(|(dst, src)| {
            for (i, d) in dst.iter_mut().enumerate() {
                let mut acc = 0f64;
                for k in -r..=r {
                    let j = i as isize + k;
                    if j >= 0 && j < n as isize {
                        acc += kernel[(k + r) as usize] * f64::from(src[j as usize]);
                    }
                }
                *d = (acc * inv[i]) as f32;
            }
        });
    out
}
