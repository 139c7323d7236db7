//! Rasterization of scenes into instance labels and a centerline channel.
//!
//! Each instance is reduced to primitives: a chain of capsules (segments
//! between consecutive polyline samples, radius interpolated linearly) and
//! its ellipsoids. A voxel centre belongs to an instance when its
//! normalized distance (distance over local radius, or the ellipsoid norm)
//! to any primitive is at most one. Contested voxels are settled by an
//! [`OverlapPolicy`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MyotubeModel, Scene};
use crate::vec3::{Frame, Vec3};
use crate::volume::{voxel_count, LabelVolume, Shape, SkeletonVolume, Spacing, Volume};

/// Slices per work unit; also the granularity of parallelism.
const SLAB_DEPTH: usize = 8;
const MAX_BISECTIONS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapPolicy {
    /// Smallest distance/radius ratio wins; ties go to the lower id.
    #[default]
    ClosestNormalized,
    FirstWins,
    LastWins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub point: Vec3,
    pub radius: f64,
}

pub type Polyline = Vec<Sample>;

/// Discretize the centerline and every branch so that consecutive samples
/// are at most `max_step` apart. The first polyline is the main shaft and
/// runs from `t = -1` to `t = 1`.
pub fn polyline_of(model: &MyotubeModel, max_step: f64) -> Result<Vec<Polyline>> {
    if !(max_step > 0.0) {
        return Err(Error::Domain(format!("max_step must be positive, got {max_step}")));
    }
    let sample = |t: f64| -> Result<Sample> {
        Ok(Sample {
            point: model.centerline_point(t)?,
            radius: model.radius_at(t)?,
        })
    };

    // refine a coarse uniform grid by bisecting any chord that is too long
    let coarse = 16;
    let mut ts: Vec<f64> = (0..=coarse)
        .map(|i| -1.0 + 2.0 * i as f64 / coarse as f64)
        .collect();
    ts[coarse] = 1.0;
    let mut shaft = vec![sample(ts[0])?];
    let mut t_prev = ts[0];
    for &t_end in &ts[1..] {
        let mut stack = vec![(t_end, 0usize)];
        while let Some(&(t_next, depth)) = stack.last() {
            let s_next = sample(t_next)?;
            let prev = *shaft.last().expect("non-empty");
            if (s_next.point - prev.point).norm() > max_step && depth < MAX_BISECTIONS {
                stack.push((0.5 * (t_prev + t_next), depth + 1));
            } else {
                shaft.push(s_next);
                t_prev = t_next;
                stack.pop();
            }
        }
    }

    let mut lines = vec![shaft];
    for b in &model.branches {
        let start = model.branch_start(b)?;
        let n = (b.length / max_step).ceil().max(1.0) as usize;
        let mut line = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s = b.length * i as f64 / n as f64;
            line.push(Sample {
                point: start + b.direction * s,
                radius: model.branch_radius(b, s)?,
            });
        }
        lines.push(line);
    }
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub ra: f64,
    pub rb: f64,
}

impl Capsule {
    /// Distance to the segment and the interpolated radius at the closest
    /// point.
    #[inline]
    pub fn distance_and_radius(&self, p: Vec3) -> (f64, f64) {
        let ab = self.b - self.a;
        let len_sq = ab.norm_sq();
        let u = if len_sq > 0.0 {
            ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let closest = self.a + ab * u;
        ((p - closest).norm(), self.ra + u * (self.rb - self.ra))
    }

    #[inline]
    pub fn ratio(&self, p: Vec3) -> f64 {
        let (d, r) = self.distance_and_radius(p);
        d / r
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let r = self.ra.max(self.rb);
        let pad = Vec3::new(r, r, r);
        (self.a.component_min(self.b) - pad, self.a.component_max(self.b) + pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: Vec3,
    pub semi_axes: [f64; 3],
    pub frame: Frame,
}

impl Ellipsoid {
    /// Ellipsoidal norm of `p`; inside iff at most one.
    #[inline]
    pub fn ratio(&self, p: Vec3) -> f64 {
        let q = self.frame.project(p - self.center);
        let (a, b, c) = (self.semi_axes[0], self.semi_axes[1], self.semi_axes[2]);
        ((q.x / a).powi(2) + (q.y / b).powi(2) + (q.z / c).powi(2)).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            semi_axes: self.semi_axes.map(|s| s * factor),
            ..*self
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let extent = |j: usize| -> f64 {
            (0..3)
                .map(|i| (self.semi_axes[i] * self.frame.axes[i].to_array()[j]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let e = Vec3::new(extent(0), extent(1), extent(2));
        (self.center - e, self.center + e)
    }
}

/// Geometry of one instance reduced to rasterizable primitives.
#[derive(Debug, Clone)]
pub struct InstanceShape {
    pub id: u32,
    pub capsules: Vec<Capsule>,
    pub ellipsoids: Vec<Ellipsoid>,
}

impl InstanceShape {
    pub fn from_model(model: &MyotubeModel, max_step: f64) -> Result<Self> {
        let mut capsules = Vec::new();
        for line in polyline_of(model, max_step)? {
            capsules.extend(line.windows(2).map(|w| Capsule {
                a: w[0].point,
                b: w[1].point,
                ra: w[0].radius,
                rb: w[1].radius,
            }));
        }
        let ellipsoids = model
            .ellipsoids
            .iter()
            .map(|e| {
                Ok(Ellipsoid {
                    center: model.ellipsoid_center(e)?,
                    semi_axes: e.semi_axes,
                    frame: model.ellipsoid_frame(e)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            id: model.instance_id,
            capsules,
            ellipsoids,
        })
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        self.capsules
            .iter()
            .map(Capsule::bounds)
            .chain(self.ellipsoids.iter().map(Ellipsoid::bounds))
            .reduce(|(lo, hi), (l, h)| (lo.component_min(l), hi.component_max(h)))
    }

    /// Normalized distance to the label support.
    pub fn label_ratio(&self, p: Vec3) -> f64 {
        self.capsules
            .iter()
            .map(|c| c.ratio(p))
            .chain(self.ellipsoids.iter().map(|e| e.ratio(p)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance to the centerline polyline.
    pub fn centerline_distance(&self, p: Vec3) -> f64 {
        self.capsules
            .iter()
            .map(|c| c.distance_and_radius(p).0)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn default_max_step(spacing: Spacing) -> f64 {
    0.5 * spacing.min()
}

/// Inclusive voxel index box `[lo, hi]` per axis in `(z, y, x)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct VoxelBox {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl VoxelBox {
    /// Conservative cover of a world-space box, or `None` if it misses
    /// the grid.
    fn cover(lo: Vec3, hi: Vec3, shape: Shape, spacing: Spacing) -> Option<Self> {
        let (wl, wh) = (lo.to_array(), hi.to_array());
        let mut b = VoxelBox { lo: [0; 3], hi: [0; 3] };
        for axis in 0..3 {
            // world arrays are (x, y, z); grid axes are (z, y, x)
            let w = 2 - axis;
            let s = spacing.0[axis];
            let l = (wl[w] / s).floor();
            let h = (wh[w] / s).ceil();
            let n = shape[axis] as f64;
            if !(l.is_finite() && h.is_finite()) || h < 0.0 || l > n - 1.0 {
                return None;
            }
            b.lo[axis] = l.max(0.0) as usize;
            b.hi[axis] = h.min(n - 1.0) as usize;
        }
        Some(b)
    }

    fn clip_z(&self, z0: usize, z1: usize) -> Option<Self> {
        let lo = self.lo[0].max(z0);
        let hi = self.hi[0].min(z1 - 1);
        (lo <= hi).then(|| VoxelBox {
            lo: [lo, self.lo[1], self.lo[2]],
            hi: [hi, self.hi[1], self.hi[2]],
        })
    }

    fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a] - self.lo[a] + 1)
    }

    fn len(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    /// Offset of a voxel inside this box.
    #[inline]
    fn local(&self, z: usize, y: usize, x: usize) -> usize {
        let d = self.dims();
        ((z - self.lo[0]) * d[1] + (y - self.lo[1])) * d[2] + (x - self.lo[2])
    }

    fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        for z in self.lo[0]..=self.hi[0] {
            for y in self.lo[1]..=self.hi[1] {
                for x in self.lo[2]..=self.hi[2] {
                    f(z, y, x);
                }
            }
        }
    }
}

/// Voxels (linear indices, ascending) whose centres lie inside the
/// ellipsoid.
pub fn rasterize_ellipsoid(ellipsoid: &Ellipsoid, shape: Shape, spacing: Spacing) -> Vec<usize> {
    let mut out = Vec::new();
    let (lo, hi) = ellipsoid.bounds();
    if let Some(bx) = VoxelBox::cover(lo, hi, shape, spacing) {
        bx.for_each(|z, y, x| {
            if ellipsoid.ratio(spacing.world(z, y, x)) <= 1.0 {
                out.push((z * shape[1] + y) * shape[2] + x);
            }
        });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub instance_id: u32,
    /// Voxels inside the instance before overlap resolution.
    pub claimed_voxels: u64,
    /// Voxels carrying the instance label after overlap resolution.
    pub voxel_count: u64,
    pub skeleton_voxels: u64,
    /// Claimed voxels that at least one other instance also claims.
    pub contested_voxels: u64,
    pub overlap_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RasterStats {
    pub instances: Vec<InstanceStats>,
    /// Voxels claimed by two or more instances.
    pub contended_voxels: u64,
    pub foreground_voxels: u64,
}

#[derive(Debug, Clone)]
pub struct Rasterization {
    pub labels: LabelVolume,
    pub skeleton: SkeletonVolume,
    pub stats: RasterStats,
}

/// Per-slab claims of one instance.
struct Claim {
    id: u32,
    region: VoxelBox,
    label_ratio: Vec<f64>,
    skeleton_ratio: Vec<f64>,
}

#[derive(Default, Clone)]
struct Tally {
    claimed: u64,
    won: u64,
    skeleton: u64,
    contested: u64,
}

#[inline]
fn wins(policy: OverlapPolicy, current: u32, best: f64, ratio: f64) -> bool {
    match policy {
        OverlapPolicy::ClosestNormalized => current == 0 || ratio < best,
        OverlapPolicy::FirstWins => current == 0,
        OverlapPolicy::LastWins => true,
    }
}

fn claim_slab(
    shape_of: &InstanceShape,
    bx: VoxelBox,
    skeleton_radius: f64,
    shape: Shape,
    spacing: Spacing,
) -> Claim {
    let mut label_ratio = vec![f64::INFINITY; bx.len()];
    let mut centre_dist = vec![f64::INFINITY; bx.len()];
    for c in &shape_of.capsules {
        let (lo, hi) = c.bounds();
        let Some(pb) = VoxelBox::cover(lo, hi, shape, spacing).and_then(|b| {
            let z = b.clip_z(bx.lo[0], bx.hi[0] + 1)?;
            Some(z)
        }) else {
            continue;
        };
        pb.for_each(|z, y, x| {
            let i = bx.local(z, y, x);
            let (d, r) = c.distance_and_radius(spacing.world(z, y, x));
            label_ratio[i] = label_ratio[i].min(d / r);
            centre_dist[i] = centre_dist[i].min(d);
        });
    }
    // capsule bounds omit the skeleton radius when it exceeds the tube radius;
    // skeleton voxels must be label members anyway, so the label box suffices
    for e in &shape_of.ellipsoids {
        let (lo, hi) = e.bounds();
        let Some(pb) = VoxelBox::cover(lo, hi, shape, spacing).and_then(|b| b.clip_z(bx.lo[0], bx.hi[0] + 1)) else {
            continue;
        };
        pb.for_each(|z, y, x| {
            let i = bx.local(z, y, x);
            label_ratio[i] = label_ratio[i].min(e.ratio(spacing.world(z, y, x)));
        });
    }
    let skeleton_ratio = centre_dist
        .iter()
        .zip(&label_ratio)
        .map(|(&d, &l)| if l <= 1.0 { d / skeleton_radius } else { f64::INFINITY })
        .collect();
    Claim {
        id: shape_of.id,
        region: bx,
        label_ratio,
        skeleton_ratio,
    }
}

/// Rasterize a scene onto the grid described by its config.
pub fn rasterize_scene(scene: &Scene, shape: Shape, spacing: Spacing) -> Result<Rasterization> {
    let cfg = &scene.config;
    if cfg.grid_shape != shape || cfg.spacing != spacing {
        return Err(Error::GridMismatch(format!(
            "scene grid {:?} @ {:?} vs requested {:?} @ {:?}",
            cfg.grid_shape, cfg.spacing.0, shape, spacing.0
        )));
    }
    let max_step = default_max_step(spacing);
    let shapes = scene
        .models
        .par_iter()
        .map(|m| InstanceShape::from_model(m, max_step))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by_key(|&i| shapes[i].id);
    let boxes: Vec<Option<VoxelBox>> = shapes
        .iter()
        .map(|s| s.bounds().and_then(|(lo, hi)| VoxelBox::cover(lo, hi, shape, spacing)))
        .collect();

    let mut labels: LabelVolume = Volume::zeros(shape, spacing);
    let mut skeleton: SkeletonVolume = Volume::zeros(shape, spacing);
    let slab_len = SLAB_DEPTH * shape[1] * shape[2];
    let policy = cfg.overlap_policy;
    let rho = cfg.skeleton_radius;

    let per_slab: Vec<(Vec<Tally>, u64)> = labels
        .data_mut()
        .par_chunks_mut(slab_len)
        .zip(skeleton.data_mut().par_chunks_mut(slab_len))
        .enumerate()
        .map(|(slab, (lab, skel))| {
            let z0 = slab * SLAB_DEPTH;
            let z1 = (z0 + SLAB_DEPTH).min(shape[0]);
            let plane = shape[1] * shape[2];
            let claims: Vec<(usize, Claim)> = order
                .iter()
                .filter_map(|&k| {
                    let bx = boxes[k]?.clip_z(z0, z1)?;
                    Some((k, claim_slab(&shapes[k], bx, rho, shape, spacing)))
                })
                .collect();

            let mut claim_count = vec![0u16; lab.len()];
            for (_, c) in &claims {
                c.region.for_each(|z, y, x| {
                    if c.label_ratio[c.region.local(z, y, x)] <= 1.0 {
                        let gi = (z - z0) * plane + y * shape[2] + x;
                        claim_count[gi] = claim_count[gi].saturating_add(1);
                    }
                });
            }

            let mut best = vec![f64::INFINITY; lab.len()];
            let mut best_skel = vec![f64::INFINITY; lab.len()];
            let mut tallies = vec![Tally::default(); shapes.len()];
            for (k, c) in &claims {
                let t = &mut tallies[*k];
                c.region.for_each(|z, y, x| {
                    let li = c.region.local(z, y, x);
                    let ratio = c.label_ratio[li];
                    if ratio > 1.0 {
                        return;
                    }
                    let gi = (z - z0) * plane + y * shape[2] + x;
                    t.claimed += 1;
                    if claim_count[gi] > 1 {
                        t.contested += 1;
                    }
                    if wins(policy, lab[gi], best[gi], ratio) {
                        lab[gi] = c.id;
                        best[gi] = ratio;
                    }
                    let sr = c.skeleton_ratio[li];
                    if sr <= 1.0 && wins(policy, skel[gi], best_skel[gi], sr) {
                        skel[gi] = c.id;
                        best_skel[gi] = sr;
                    }
                });
            }
            let index_of: std::collections::HashMap<u32, usize> =
                claims.iter().map(|(k, c)| (c.id, *k)).collect();
            for (&l, &s) in lab.iter().zip(skel.iter()) {
                if l != 0 {
                    tallies[index_of[&l]].won += 1;
                }
                if s != 0 {
                    tallies[index_of[&s]].skeleton += 1;
                }
            }
            let contended = claim_count.iter().filter(|&&c| c > 1).count() as u64;
            (tallies, contended)
        })
        .collect();

    let mut totals = vec![Tally::default(); shapes.len()];
    let mut contended_voxels = 0;
    for (tallies, contended) in per_slab {
        contended_voxels += contended;
        for (acc, t) in totals.iter_mut().zip(tallies) {
            acc.claimed += t.claimed;
            acc.won += t.won;
            acc.skeleton += t.skeleton;
            acc.contested += t.contested;
        }
    }
    let instances = order
        .iter()
        .map(|&k| {
            let t = &totals[k];
            InstanceStats {
                instance_id: shapes[k].id,
                claimed_voxels: t.claimed,
                voxel_count: t.won,
                skeleton_voxels: t.skeleton,
                contested_voxels: t.contested,
                overlap_fraction: if t.claimed > 0 {
                    t.contested as f64 / t.claimed as f64
                } else {
                    0.0
                },
            }
        })
        .collect();
    let foreground_voxels = labels.data().iter().filter(|&&l| l != 0).count() as u64;
    debug_assert_eq!(labels.len(), voxel_count(shape));
    Ok(Rasterization {
        labels,
        skeleton,
        stats: RasterStats {
            instances,
            contended_voxels,
            foreground_voxels,
        },
    })
}

/// Rasterize with the grid taken from the scene's own config.
pub fn rasterize(scene: &Scene) -> Result<Rasterization> {
    rasterize_scene(scene, scene.config.grid_shape, scene.config.spacing)
}
