//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use myosim::geometry::config::desk_geometry;
use myosim::geometry::{MyotubeModel, Scene, SceneConfig};
use myosim::rng::Stream;
use myosim::volume::{Spacing, Volume};
use myosim::voxelize::{default_max_step, polyline_of, OverlapPolicy};
use myosim::LabelVolume;

/// Distance from `p` to segment `ab` via the perpendicular-foot split, and
/// the linearly interpolated radius at the foot.
pub fn segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3], ra: f64, rb: f64) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let along = ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2];
    let dist = |q: [f64; 3]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    if len2 == 0.0 || along <= 0.0 {
        return (dist(a), ra);
    }
    if along >= len2 {
        return (dist(b), rb);
    }
    let s = along / len2;
    let foot = [a[0] + s * ab[0], a[1] + s * ab[1], a[2] + s * ab[2]];
    (dist(foot), ra + s * (rb - ra))
}

/// Ellipsoidal norm using an explicit rotation matrix built from the frame.
pub fn ellipsoid_norm(p: [f64; 3], c: [f64; 3], axes: [[f64; 3]; 3], semi: [f64; 3]) -> f64 {
    let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    let mut acc = 0.0;
    for k in 0..3 {
        let q = axes[k][0] * d[0] + axes[k][1] * d[1] + axes[k][2] * d[2];
        acc += (q / semi[k]) * (q / semi[k]);
    }
    acc.sqrt()
}

/// `(a, b, ra, rb)`.
pub type Segment = ([f64; 3], [f64; 3], f64, f64);
/// `(center, frame rows, semi-axes)`.
pub type OracleEllipsoid = ([f64; 3], [[f64; 3]; 3], [f64; 3]);

pub struct OracleInstance {
    pub id: u32,
    pub segments: Vec<Segment>,
    pub ellipsoids: Vec<OracleEllipsoid>,
}

impl OracleInstance {
    pub fn new(model: &MyotubeModel, max_step: f64) -> Self {
        let mut segments = Vec::new();
        for line in polyline_of(model, max_step).unwrap() {
            for w in line.windows(2) {
                segments.push((w[0].point.to_array(), w[1].point.to_array(), w[0].radius, w[1].radius));
            }
        }
        let ellipsoids = model
            .ellipsoids
            .iter()
            .map(|e| {
                let f = model.ellipsoid_frame(e).unwrap();
                (
                    model.ellipsoid_center(e).unwrap().to_array(),
                    [f.axes[0].to_array(), f.axes[1].to_array(), f.axes[2].to_array()],
                    e.semi_axes,
                )
            })
            .collect();
        Self {
            id: model.instance_id,
            segments,
            ellipsoids,
        }
    }

    /// `(membership ratio, centerline distance)` at `p`.
    pub fn measure(&self, p: [f64; 3]) -> (f64, f64) {
        let mut ratio = f64::INFINITY;
        let mut centre = f64::INFINITY;
        for &(a, b, ra, rb) in &self.segments {
            let (d, r) = segment_distance(p, a, b, ra, rb);
            ratio = ratio.min(d / r);
            centre = centre.min(d);
        }
        for &(c, axes, semi) in &self.ellipsoids {
            ratio = ratio.min(ellipsoid_norm(p, c, axes, semi));
        }
        (ratio, centre)
    }
}

fn pick(policy: OverlapPolicy, candidates: &[(u32, f64)]) -> u32 {
    match policy {
        OverlapPolicy::FirstWins => candidates.iter().map(|c| c.0).min().unwrap_or(0),
        OverlapPolicy::LastWins => candidates.iter().map(|c| c.0).max().unwrap_or(0),
        OverlapPolicy::ClosestNormalized => {
            let mut best: Option<(u32, f64)> = None;
            for &(id, r) in candidates {
                best = match best {
                    Some((bid, br)) if br < r || (br == r && bid < id) => Some((bid, br)),
                    _ => Some((id, r)),
                };
            }
            best.map_or(0, |b| b.0)
        }
    }
}

/// Per-voxel brute-force labels and skeleton for a whole scene.
pub fn oracle_rasterize(scene: &Scene) -> (LabelVolume, LabelVolume) {
    let cfg = &scene.config;
    let max_step = default_max_step(cfg.spacing);
    let instances: Vec<OracleInstance> = scene.models.iter().map(|m| OracleInstance::new(m, max_step)).collect();
    let [nz, ny, nx] = cfg.grid_shape;
    let s = cfg.spacing.0;
    let mut labels = Volume::zeros(cfg.grid_shape, cfg.spacing);
    let mut skeleton = Volume::zeros(cfg.grid_shape, cfg.spacing);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [x as f64 * s[2], y as f64 * s[1], z as f64 * s[0]];
                let mut label_c = Vec::new();
                let mut skel_c = Vec::new();
                for inst in &instances {
                    let (ratio, centre) = inst.measure(p);
                    if ratio <= 1.0 {
                        label_c.push((inst.id, ratio));
                        if centre <= cfg.skeleton_radius {
                            skel_c.push((inst.id, centre / cfg.skeleton_radius));
                        }
                    }
                }
                *labels.get_mut(z, y, x) = pick(cfg.overlap_policy, &label_c);
                *skeleton.get_mut(z, y, x) = pick(cfg.overlap_policy, &skel_c);
            }
        }
    }
    (labels, skeleton)
}

/// A random small scene; `k` selects the variant deterministically.
pub fn random_scene_config(k: u64) -> SceneConfig {
    let mut s = Stream::keyed(0xACCE55, "oracle-scene", k);
    let grid = [
        s.uniform_int(12, 48) as usize,
        s.uniform_int(16, 48) as usize,
        s.uniform_int(16, 48) as usize,
    ];
    let spacing = match s.uniform_int(0, 2) {
        0 => Spacing::ISOTROPIC,
        1 => Spacing([2.0, 1.0, 1.0]),
        _ => Spacing([1.5, 0.75, 0.75]),
    };
    let policy = match s.uniform_int(0, 2) {
        0 => OverlapPolicy::ClosestNormalized,
        1 => OverlapPolicy::FirstWins,
        _ => OverlapPolicy::LastWins,
    };
    let mut geometry = desk_geometry();
    geometry.half_length = myosim::geometry::Range::new(8.0, 24.0);
    geometry.radius = myosim::geometry::Range::new(2.0, 4.0);
    geometry.amp_scale = myosim::geometry::Range::new(1.0, 5.0);
    geometry.branch_length = myosim::geometry::Range::new(5.0, 12.0);
    SceneConfig {
        seed: s.next_u64(),
        n_instances: s.uniform_int(1, 4) as usize,
        grid_shape: grid,
        spacing,
        overlap_policy: policy,
        skeleton_radius: [1.0, 1.5][s.uniform_int(0, 1) as usize],
        geometry,
    }
}


/// Dense 3-D correlation with a product Gaussian, renormalized by the mass
/// that lands inside the grid.
pub fn dense_blur(vol: &Volume<f32>, sigmas: [f64; 3]) -> Vec<f64> {
    let [nz, ny, nx] = vol.shape();
    let radius: Vec<isize> = sigmas.iter().map(|s| (4.0 * s).ceil() as isize).collect();
    let w = |d: isize, s: f64| if s == 0.0 { f64::from(u8::from(d == 0)) } else { (-(d * d) as f64 / (2.0 * s * s)).exp() };
    let mut out = vec![0.0; vol.len()];
    for z in 0..nz as isize {
        for y in 0..ny as isize {
            for x in 0..nx as isize {
                let (mut acc, mut mass) = (0.0, 0.0);
                for dz in -radius[0]..=radius[0] {
                    for dy in -radius[1]..=radius[1] {
                        for dx in -radius[2]..=radius[2] {
                            let (qz, qy, qx) = (z + dz, y + dy, x + dx);
                            if qz < 0 || qy < 0 || qx < 0 || qz >= nz as isize || qy >= ny as isize || qx >= nx as isize {
                                continue;
                            }
                            let k = w(dz, sigmas[0]) * w(dy, sigmas[1]) * w(dx, sigmas[2]);
                            acc += k * f64::from(*vol.get(qz as usize, qy as usize, qx as usize));
                            mass += k;
                        }
                    }
                }
                out[vol.index(z as usize, y as usize, x as usize)] = acc / mass;
            }
        }
    }
    out
}

/// Every injective partial map, rows in order, each row trying its edges by
/// descending weight (lower column first on equal weight) and then
/// unmatched. Returns the first map reaching the maximum.
pub fn exhaustive(w: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    fn go(w: &[Vec<f64>], r: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, acc: f64, best: &mut (f64, Vec<Option<usize>>)) {
        if r == w.len() {
            if acc > best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        let mut order: Vec<usize> = (0..used.len()).collect();
        order.sort_by(|&a, &b| w[r][b].partial_cmp(&w[r][a]).unwrap().then(a.cmp(&b)));
        for c in order {
            if !used[c] && w[r][c] > 0.0 {
                used[c] = true;
                cur.push(Some(c));
                go(w, r + 1, used, cur, acc + w[r][c], best);
                cur.pop();
                used[c] = false;
            }
        }
        cur.push(None);
        go(w, r + 1, used, cur, acc, best);
        cur.pop();
    }
    let cols = w.first().map_or(0, Vec::len);
    let mut best = (-1.0, Vec::new());
    go(w, 0, &mut vec![false; cols], &mut Vec::new(), 0.0, &mut best);
    best
}

/// Two-sided tail by Simpson quadrature after `t = sqrt(df) tan(theta)`,
/// where the density becomes proportional to `cos^(df-1)`.
pub fn quadrature_p(t: f64, df: f64) -> f64 {
    let f = |th: f64| th.cos().powf(df - 1.0);
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let half = std::f64::consts::FRAC_PI_2;
    let theta0 = (t.abs() / df.sqrt()).atan();
    2.0 * simpson(theta0, half, 20_000) / simpson(-half, half, 40_000)
}

