//! Instance separation from foreground and centerline probabilities.
//!
//! The foreground channel is thresholded into a mask, the centerline
//! channel into seeds (26-connected components), and a priority flood
//! grows the seeds through the mask, most confident voxels first.

mod union_find;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

pub use union_find::UnionFind;

use crate::error::{Error, Result};
use crate::render::gaussian_blur_separable;
use crate::volume::{LabelVolume, Mask, ProbabilityVolume, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Six,
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::Domain(format!("connectivity must be 6 or 26, got {n}"))),
        }
    }

    /// Neighbour offsets `(dz, dy, dx)` that precede a voxel in scan order.
    fn backward(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let manhattan = dz.abs() + dy.abs() + dx.abs();
                    let earlier = (dz, dy, dx) < (0, 0, 0);
                    let allowed = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if earlier && allowed {
                        out.push([dz, dy, dx]);
                    }
                }
            }
        }
        out
    }
}

#[inline]
fn offset(shape: [usize; 3], z: usize, y: usize, x: usize, d: [isize; 3]) -> Option<usize> {
    let nz = z as isize + d[0];
    let ny = y as isize + d[1];
    let nx = x as isize + d[2];
    if nz < 0 || ny < 0 || nx < 0 || nz >= shape[0] as isize || ny >= shape[1] as isize || nx >= shape[2] as isize {
        return None;
    }
    Some((nz as usize * shape[1] + ny as usize) * shape[2] + nx as usize)
}

/// `v >= tau`.
pub fn threshold(vol: &ProbabilityVolume, tau: f64) -> Result<Mask> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("threshold {tau} outside [0, 1]")));
    }
    vol.check_probability()?;
    Ok(vol.map(|&v| f64::from(v) >= tau))
}

#[derive(Debug, Clone)]
pub struct Components {
    pub labels: LabelVolume,
    /// Voxel count of component `i + 1`.
    pub sizes: Vec<u64>,
    /// Components dropped for being smaller than the minimum size.
    pub discarded: usize,
}

/// Label connected foreground components. Components with fewer than
/// `min_size` voxels are dropped; the rest are numbered `1..=m` in the
/// scan order of their first voxel.
pub fn connected_components(mask: &Mask, connectivity: Connectivity, min_size: usize) -> Components {
    let shape = mask.shape();
    let n = mask.len();
    let mut uf = UnionFind::new(n);
    let neighbours = connectivity.backward();
    let data = mask.data();
    for i in 0..n {
        if !data[i] {
            continue;
        }
        let (z, y, x) = mask.coords(i);
        for &d in &neighbours {
            if let Some(j) = offset(shape, z, y, x, d) {
                if data[j] {
                    uf.union(i as u32, j as u32);
                }
            }
        }
    }

    let mut labels: LabelVolume = Volume::zeros(shape, mask.spacing());
    let mut id_of_root: BTreeMap<u32, u32> = BTreeMap::new();
    let mut sizes = Vec::new();
    let mut discarded = 0;
    for i in 0..n {
        if !data[i] {
            continue;
        }
        let root = uf.find(i as u32);
        let id = *id_of_root.entry(root).or_insert_with(|| {
            let size = uf.size_of(root) as usize;
            if size >= min_size {
                sizes.push(size as u64);
                sizes.len() as u32
            } else {
                discarded += 1;
                0
            }
        });
        labels.data_mut()[i] = id;
    }
    Components {
        labels,
        sizes,
        discarded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    priority: f32,
    index: usize,
    label: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    // max-heap: highest priority, then lowest index, then lowest label
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.index.cmp(&self.index))
            .then_with(|| other.label.cmp(&self.label))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct WatershedOutput {
    pub labels: LabelVolume,
    /// Mask voxels not 6-connected to any seed.
    pub unreachable: u64,
    /// Seed voxels lying outside the mask.
    pub dropped_seeds: u64,
}

/// Priority flood from `seeds` through `mask` over 6-connectivity.
///
/// Voxels are claimed in order of decreasing foreground probability, ties
/// broken by ascending linear index and then label, which makes the result
/// a pure function of the inputs.
pub fn seeded_watershed(p_fg: &ProbabilityVolume, seeds: &LabelVolume, mask: &Mask) -> Result<WatershedOutput> {
    p_fg.ensure_same_shape(seeds)?;
    p_fg.ensure_same_shape(mask)?;
    let shape = p_fg.shape();
    let prob = p_fg.data();
    let inside = mask.data();
    let mut labels: LabelVolume = Volume::zeros(shape, p_fg.spacing());
    let mut expanded = vec![false; labels.len()];
    let mut heap = BinaryHeap::new();
    let mut dropped_seeds = 0;

    for (i, &s) in seeds.data().iter().enumerate() {
        if s == 0 {
            continue;
        }
        if !inside[i] {
            dropped_seeds += 1;
            continue;
        }
        labels.data_mut()[i] = s;
        heap.push(Entry {
            priority: prob[i],
            index: i,
            label: s,
        });
    }
    if dropped_seeds > 0 {
        log::warn!("{dropped_seeds} seed voxels outside the foreground mask were dropped");
    }

    let steps: [[isize; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];
    while let Some(Entry { index, label, .. }) = heap.pop() {
        if expanded[index] {
            continue;
        }
        let current = labels.data()[index];
        if current != 0 && current != label {
            continue;
        }
        labels.data_mut()[index] = label;
        expanded[index] = true;
        let (z, y, x) = labels.coords(index);
        for d in steps {
            if let Some(j) = offset(shape, z, y, x, d) {
                if inside[j] && labels.data()[j] == 0 && !expanded[j] {
                    heap.push(Entry {
                        priority: prob[j],
                        index: j,
                        label,
                    });
                }
            }
        }
    }

    let unreachable = inside
        .iter()
        .zip(labels.data())
        .filter(|(&m, &l)| m && l == 0)
        .count() as u64;
    Ok(WatershedOutput {
        labels,
        unreachable,
        dropped_seeds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatershedParams {
    pub tau_fg: f64,
    pub tau_cl: f64,
    pub min_seed_size: usize,
}

impl Default for WatershedParams {
    fn default() -> Self {
        Self {
            tau_fg: 0.5,
            tau_cl: 0.5,
            min_seed_size: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub seeds: usize,
    pub discarded_seed_components: usize,
    pub mask_voxels: u64,
    pub unreachable_voxels: u64,
    pub dropped_seed_voxels: u64,
    /// Voxel count per output label.
    pub region_sizes: BTreeMap<u32, u64>,
}

/// Threshold both channels, seed from the centerline components and flood
/// the foreground mask.
pub fn separate_instances(
    p_fg: &ProbabilityVolume,
    p_cl: &ProbabilityVolume,
    params: &WatershedParams,
) -> Result<(WatershedOutput, RegionReport)> {
    p_fg.ensure_same_shape(p_cl)?;
    let mask = threshold(p_fg, params.tau_fg)?;
    let centre = threshold(p_cl, params.tau_cl)?;
    let seeds = connected_components(&centre, Connectivity::TwentySix, params.min_seed_size);
    let out = seeded_watershed(p_fg, &seeds.labels, &mask)?;
    let mut region_sizes = BTreeMap::new();
    for &l in out.labels.data() {
        if l != 0 {
            *region_sizes.entry(l).or_insert(0u64) += 1;
        }
    }
    let report = RegionReport {
        seeds: seeds.sizes.len(),
        discarded_seed_components: seeds.discarded,
        mask_voxels: mask.data().iter().filter(|&&m| m).count() as u64,
        unreachable_voxels: out.unreachable,
        dropped_seed_voxels: out.dropped_seeds,
        region_sizes,
    };
    Ok((out, report))
}

/// Stand-in for network outputs: the per-instance maximum of each
/// instance's blurred indicator.
pub fn blurred_instance_probability(labels: &LabelVolume, sigma: f64) -> ProbabilityVolume {
    let shape = labels.shape();
    let radius = (4.0 * sigma).ceil() as usize;
    let pad = 2 * radius;
    let mut boxes: BTreeMap<u32, ([usize; 3], [usize; 3])> = BTreeMap::new();
    for (i, &l) in labels.data().iter().enumerate() {
        if l == 0 {
            continue;
        }
        let (z, y, x) = labels.coords(i);
        let c = [z, y, x];
        let e = boxes.entry(l).or_insert((c, c));
        for a in 0..3 {
            e.0[a] = e.0[a].min(c[a]);
            e.1[a] = e.1[a].max(c[a]);
        }
    }
    let mut out: ProbabilityVolume = Volume::zeros(shape, labels.spacing());
    for (&id, &(lo, hi)) in &boxes {
        let lo = [0, 1, 2].map(|a| lo[a].saturating_sub(pad));
        let hi = [0, 1, 2].map(|a| (hi[a] + pad).min(shape[a] - 1));
        let dims = [0, 1, 2].map(|a| hi[a] - lo[a] + 1);
        let crop = Volume::from_fn(dims, labels.spacing(), |z, y, x| {
            f32::from(*labels.get(lo[0] + z, lo[1] + y, lo[2] + x) == id)
        });
        let blurred = gaussian_blur_separable(&crop, [sigma; 3]);
        for (i, &v) in blurred.data().iter().enumerate() {
            let (z, y, x) = blurred.coords(i);
            let o = out.get_mut(lo[0] + z, lo[1] + y, lo[2] + x);
            *o = o.max(v.clamp(0.0, 1.0));
        }
    }
    out
}
