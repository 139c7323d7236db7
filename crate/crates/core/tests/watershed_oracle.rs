mod common;

use std::collections::VecDeque;

use myosim::geometry::{Scene, SceneConfig};
use myosim::metrics::{ipq_sparse, IpqOptions};
use myosim::rng::Stream;
use myosim::volume::{Mask, Spacing, Volume};
use myosim::voxelize::{rasterize, OverlapPolicy};
use myosim::watershed::{
    blurred_instance_probability, connected_components, seeded_watershed, separate_instances, Connectivity,
    WatershedParams,
};
use myosim::{LabelVolume, ProbabilityVolume, Vec3};

fn neighbours(shape: [usize; 3], i: usize, full: bool) -> Vec<usize> {
    let (z, y, x) = (i / (shape[1] * shape[2]), (i / shape[2]) % shape[1], i % shape[2]);
    let mut out = Vec::new();
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let manhattan = dz.abs() + dy.abs() + dx.abs();
                if manhattan == 0 || (!full && manhattan > 1) {
                    continue;
                }
                let (qz, qy, qx) = (z as isize + dz, y as isize + dy, x as isize + dx);
                if qz < 0 || qy < 0 || qx < 0 || qz >= shape[0] as isize || qy >= shape[1] as isize || qx >= shape[2] as isize {
                    continue;
                }
                out.push((qz as usize * shape[1] + qy as usize) * shape[2] + qx as usize);
            }
        }
    }
    out
}

/// BFS flood fill; components numbered by first voxel in scan order.
fn bfs_components(mask: &Mask, full: bool, min_size: usize) -> Vec<u32> {
    let shape = mask.shape();
    let mut comp = vec![0u32; mask.len()];
    let mut next = 0;
    for start in 0..mask.len() {
        if !mask.data()[start] || comp[start] != 0 {
            continue;
        }
        next += 1;
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        comp[start] = next;
        while let Some(i) = queue.pop_front() {
            for j in neighbours(shape, i, full) {
                if mask.data()[j] && comp[j] == 0 {
                    comp[j] = next;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        if members.len() < min_size {
            for m in members {
                comp[m] = u32::MAX;
            }
            next -= 1;
        }
    }
    comp.iter().map(|&c| if c == u32::MAX { 0 } else { c }).collect()
}

fn random_mask(shape: [usize; 3], density: f64, seed: u64) -> Mask {
    let mut s = Stream::keyed(seed, "cc-mask", 0);
    Volume::from_fn(shape, Spacing::ISOTROPIC, |_, _, _| s.unit() < density)
}

#[test]
fn components_match_bfs_on_random_masks() {
    for seed in 0..50 {
        let density = [0.2, 0.3, 0.45][seed as usize % 3];
        let min_size = [1, 3, 8][seed as usize % 3];
        let mask = random_mask([24, 24, 24], density, seed);
        for (conn, full) in [(Connectivity::Six, false), (Connectivity::TwentySix, true)] {
            let fast = connected_components(&mask, conn, min_size);
            let oracle = bfs_components(&mask, full, min_size);
            assert_eq!(fast.labels.data(), &oracle[..], "seed {seed}, {conn:?}");
            let count = oracle.iter().copied().max().unwrap_or(0) as usize;
            assert_eq!(fast.sizes.len(), count);
        }
    }
}

/// Quadratic priority flood: repeatedly claim the best frontier candidate
/// `(p desc, index asc, label asc)`.
fn naive_watershed(p: &ProbabilityVolume, seeds: &LabelVolume, mask: &Mask) -> Vec<u32> {
    let shape = p.shape();
    let n = p.len();
    let mut labels = vec![0u32; n];
    let mut done = vec![false; n];
    for i in 0..n {
        if seeds.data()[i] != 0 && mask.data()[i] {
            labels[i] = seeds.data()[i];
        }
    }
    loop {
        let mut best: Option<(f32, usize, u32)> = None;
        let mut consider = |c: (f32, usize, u32)| {
            let better = match best {
                None => true,
                Some(b) => c.0 > b.0 || (c.0 == b.0 && (c.1 < b.1 || (c.1 == b.1 && c.2 < b.2))),
            };
            if better {
                best = Some(c);
            }
        };
        for i in 0..n {
            if done[i] || !mask.data()[i] {
                continue;
            }
            if labels[i] != 0 {
                consider((p.data()[i], i, labels[i]));
                continue;
            }
            for j in neighbours(shape, i, false) {
                if done[j] {
                    consider((p.data()[i], i, labels[j]));
                }
            }
        }
        match best {
            Some((_, i, l)) => {
                labels[i] = l;
                done[i] = true;
            }
            None => return labels,
        }
    }
}

#[test]
fn watershed_matches_naive_flood() {
    for seed in 0..40 {
        let shape = [6, 8, 8];
        let mut s = Stream::keyed(seed, "ws", 0);
        // coarse levels so that ties are common
        let p = Volume::from_fn(shape, Spacing::ISOTROPIC, |_, _, _| (s.uniform_int(0, 4) as f32) / 4.0);
        let mask = Volume::from_fn(shape, Spacing::ISOTROPIC, |_, _, _| s.unit() < 0.8);
        let n_seeds = s.uniform_int(1, 4);
        let mut seeds: LabelVolume = Volume::zeros(shape, Spacing::ISOTROPIC);
        for l in 1..=n_seeds as u32 {
            let i = s.uniform_int(0, (p.len() - 1) as u64) as usize;
            seeds.data_mut()[i] = l;
        }
        let fast = seeded_watershed(&p, &seeds, &mask).unwrap();
        let oracle = naive_watershed(&p, &seeds, &mask);
        assert_eq!(fast.labels.data(), &oracle[..], "seed {seed}");

        // labels stay inside the mask, seeds keep their label, and only
        // seed labels appear
        let seed_labels: std::collections::BTreeSet<u32> =
            seeds.data().iter().zip(mask.data()).filter(|(_, &m)| m).map(|(&l, _)| l).filter(|&l| l != 0).collect();
        for i in 0..p.len() {
            let l = fast.labels.data()[i];
            assert!(l == 0 || mask.data()[i]);
            assert!(l == 0 || seed_labels.contains(&l));
            if seeds.data()[i] != 0 && mask.data()[i] {
                assert_eq!(l, seeds.data()[i]);
            }
        }
        // every labeled voxel is 6-reachable from a seed of its label
        let reach = bfs_reach(&fast.labels, &seeds);
        assert!(reach, "seed {seed}: disconnected region");
    }
}

fn bfs_reach(labels: &LabelVolume, seeds: &LabelVolume) -> bool {
    let shape = labels.shape();
    let mut seen = vec![false; labels.len()];
    let mut queue: VecDeque<usize> = (0..labels.len())
        .filter(|&i| seeds.data()[i] != 0 && labels.data()[i] == seeds.data()[i])
        .collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for j in neighbours(shape, i, false) {
            if !seen[j] && labels.data()[j] == labels.data()[i] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..labels.len()).all(|i| labels.data()[i] == 0 || seen[i])
}

fn two_tube_scene(a: (Vec3, Vec3, f64), b: (Vec3, Vec3, f64)) -> Scene {
    let mut config: SceneConfig = common::random_scene_config(0);
    config.grid_shape = [32, 64, 64];
    config.spacing = Spacing::ISOTROPIC;
    config.overlap_policy = OverlapPolicy::ClosestNormalized;
    config.skeleton_radius = 1.5;
    config.n_instances = 2;
    Scene {
        config,
        models: vec![
            myosim::geometry::MyotubeModel::straight(1, a.0, a.1, 26.0, a.2),
            myosim::geometry::MyotubeModel::straight(2, b.0, b.1, 26.0, b.2),
        ],
    }
}

fn recover(scene: &Scene) -> (usize, Vec<f64>) {
    let raster = rasterize(scene).unwrap();
    let p_fg = blurred_instance_probability(&raster.labels, 1.0);
    let p_cl = blurred_instance_probability(&raster.skeleton, 1.0);
    let (out, report) = separate_instances(&p_fg, &p_cl, &WatershedParams::default()).unwrap();
    let ipq = ipq_sparse(&out.labels, &raster.labels, IpqOptions::default()).unwrap();
    (report.region_sizes.len(), ipq.scores())
}

#[test]
fn crossing_tubes_separate() {
    let scene = two_tube_scene(
        (Vec3::new(32.0, 32.0, 13.0), Vec3::X, 4.0),
        (Vec3::new(32.0, 32.0, 19.0), Vec3::Y, 4.0),
    );
    let (n, scores) = recover(&scene);
    assert_eq!(n, 2);
    assert!(scores.iter().all(|&s| s >= 0.8), "{scores:?}");
}

#[test]
fn touching_parallel_tubes_separate() {
    let scene = two_tube_scene(
        (Vec3::new(32.0, 28.0, 16.0), Vec3::X, 4.0),
        (Vec3::new(32.0, 36.0, 16.0), Vec3::X, 4.0),
    );
    let (n, scores) = recover(&scene);
    assert_eq!(n, 2);
    assert!(scores.iter().all(|&s| s >= 0.8), "{scores:?}");
}
