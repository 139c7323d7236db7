use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::volume::LabelVolume;

const CHUNK: usize = 1 << 16;

/// Joint histogram of `(pred_id, gt_id)` over all voxels, background
/// included, plus per-label totals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Contingency {
    pub pairs: BTreeMap<(u32, u32), u64>,
    pub pred_sizes: BTreeMap<u32, u64>,
    pub gt_sizes: BTreeMap<u32, u64>,
}

impl Contingency {
    pub fn count(&self, pred: u32, gt: u32) -> u64 {
        self.pairs.get(&(pred, gt)).copied().unwrap_or(0)
    }

    /// Foreground instance ids, ascending.
    pub fn gt_ids(&self) -> Vec<u32> {
        self.gt_sizes.keys().copied().filter(|&g| g != 0).collect()
    }

    pub fn pred_ids(&self) -> Vec<u32> {
        self.pred_sizes.keys().copied().filter(|&p| p != 0).collect()
    }

    /// `(intersection, union)` of a foreground pair.
    pub fn overlap(&self, pred: u32, gt: u32) -> (u64, u64) {
        let inter = self.count(pred, gt);
        let p = self.pred_sizes.get(&pred).copied().unwrap_or(0);
        let g = self.gt_sizes.get(&gt).copied().unwrap_or(0);
        (inter, p + g - inter)
    }
}

fn merge(into: &mut BTreeMap<(u32, u32), u64>, from: BTreeMap<(u32, u32), u64>) {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
}

pub fn contingency(pred: &LabelVolume, gt: &LabelVolume) -> Result<Contingency> {
    pred.ensure_same_shape(gt)?;
    let partials: Vec<BTreeMap<(u32, u32), u64>> = pred
        .data()
        .par_chunks(CHUNK)
        .zip(gt.data().par_chunks(CHUNK))
        .map(|(p, g)| {
            let mut local = BTreeMap::new();
            let mut run: Option<((u32, u32), u64)> = None;
            for (&a, &b) in p.iter().zip(g) {
                match &mut run {
                    Some((key, n)) if *key == (a, b) => *n += 1,
                    _ => {
                        if let Some((key, n)) = run.take() {
                            *local.entry(key).or_insert(0) += n;
                        }
                        run = Some(((a, b), 1));
                    }
                }
            }
            if let Some((key, n)) = run {
                *local.entry(key).or_insert(0) += n;
            }
            local
        })
        .collect();

    let mut table = Contingency::default();
    for part in partials {
        merge(&mut table.pairs, part);
    }
    for (&(p, g), &n) in &table.pairs {
        *table.pred_sizes.entry(p).or_insert(0) += n;
        *table.gt_sizes.entry(g).or_insert(0) += n;
    }
    Ok(table)
}
