use serde::{Deserialize, Serialize};

use super::assignment::match_sparse;
use super::contingency::{contingency, Contingency};
use super::stats::mean_and_sem;
use crate::error::{Error, Result};
use crate::volume::LabelVolume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt_id: u32,
    pub pred_id: u32,
    pub intersection: u64,
    pub union: u64,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchTable {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_pred: Vec<u32>,
}

impl MatchTable {
    pub fn pair_for_gt(&self, gt_id: u32) -> Option<&MatchedPair> {
        self.pairs.iter().find(|p| p.gt_id == gt_id)
    }
}

/// Injective matching of GT against prediction instances by IoU. Pairs
/// with IoU at or below `min_iou` are never matched.
pub fn match_instances(table: &Contingency, min_iou: f64) -> MatchTable {
    let gt_ids = table.gt_ids();
    let pred_ids = table.pred_ids();
    let mut edges = Vec::new();
    for (&(p, g), _) in table.pairs.iter().filter(|(&(p, g), _)| p != 0 && g != 0) {
        let (inter, union) = table.overlap(p, g);
        let r = gt_ids.binary_search(&g).expect("gt id present");
        let c = pred_ids.binary_search(&p).expect("pred id present");
        edges.push((r, c, inter as f64 / union as f64));
    }
    let assignment = match_sparse(gt_ids.len(), pred_ids.len(), &edges, min_iou);

    let mut out = MatchTable::default();
    let mut pred_used = vec![false; pred_ids.len()];
    for (r, c) in assignment.iter().enumerate() {
        match c {
            Some(c) => {
                pred_used[*c] = true;
                let (intersection, union) = table.overlap(pred_ids[*c], gt_ids[r]);
                out.pairs.push(MatchedPair {
                    gt_id: gt_ids[r],
                    pred_id: pred_ids[*c],
                    intersection,
                    union,
                    iou: intersection as f64 / union as f64,
                });
            }
            None => out.unmatched_gt.push(gt_ids[r]),
        }
    }
    out.unmatched_pred = pred_ids
        .iter()
        .zip(&pred_used)
        .filter(|(_, &u)| !u)
        .map(|(&p, _)| p)
        .collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpqOptions {
    pub recall_enabled: bool,
    /// IoU floor for matching; 0 keeps every overlapping pair eligible.
    pub min_iou: f64,
}

impl Default for IpqOptions {
    fn default() -> Self {
        Self {
            recall_enabled: false,
            min_iou: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub gt_id: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpqReport {
    pub per_instance: Vec<InstanceScore>,
    /// Average of `per_instance`.
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
    pub recall_enabled: bool,
    /// With recall enabled: matched IoU sum over `n` plus the number of
    /// unmatched predictions.
    pub recall_adjusted: Option<f64>,
    pub matches: MatchTable,
}

impl IpqReport {
    pub fn scores(&self) -> Vec<f64> {
        self.per_instance.iter().map(|s| s.score).collect()
    }

    /// One row per GT instance.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gt_id,pred_id,intersection,union,score\n");
        for s in &self.per_instance {
            match self.matches.pair_for_gt(s.gt_id) {
                Some(p) => out.push_str(&format!("{},{},{},{},{}\n", s.gt_id, p.pred_id, p.intersection, p.union, s.score)),
                None => out.push_str(&format!("{},,0,,{}\n", s.gt_id, s.score)),
            }
        }
        out
    }
}

/// Score predictions against a sparsely annotated GT volume.
///
/// With recall disabled, predictions that overlap no annotated instance do
/// not affect the score.
pub fn ipq_sparse(pred: &LabelVolume, gt: &LabelVolume, options: IpqOptions) -> Result<IpqReport> {
    let table = contingency(pred, gt)?;
    ipq_from_table(&table, options)
}

pub fn ipq_from_table(table: &Contingency, options: IpqOptions) -> Result<IpqReport> {
    let gt_ids = table.gt_ids();
    if gt_ids.is_empty() {
        return Err(Error::EmptyGt);
    }
    let matches = match_instances(table, options.min_iou);
    let per_instance: Vec<InstanceScore> = gt_ids
        .iter()
        .map(|&g| InstanceScore {
            gt_id: g,
            score: matches.pair_for_gt(g).map_or(0.0, |p| p.iou),
        })
        .collect();
    let scores: Vec<f64> = per_instance.iter().map(|s| s.score).collect();
    let (mean, sem) = mean_and_sem(&scores);
    let recall_adjusted = options
        .recall_enabled
        .then(|| scores.iter().sum::<f64>() / (scores.len() + matches.unmatched_pred.len()) as f64);
    Ok(IpqReport {
        n: per_instance.len(),
        per_instance,
        mean,
        sem,
        recall_enabled: options.recall_enabled,
        recall_adjusted,
        matches,
    })
}
