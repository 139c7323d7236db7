use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use myosim::io::{config_digest, read_volume, write_manifest};
use myosim::metrics::{ipq_sparse, mean_and_sem, paired_t_test, IpqOptions, IpqReport, TTest};
use serde::Serialize;

use crate::announce;

#[derive(Args)]
pub struct EvalArgs {
    /// Predicted label volume; repeat to pool several volumes.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Ground-truth label volume paired with each --pred.
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    /// Second prediction set for a paired comparison, one per --gt.
    #[arg(long)]
    compare: Vec<PathBuf>,
    /// Sparse annotations: disable the recall component.
    #[arg(long)]
    sparse: bool,
    /// Pairs with IoU at or below this value are never matched.
    #[arg(long, default_value_t = 0.0)]
    min_iou: f64,
    /// Directory for JSON and CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "A")]
    name_a: String,
    #[arg(long, default_value = "B")]
    name_b: String,
}

#[derive(Serialize)]
struct Settings<'a> {
    pred: &'a [PathBuf],
    gt: &'a [PathBuf],
    compare: &'a [PathBuf],
    sparse: bool,
    min_iou: f64,
}

#[derive(Serialize)]
struct Pooled {
    name: String,
    mean: f64,
    sem: f64,
    n: usize,
    recall_enabled: bool,
    volumes: Vec<IpqReport>,
}

impl Pooled {
    fn scores(&self) -> Vec<f64> {
        self.volumes.iter().flat_map(IpqReport::scores).collect()
    }

    fn csv(&self) -> String {
        let mut out = String::from("volume,gt_id,pred_id,intersection,union,score\n");
        for (v, r) in self.volumes.iter().enumerate() {
            for line in r.to_csv().lines().skip(1) {
                let _ = writeln!(out, "{v},{line}");
            }
        }
        out
    }
}

fn score_set(name: &str, preds: &[PathBuf], gts: &[PathBuf], options: IpqOptions) -> Result<Pooled> {
    let mut volumes = Vec::new();
    for (p, g) in preds.iter().zip(gts) {
        let pred = read_volume(p)?.0.into_labels()?;
        let gt = read_volume(g)?.0.into_labels()?;
        volumes.push(ipq_sparse(&pred, &gt, options)?);
    }
    let scores: Vec<f64> = volumes.iter().flat_map(IpqReport::scores).collect();
    let (mean, sem) = mean_and_sem(&scores);
    Ok(Pooled {
        name: name.to_string(),
        mean,
        sem,
        n: scores.len(),
        recall_enabled: options.recall_enabled,
        volumes,
    })
}

fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        _ => "n.s.",
    }
}

fn comparison_table(a: &Pooled, b: &Pooled, t: &TTest) -> String {
    let mut s = String::from("method,mean,sem,n\n");
    for m in [a, b] {
        let _ = writeln!(s, "{},{},{},{}", m.name, m.mean, m.sem, m.n);
    }
    s.push_str("comparison,mean_diff,t,df,p,significance\n");
    let _ = writeln!(
        s,
        "{} vs {},{},{},{},{},{}",
        a.name,
        b.name,
        t.mean_diff,
        t.t,
        t.df,
        t.p,
        stars(t.p)
    );
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| myosim::Error::io(path, e))?;
    Ok(())
}

pub fn run(args: &EvalArgs) -> Result<()> {
    if args.pred.len() != args.gt.len() {
        bail!(myosim::Error::Domain(format!(
            "{} --pred volumes but {} --gt volumes",
            args.pred.len(),
            args.gt.len()
        )));
    }
    if !args.compare.is_empty() && args.compare.len() != args.gt.len() {
        bail!(myosim::Error::Domain(format!(
            "{} --compare volumes but {} --gt volumes",
            args.compare.len(),
            args.gt.len()
        )));
    }
    let settings = Settings {
        pred: &args.pred,
        gt: &args.gt,
        compare: &args.compare,
        sparse: args.sparse,
        min_iou: args.min_iou,
    };
    announce(None, &config_digest(&settings));
    let options = IpqOptions {
        recall_enabled: !args.sparse,
        min_iou: args.min_iou,
    };
    let a = score_set(&args.name_a, &args.pred, &args.gt, options)?;
    println!("{}: IPQ {:.4} ± {:.4} (n = {})", a.name, a.mean, a.sem, a.n);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| myosim::Error::io(dir, e))?;
        write_manifest(&dir.join("ipq.json"), &a)?;
        write_text(&dir.join("ipq.csv"), &a.csv())?;
    }
    if args.compare.is_empty() {
        return Ok(());
    }
    let b = score_set(&args.name_b, &args.compare, &args.gt, options)?;
    println!("{}: IPQ {:.4} ± {:.4} (n = {})", b.name, b.mean, b.sem, b.n);
    let t = paired_t_test(&a.scores(), &b.scores())?;
    let table = comparison_table(&a, &b, &t);
    print!("{table}");
    if let Some(dir) = &args.out {
        write_manifest(&dir.join("ipq_b.json"), &b)?;
        write_text(&dir.join("ipq_b.csv"), &b.csv())?;
        write_manifest(&dir.join("ttest.json"), &t)?;
        write_text(&dir.join("ttest.csv"), &table)?;
    }
    Ok(())
}
