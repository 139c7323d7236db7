//! `myosim`: dataset synthesis, instance separation, scoring and QC previews.

mod dataset;
mod eval;
mod inspect;
mod separate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use myosim::geometry::DatasetConfig;
use myosim::io::{parse_config, Format};

#[derive(Parser)]
#[command(name = "myosim", version, about = "Synthetic 3D myotube volumes: generate, render, separate, evaluate")]
struct Cli {
    /// Worker threads; affects run time only, never output bytes.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample scenes and write label, skeleton and manifest files.
    Generate(GenerateArgs),
    /// Render fluorescence stacks for a generated dataset.
    Render(RenderArgs),
    /// Generate then render in one pass.
    Synth(GenerateArgs),
    /// Seeded watershed on foreground and centerline probability volumes.
    Watershed(separate::WatershedArgs),
    /// Score predictions against (sparse) ground truth.
    Eval(eval::EvalArgs),
    /// Write a z-slice as a portable graymap.
    Preview(inspect::PreviewArgs),
    /// Summary statistics of a volume file.
    Stats(inspect::StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Tiff,
    Raw,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tiff => Format::Tiff,
            FormatArg::Raw => Format::Raw,
        }
    }
}

#[derive(Args, Clone)]
pub struct ConfigSource {
    /// Dataset configuration file (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset: desk or paper-train.
    #[arg(long)]
    preset: Option<String>,
    /// Warn about unknown config keys instead of failing.
    #[arg(long)]
    lenient: bool,
}

impl ConfigSource {
    fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn load(&self) -> Result<DatasetConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                let parsed = parse_config(path, !self.lenient).with_context(|| format!("loading {}", path.display()))?;
                for w in &parsed.warnings {
                    eprintln!("warning: {w}");
                }
                Ok(parsed.config)
            }
            (None, Some(name)) => Ok(DatasetConfig::preset(name)?),
            (None, None) => Err(myosim::Error::Config("one of --config or --preset is required".into()).into()),
        }
    }
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Override the dataset seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tiff")]
    format: FormatArg,
    /// Print the plan and write nothing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
pub struct RenderArgs {
    /// Dataset directory written by `generate`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory; defaults to the input directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Take the render settings from this config instead of the dataset's.
    #[command(flatten)]
    source: ConfigSource,
    #[arg(long, value_enum, default_value = "tiff")]
    format: FormatArg,
}

/// Provenance line printed by every subcommand.
pub fn announce(seed: Option<u64>, digest: &str) {
    match seed {
        Some(s) => println!("seed: {s}"),
        None => println!("seed: none"),
    }
    println!("config digest: {digest}");
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Generate(a) => dataset::generate(&a, false),
        Command::Synth(a) => dataset::generate(&a, true),
        Command::Render(a) => dataset::render(&a),
        Command::Watershed(a) => separate::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Preview(a) => inspect::preview(&a),
        Command::Stats(a) => inspect::stats(&a),
    }
}

fn category(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<myosim::Error>())
        .map_or("internal", myosim::Error::category)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e:#}", category(&e));
            ExitCode::from(2)
        }
    }
}
