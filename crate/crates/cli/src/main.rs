use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pgmwater::pipeline::{run, PipelineConfig, Step};
use pgmwater::ErrorKind;

#[derive(Parser)]
#[command(name = "pgmwater", version, about = "Surface-water mapping by decision-level fusion of PAN, MS and Landsat rasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration file (`key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for K-Means and validation sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic scene bundle.
    Synth(Common),
    /// Fit the MS classifier from training samples.
    Train(Common),
    /// Per-pixel class probabilities of the MS image.
    ClassifyMs(Common),
    /// Multi-date Landsat water probability.
    WaterIndex(Common),
    /// PCA pan-sharpening baseline and its classification.
    PcaFuse(Common),
    /// Morphological profiles, K-Means segmentation and segment statistics.
    Segment(Common),
    /// Object classification and shadow projection.
    Shadow(Common),
    /// Segment-level probabilistic fusion.
    Fuse(Common),
    /// Shadow relabelling and boundary unmixing.
    Postclass(Common),
    /// Accuracy assessment of every map against the reference.
    Evaluate(Common),
    /// Every step in order.
    RunAll(Common),
}

impl Command {
    fn split(self) -> (Step, Common) {
        match self {
            Command::Synth(c) => (Step::Synth, c),
            Command::Train(c) => (Step::Train, c),
            Command::ClassifyMs(c) => (Step::ClassifyMs, c),
            Command::WaterIndex(c) => (Step::WaterIndex, c),
            Command::PcaFuse(c) => (Step::PcaFuse, c),
            Command::Segment(c) => (Step::Segment, c),
            Command::Shadow(c) => (Step::Shadow, c),
            Command::Fuse(c) => (Step::Fuse, c),
            Command::Postclass(c) => (Step::PostClass, c),
            Command::Evaluate(c) => (Step::Evaluate, c),
            Command::RunAll(c) => (Step::RunAll, c),
        }
    }
}

fn config(common: &Common) -> pgmwater::Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::read(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg = cfg.with_out(out);
    }
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<pgmwater::Error>().map(pgmwater::Error::kind) {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Io) => 3,
        Some(ErrorKind::Computation) | None => 4,
    }
}

fn main() -> ExitCode {
    let (step, common) = Cli::parse().command.split();
    let result = config(&common)
        .map_err(anyhow::Error::from)
        .and_then(|cfg| run(step, &cfg).with_context(|| format!("{} failed", step.name())));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
