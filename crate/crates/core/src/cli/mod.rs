//! The `vidgeo` command line.
//!
//! Every subcommand writes its outputs plus a `<output>.manifest.json`
//! sidecar holding the full configuration, SHA-256 digests of the inputs and
//! the seed. Exit codes: 0 on success, 2 for usage, configuration, format or
//! missing-input errors, 1 for anything else.

mod commands;
mod manifest;

pub use manifest::{sha256_hex, InputDigest, RunManifest};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "vidgeo", version, about = "Locate videos by retrieving geotagged reference images")]
pub struct Cli {
    /// Worker threads (default: one per processor). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptor index operations.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Select keyframes from decoded frames.
    Keyframes(KeyframesArgs),
    /// Predict one location per video.
    Locate(LocateArgs),
    /// Precision-within-distance table from predictions and truths.
    Evaluate(EvaluateArgs),
    /// Occlusion heatmap of a query image against a reference descriptor.
    Heatmap(HeatmapArgs),
    /// Synthetic worlds, videos and invariance sweeps.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Build an index from a descriptor store or CSV file.
    Build(IndexBuildArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Approx,
}

#[derive(Debug, Args, Serialize)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Partitions for approximate mode (default ⌈√N⌉).
    #[arg(long)]
    pub partitions: Option<usize>,
    /// Partitions scanned per query (default min(8, partitions)).
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long, default_value_t = 12)]
    pub kmeans_iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct KeyframesArgs {
    /// A directory of PPM frames (file-name order) or a raw RGB stream.
    #[arg(long)]
    pub frames: PathBuf,
    /// JSON sidecar of a raw stream with `width`, `height` and `count` (default `<frames>.json`).
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    /// Compare frequency-normalized histograms (`false` compares raw counts).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub normalized: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LocateArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// JSON lines, one video per line.
    #[arg(long)]
    pub video_descriptors: PathBuf,
    #[arg(long, default_value = "density+blended")]
    pub strategy: String,
    #[arg(long = "K", visible_alias = "k", default_value_t = crate::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0.4)]
    pub lambda: f64,
    /// Candidates per keyframe given a local-feature score (default K).
    #[arg(long = "S", visible_alias = "s")]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 75.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 3)]
    pub min_pts: usize,
    /// Keypoint matches averaged into the local-feature score.
    #[arg(long, default_value_t = 50)]
    pub top_matches: usize,
    /// World manifest whose synthetic keypoints back the local-feature score.
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Also emit `random` and `oracle` predictions for every video.
    #[arg(long)]
    pub baselines: bool,
    /// Seed of the random baseline.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub geojson: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// CSV `video_id,lat,lon`, or a video JSON-lines file with ground truths.
    #[arg(long)]
    pub truths: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "5,10,30,50,100,150")]
    pub grid: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-video diagnostics as JSON.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum DescriptorArg {
    #[value(name = "synthetic-histogram")]
    #[serde(rename = "synthetic-histogram")]
    SyntheticHistogram,
}

impl DescriptorArg {
    pub fn name(self) -> &'static str {
        match self {
            DescriptorArg::SyntheticHistogram => "synthetic-histogram",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub query_image: PathBuf,
    /// JSON array of descriptor values.
    #[arg(long, conflicts_with = "reference_image")]
    pub reference_descriptor: Option<PathBuf>,
    /// Describe this image to obtain the reference (default: the query itself).
    #[arg(long)]
    pub reference_image: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "synthetic-histogram")]
    pub descriptor: DescriptorArg,
    #[arg(long)]
    pub patch: usize,
    /// Defaults to the patch size.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Generate a reference world as a descriptor store plus world manifest.
    World(SynthWorldArgs),
    /// Generate benchmark videos for a world.
    Videos(SynthVideosArgs),
    /// Descriptor distance under rotation or scaling of an image.
    Sweep(SynthSweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthWorldArgs {
    #[arg(long, default_value_t = 50)]
    pub rows: usize,
    #[arg(long, default_value_t = 50)]
    pub cols: usize,
    #[arg(long, default_value_t = 15.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Reference image noise.
    #[arg(long, default_value_t = 0.15)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Store file; a `.csv` extension writes CSV instead of the binary format.
    #[arg(long)]
    pub out: PathBuf,
    /// World manifest path (default `<out>.world.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthVideosArgs {
    /// World manifest written by `synth world`.
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long, default_value_t = 10)]
    pub keyframes: usize,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Weight of look-alike content from other places.
    #[arg(long)]
    pub confusion: Option<f64>,
    #[arg(long)]
    pub distractors: Option<f64>,
    #[arg(long)]
    pub path_length: Option<f64>,
    /// Omit synthetic keypoints.
    #[arg(long)]
    pub no_keypoints: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write ground truths as CSV.
    #[arg(long)]
    pub truths: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformArg {
    Rotation,
    Scale,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthSweepArgs {
    #[arg(long, value_enum)]
    pub transform: TransformArg,
    /// PPM image to sweep (default: a built-in asymmetric test card).
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("vidgeo: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Index(IndexCommand::Build(a)) => commands::index_build(a),
        Command::Keyframes(a) => commands::keyframes(a),
        Command::Locate(a) => commands::locate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Heatmap(a) => commands::heatmap(a),
        Command::Synth(SynthCommand::World(a)) => commands::synth_world(a),
        Command::Synth(SynthCommand::Videos(a)) => commands::synth_videos(a),
        Command::Synth(SynthCommand::Sweep(a)) => commands::synth_sweep(a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["vidgeo", "index", "build"]), 2);
        assert_eq!(run(["vidgeo", "frobnicate"]), 2);
        assert_eq!(run(["vidgeo", "--help"]), 0);
    }
}
