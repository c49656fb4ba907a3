use serde::{Deserialize, Serialize};

use super::{compare_methods, Comparison, EvalConfig};
use crate::error::Result;
use crate::index::{build_index, Index, IndexConfig};
use crate::synth::{benchmark_videos, generate_world, SyntheticWorld, VideoSpec, WorldSpec};
use crate::voting::{AggregationConfig, Strategy, VideoQuery};

/// Everything that determines a synthetic end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub world: WorldSpec,
    pub world_seed: u64,
    pub videos: usize,
    pub video: VideoSpec,
    pub video_seed: u64,
    pub index: IndexConfig,
    pub aggregation: AggregationConfig,
    pub strategies: Vec<Strategy>,
    pub eval: EvalConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            world: WorldSpec::default(),
            world_seed: 2019,
            videos: 50,
            video: VideoSpec::default(),
            video_seed: 7,
            index: IndexConfig::approximate(),
            aggregation: AggregationConfig::default(),
            strategies: Strategy::all().to_vec(),
            eval: EvalConfig::default(),
        }
    }
}

pub struct BenchmarkRun {
    pub world: SyntheticWorld,
    pub index: Index,
    pub videos: Vec<VideoQuery>,
    pub comparison: Comparison,
}

/// Generate the world and videos, index the world and compare every strategy.
pub fn synthetic_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkRun> {
    let world = generate_world(&cfg.world, cfg.world_seed)?;
    let index = build_index(&world.records, &cfg.index)?;
    let videos = benchmark_videos(&world, cfg.videos, &cfg.video, cfg.video_seed)?;
    let comparison = compare_methods(&videos, &index, &cfg.strategies, &cfg.aggregation, Some(&world), &cfg.eval)?;
    Ok(BenchmarkRun { world, index, videos, comparison })
}
