//! Every voting strategy on one synthetic video, next to the random baseline
//! and the oracle.

use vidgeo::eval::{oracle, random_baseline};
use vidgeo::geo::haversine_distance;
use vidgeo::index::{build_index, IndexConfig};
use vidgeo::synth::{benchmark_videos, generate_world, VideoSpec, WorldSpec};
use vidgeo::voting::{aggregate, attach_local_scores, retrieve_candidates, AggregationConfig, Strategy};
use vidgeo::Result;

fn main() -> Result<()> {
    let world = generate_world(&WorldSpec::grid(30, 30), 3)?;
    let index = build_index(&world.records, &IndexConfig::exact())?;
    let video = benchmark_videos(&world, 1, &VideoSpec::default(), 11)?.remove(0);
    let truth = video.ground_truth.expect("synthetic truth");

    let cfg = AggregationConfig::default();
    let mut cands = retrieve_candidates(&video, &index, cfg.k)?;
    attach_local_scores(&mut cands, &video, &world, cfg.top_s, cfg.top_matches)?;
    println!("{} keyframes x K = {} -> {} candidates", video.keyframes.len(), cfg.k, cands.len());

    for s in Strategy::all() {
        let p = aggregate(&cands, &cfg.with_strategy(s))?;
        let err = haversine_distance(p.location, truth)?;
        let flag = if p.no_dense_cluster { " (no dense cluster)" } else { "" };
        println!("{:<22} location {:>4?} vote {:>6.3} error {:>7.1} m{flag}", s.to_string(), p.winning_location_id, p.total_vote, err);
    }
    for p in [random_baseline(&cands, 42)?, oracle(&cands, Some(truth))?] {
        println!("{:<22} location {:>4?}              error {:>7.1} m", p.strategy, p.winning_location_id, haversine_distance(p.location, truth)?);
    }
    Ok(())
}
