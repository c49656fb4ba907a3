//! Exact and partitioned approximate KNN over a synthetic world, plus a
//! save/load round trip.

use std::time::Instant;

use vidgeo::index::{build_index, load_index, save_index, IndexConfig};
use vidgeo::synth::{generate_world, WorldSpec};
use vidgeo::Result;

fn main() -> Result<()> {
    let world = generate_world(&WorldSpec::grid(25, 25), 1)?;
    println!("{} reference images at {} locations", world.records.len(), world.spec.num_locations());

    let exact = build_index(&world.records, &IndexConfig::exact())?;
    let t = Instant::now();
    let approx = build_index(&world.records, &IndexConfig::approximate())?;
    let (parts, probes) = approx.partition_params().expect("approximate index");
    println!("k-means partitions: {parts}, probes: {probes} (built in {:.2?})", t.elapsed());

    let queries: Vec<_> = world.records.iter().step_by(97).map(|r| r.descriptor.clone()).collect();
    let mut hits = 0;
    for q in &queries {
        let want: Vec<u64> = exact.knn(q, 5)?.iter().map(|c| c.image_id).collect();
        hits += approx.knn(q, 5)?.iter().filter(|c| want.contains(&c.image_id)).count();
    }
    println!("recall@5 over {} queries: {:.3}", queries.len(), hits as f64 / (5 * queries.len()) as f64);

    for c in exact.knn(&queries[3], 5)? {
        println!("  rank {} image {:>5} location {:>4} distance {:.4}", c.rank, c.image_id, c.location_id, c.distance);
    }

    let path = std::env::temp_dir().join("vidgeo-example.gvix");
    save_index(&approx, &path)?;
    let loaded = load_index(&path)?;
    assert_eq!(loaded.knn(&queries[0], 5)?, approx.knn(&queries[0], 5)?);
    println!("saved and reloaded {} ({} bytes)", path.display(), std::fs::metadata(&path).map_or(0, |m| m.len()));
    let _ = std::fs::remove_file(path);
    Ok(())
}
