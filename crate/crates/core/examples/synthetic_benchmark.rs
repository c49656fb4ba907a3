//! The full synthetic benchmark: a 50 x 50 location world (60,000 images),
//! 50 videos, every strategy plus the random baseline and the oracle.
//!
//! Pass a directory to also write the predictions, table and diagnostics.

use std::time::Instant;

use vidgeo::eval::{synthetic_benchmark, BenchmarkConfig};
use vidgeo::output::{write_predictions, write_text};
use vidgeo::Result;

fn main() -> Result<()> {
    let cfg = BenchmarkConfig::default();
    let t = Instant::now();
    let run = synthetic_benchmark(&cfg)?;
    println!(
        "{} images, {} videos, K = {}, lambda = {} ({:.1?})\n",
        run.world.records.len(),
        run.videos.len(),
        cfg.aggregation.k,
        cfg.aggregation.lambda,
        t.elapsed()
    );
    print!("{}", run.comparison.to_csv());

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        std::fs::create_dir_all(dir).map_err(|e| vidgeo::Error::Io { path: dir.into(), source: e })?;
        write_predictions(dir.join("predictions.jsonl"), &run.comparison.predictions)?;
        write_text(dir.join("table.csv"), &run.comparison.to_csv())?;
        write_text(dir.join("diagnostics.json"), &run.comparison.diagnostics_json()?)?;
        println!("\nwrote {}", dir.display());
    }
    Ok(())
}
