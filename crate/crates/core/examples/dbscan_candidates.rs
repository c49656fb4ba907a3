//! DBSCAN over candidate locations: a dense blob survives, scattered
//! retrieval outliers become noise.

use vidgeo::clustering::{dbscan, winning_cluster, DbscanParams, Label};
use vidgeo::geo::project_about_centroid;
use vidgeo::{GeoPoint, Result};

fn main() -> Result<()> {
    let mut points = Vec::new();
    // twelve hits around one corner, five around another, four strays
    for i in 0..12 {
        points.push(GeoPoint::new(40.4406 + (i % 4) as f64 * 1e-4, -79.9959 + (i / 4) as f64 * 1e-4)?);
    }
    for i in 0..5 {
        points.push(GeoPoint::new(40.4450 + i as f64 * 1e-4, -79.9900)?);
    }
    for (lat, lon) in [(40.4300, -80.0100), (40.4520, -79.9800), (40.4380, -79.9700), (40.4470, -80.0050)] {
        points.push(GeoPoint::new(lat, lon)?);
    }

    let planar = project_about_centroid(&points)?;
    let params = DbscanParams::default();
    let labels = dbscan(&planar, &params)?;
    println!("eps = {} m, min_pts = {}: {} clusters", params.eps, params.min_pts, labels.num_clusters);
    for (i, (p, l)) in points.iter().zip(&labels.labels).enumerate() {
        let tag = match l {
            Label::Cluster(c) => format!("cluster {c}"),
            Label::Noise => "noise".to_string(),
        };
        println!("{i:>2} ({:.4}, {:.4}) {tag}", p.lat, p.lon);
    }
    println!("winner by population: {:?}", winning_cluster(&labels, None)?);
    Ok(())
}
