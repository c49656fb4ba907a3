//! Great-circle distances and the local planar projection used for clustering.

use vidgeo::geo::{haversine_distance, project_about_centroid, project_local};
use vidgeo::{GeoPoint, Result};

fn main() -> Result<()> {
    let market_square = GeoPoint::new(40.4406, -79.9959)?;
    let point_park = GeoPoint::new(40.4416, -80.0122)?;
    let d = haversine_distance(market_square, point_park)?;
    println!("Market Square -> Point State Park: {d:.1} m");

    let p = project_local(market_square, point_park)?;
    println!("projected: x = {:.1} m east, y = {:.1} m north (norm {:.1} m)", p.x, p.y, p.norm());

    let walk = [
        market_square,
        GeoPoint::new(40.4410, -79.9950)?,
        GeoPoint::new(40.4401, -79.9971)?,
    ];
    for (g, q) in walk.iter().zip(project_about_centroid(&walk)?) {
        println!("({:.4}, {:.4}) -> ({:>7.2}, {:>7.2})", g.lat, g.lon, q.x, q.y);
    }
    Ok(())
}
