//! Geodetic primitives on a spherical earth.
//!
//! Distances are great-circle distances on a sphere of radius
//! [`EARTH_RADIUS_M`]. Altitude is not modeled. Clustering works in a local
//! equirectangular projection about the centroid of the points involved,
//! which is accurate to well under a percent at city scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validated constructor: finite, `lat` in [-90, 90], `lon` in [-180, 180].
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite coordinate ({}, {})",
                self.lat, self.lon
            )));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::invalid(format!("latitude {} out of range", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::invalid(format!("longitude {} out of range", self.lon)));
        }
        Ok(())
    }
}

/// Meters east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(format!("non-finite planar point ({x}, {y})")));
        }
        Ok(PlanarPoint { x, y })
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Great-circle distance in meters using the haversine formula.
///
/// The arguments are put in a canonical order before evaluation so the result
/// is bitwise symmetric.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) { (a, b) } else { (b, a) };
    let lat1 = p.lat.to_radians();
    let lat2 = q.lat.to_radians();
    let half_dlat = (lat2 - lat1) * 0.5;
    let half_dlon = (q.lon - p.lon).to_radians() * 0.5;
    let h = half_dlat.sin().powi(2) + lat1.cos() * lat2.cos() * half_dlon.sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    Ok(2.0 * EARTH_RADIUS_M * h.sqrt().asin())
}

/// Equirectangular projection of `p` about `origin`.
///
/// `x = R·Δlon·cos(lat_origin)`, `y = R·Δlat`, angles in radians. Longitude
/// differences are wrapped into [-180°, 180°].
pub fn project_local(origin: GeoPoint, p: GeoPoint) -> Result<PlanarPoint> {
    origin.validate()?;
    p.validate()?;
    let mut dlon = p.lon - origin.lon;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let x = EARTH_RADIUS_M * dlon.to_radians() * origin.lat.to_radians().cos();
    let y = EARTH_RADIUS_M * (p.lat - origin.lat).to_radians();
    PlanarPoint::new(x, y)
}

/// Inverse of [`project_local`].
pub fn unproject_local(origin: GeoPoint, p: PlanarPoint) -> Result<GeoPoint> {
    let lat = origin.lat + (p.y / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (p.x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    GeoPoint::new(lat, lon)
}

/// Arithmetic mean of latitudes and longitudes. Only meaningful for points
/// spanning a small area away from the antimeridian.
pub fn centroid(points: &[GeoPoint]) -> Result<GeoPoint> {
    if points.is_empty() {
        return Err(Error::EmptyInput("centroid of no points".into()));
    }
    let n = points.len() as f64;
    let (slat, slon) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.lat, b + p.lon));
    GeoPoint::new(slat / n, slon / n)
}

/// Project every point about the centroid of the set.
pub fn project_about_centroid(points: &[GeoPoint]) -> Result<Vec<PlanarPoint>> {
    let origin = centroid(points)?;
    points.iter().map(|&p| project_local(origin, p)).collect()
}
