//! Prediction output files: JSON lines and a GeoJSON vote map.
//!
//! Coordinates are always written with exactly nine decimals so files diff
//! cleanly across platforms.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::voting::{LocationTally, Prediction};

/// A coordinate serialized with nine fixed decimals.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Fixed9(pub f64);

impl Serialize for Fixed9 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("{:.9}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyRecord {
    pub location_id: u64,
    pub lat: Fixed9,
    pub lon: Fixed9,
    pub votes: f64,
    pub count: usize,
    pub rank_sum: u64,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub strategy: String,
    pub lat: Fixed9,
    pub lon: Fixed9,
    pub winning_location_id: Option<u64>,
    pub total_vote: f64,
    pub no_dense_cluster: bool,
    pub tallies: Vec<TallyRecord>,
}

impl PredictionRecord {
    pub fn location(&self) -> Result<GeoPoint> {
        GeoPoint::new(self.lat.0, self.lon.0)
    }
}

impl From<&LocationTally> for TallyRecord {
    fn from(t: &LocationTally) -> Self {
        TallyRecord {
            location_id: t.location_id,
            lat: Fixed9(t.location.lat),
            lon: Fixed9(t.location.lon),
            votes: t.votes,
            count: t.count,
            rank_sum: t.rank_sum,
        }
    }
}

impl From<&Prediction> for PredictionRecord {
    fn from(p: &Prediction) -> Self {
        PredictionRecord {
            video_id: p.video_id.clone(),
            strategy: p.strategy.clone(),
            lat: Fixed9(p.location.lat),
            lon: Fixed9(p.location.lon),
            winning_location_id: p.winning_location_id,
            total_vote: p.total_vote,
            no_dense_cluster: p.no_dense_cluster,
            tallies: p.tallies.iter().map(TallyRecord::from).collect(),
        }
    }
}

/// Serialize any value as one JSON line.
pub fn json_line<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::invalid(e.to_string()))
}

pub fn predictions_jsonl(preds: &[Prediction]) -> Result<String> {
    let mut out = String::new();
    for p in preds {
        out.push_str(&json_line(&PredictionRecord::from(p))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_predictions(path: impl AsRef<Path>, preds: &[Prediction]) -> Result<()> {
    write_text(path, &predictions_jsonl(preds)?)
}

/// Read a JSON-lines file. Errors name the byte offset of the bad line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            let v = serde_json::from_str(&line).map_err(|e| Error::format(offset, e.to_string()))?;
            out.push(v);
        }
        offset += line.len() as u64 + 1;
    }
    Ok(out)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    read_jsonl(path)
}

#[derive(Serialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: &'static str,
    features: Vec<Feature>,
}

#[derive(Serialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: Geometry,
    properties: VoteProperties,
}

#[derive(Serialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: &'static str,
    coordinates: [Fixed9; 2],
}

#[derive(Serialize)]
struct VoteProperties {
    video_id: String,
    strategy: String,
    location_id: u64,
    votes: f64,
    count: usize,
    winner: bool,
}

/// One point feature per (video, voted location), weighted by its tally.
pub fn votes_geojson(preds: &[Prediction]) -> Result<String> {
    let features = preds
        .iter()
        .flat_map(|p| {
            p.tallies.iter().map(move |t| Feature {
                kind: "Feature",
                geometry: Geometry { kind: "Point", coordinates: [Fixed9(t.location.lon), Fixed9(t.location.lat)] },
                properties: VoteProperties {
                    video_id: p.video_id.clone(),
                    strategy: p.strategy.clone(),
                    location_id: t.location_id,
                    votes: t.votes,
                    count: t.count,
                    winner: p.winning_location_id == Some(t.location_id),
                },
            })
        })
        .collect();
    serde_json::to_string_pretty(&FeatureCollection { kind: "FeatureCollection", features })
        .map_err(|e| Error::invalid(e.to_string()))
}
