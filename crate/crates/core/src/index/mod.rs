//! Geotagged descriptor database with K-nearest-neighbor retrieval.
//!
//! Descriptors are held as a flat single-precision matrix together with
//! their squared norms, so a query costs one dot product per scanned record:
//! `‖q − r‖² = ‖q‖² + ‖r‖² − 2·q·r`. Results are ordered by distance, ties by
//! ascending `image_id`.
//!
//! Approximate mode partitions the descriptors with k-means and scans only
//! the records of the `probes` partitions whose centroids are nearest to the
//! query. Probing every partition reproduces exact mode.

mod file;
mod kmeans;

pub use file::{load_index, save_index, INDEX_MAGIC};

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{store, DescriptorVector};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// One geotagged reference image.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    pub image_id: u64,
    /// Shared by every view taken at the same capture point.
    pub location_id: u64,
    pub location: GeoPoint,
    pub yaw: f32,
    pub pitch: f32,
    pub descriptor: DescriptorVector,
}

/// One retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub image_id: u64,
    pub location_id: u64,
    pub location: GeoPoint,
    /// 1-based position in the result list.
    pub rank: usize,
    pub distance: f64,
    /// Local-feature similarity in [0, 1]; `None` when no keypoints were scored.
    pub local_score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    Exact,
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub mode: IndexMode,
    /// Number of k-means partitions; defaults to ⌈√N⌉.
    pub num_partitions: Option<usize>,
    /// Partitions scanned per query; defaults to `min(8, num_partitions)`.
    pub probes: Option<usize>,
    pub kmeans_iterations: usize,
    pub seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            mode: IndexMode::Exact,
            num_partitions: None,
            probes: None,
            kmeans_iterations: 12,
            seed: 0,
        }
    }
}

impl IndexConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn approximate() -> Self {
        IndexConfig {
            mode: IndexMode::Approximate,
            ..Self::default()
        }
    }

    /// Resolve defaults against a corpus of `n` records: `(partitions, probes)`.
    pub fn resolve(&self, n: usize) -> Result<(usize, usize)> {
        let partitions = self
            .num_partitions
            .unwrap_or_else(|| ((n as f64).sqrt().ceil() as usize).max(1));
        if partitions == 0 {
            return Err(Error::Config("number of partitions must be at least 1".into()));
        }
        if partitions > n {
            return Err(Error::Config(format!("{partitions} partitions for only {n} records")));
        }
        let probes = self.probes.unwrap_or(partitions.min(8));
        if probes == 0 || probes > partitions {
            return Err(Error::Config(format!(
                "probes must be in 1..={partitions}, got {probes}"
            )));
        }
        Ok((partitions, probes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub image_id: u64,
    pub location_id: u64,
    pub location: GeoPoint,
    pub yaw: f32,
    pub pitch: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Partitions {
    pub centroids: Vec<f32>,
    /// Record positions per partition, ascending.
    pub lists: Vec<Vec<u32>>,
    pub probes: usize,
}

/// An immutable, queryable descriptor database.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    dim: usize,
    meta: Vec<RecordMeta>,
    data: Vec<f32>,
    sq_norms: Vec<f64>,
    partitions: Option<Partitions>,
}

fn sq_norm_f32(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum()
}

fn dot_f32(q: &[f64], r: &[f32]) -> f64 {
    q.iter().zip(r).map(|(&a, &b)| a * f64::from(b)).sum()
}

/// Build an index. Fails on empty input, mixed dimensions, duplicate image
/// ids, non-normalized descriptors, or a location id mapped to two points.
pub fn build_index(records: &[ReferenceRecord], cfg: &IndexConfig) -> Result<Index> {
    if records.is_empty() {
        return Err(Error::Build("no records to index".into()));
    }
    let dim = store::uniform_dim(records).map_err(|e| Error::Build(e.to_string()))?;
    let mut seen = HashSet::with_capacity(records.len());
    let mut locations: HashMap<u64, GeoPoint> = HashMap::new();
    for r in records {
        if !seen.insert(r.image_id) {
            return Err(Error::Build(format!("duplicate image_id {}", r.image_id)));
        }
        if !r.descriptor.is_normalized() {
            return Err(Error::Build(format!(
                "descriptor of image {} has norm {}, expected 1",
                r.image_id,
                r.descriptor.norm()
            )));
        }
        if let Some(prev) = locations.insert(r.location_id, r.location) {
            if prev != r.location {
                return Err(Error::Build(format!(
                    "location {} has two coordinates: {prev:?} and {:?}",
                    r.location_id, r.location
                )));
            }
        }
    }

    let data: Vec<f32> = records
        .iter()
        .flat_map(|r| r.descriptor.as_slice().iter().map(|&v| v as f32))
        .collect();
    let mut index = Index::from_parts(dim, records.iter().map(meta_of).collect(), data);

    if cfg.mode == IndexMode::Approximate {
        let (partitions, probes) = cfg.resolve(records.len())?;
        let centroids = kmeans::train(&index.data, dim, partitions, cfg.kmeans_iterations, cfg.seed);
        let lists = kmeans::assign_lists(&index.data, dim, &centroids);
        index.partitions = Some(Partitions { centroids, lists, probes });
    }
    Ok(index)
}

fn meta_of(r: &ReferenceRecord) -> RecordMeta {
    RecordMeta {
        image_id: r.image_id,
        location_id: r.location_id,
        location: r.location,
        yaw: r.yaw,
        pitch: r.pitch,
    }
}

impl Index {
    fn from_parts(dim: usize, meta: Vec<RecordMeta>, data: Vec<f32>) -> Index {
        let sq_norms = data.par_chunks(dim).map(sq_norm_f32).collect();
        Index {
            dim,
            meta,
            data,
            sq_norms,
            partitions: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn mode(&self) -> IndexMode {
        if self.partitions.is_some() {
            IndexMode::Approximate
        } else {
            IndexMode::Exact
        }
    }

    /// `(num_partitions, probes)` in approximate mode.
    pub fn partition_params(&self) -> Option<(usize, usize)> {
        self.partitions.as_ref().map(|p| (p.lists.len(), p.probes))
    }

    /// Copy of the index with a different probe count.
    pub fn with_probes(&self, probes: usize) -> Result<Index> {
        let mut out = self.clone();
        match &mut out.partitions {
            Some(p) if probes >= 1 && probes <= p.lists.len() => p.probes = probes,
            Some(p) => {
                return Err(Error::Config(format!("probes must be in 1..={}, got {probes}", p.lists.len())))
            }
            None => return Err(Error::Config("exact index has no partitions to probe".into())),
        }
        Ok(out)
    }

    pub fn meta(&self, pos: usize) -> &RecordMeta {
        &self.meta[pos]
    }

    pub fn descriptor(&self, pos: usize) -> DescriptorVector {
        DescriptorVector::from_f32(self.row(pos)).expect("stored descriptors are finite")
    }

    pub fn records(&self) -> Vec<ReferenceRecord> {
        (0..self.len())
            .map(|i| {
                let m = &self.meta[i];
                ReferenceRecord {
                    image_id: m.image_id,
                    location_id: m.location_id,
                    location: m.location,
                    yaw: m.yaw,
                    pitch: m.pitch,
                    descriptor: self.descriptor(i),
                }
            })
            .collect()
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        let mut bytes = self.data.len() * 4
            + self.sq_norms.len() * 8
            + self.meta.len() * std::mem::size_of::<RecordMeta>();
        if let Some(p) = &self.partitions {
            bytes += p.centroids.len() * 4 + p.lists.iter().map(|l| l.len() * 4).sum::<usize>();
        }
        bytes
    }

    fn row(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    fn probe_order(&self, p: &Partitions, query: &[f64]) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = p
            .centroids
            .chunks(self.dim)
            .enumerate()
            .map(|(c, centroid)| {
                let d: f64 = query
                    .iter()
                    .zip(centroid)
                    .map(|(&a, &b)| (a - f64::from(b)).powi(2))
                    .sum();
                (d, c)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(p.probes).map(|(_, c)| c).collect()
    }

    /// The `k` nearest records to `query`, at most `min(k, N)` of them.
    pub fn knn(&self, query: &DescriptorVector, k: usize) -> Result<Vec<RankedCandidate>> {
        if k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if query.dim() != self.dim {
            return Err(Error::invalid(format!(
                "query dimension {} does not match index dimension {}",
                query.dim(),
                self.dim
            )));
        }
        let q = query.as_slice();
        let q_norm: f64 = q.iter().map(|v| v * v).sum();
        let score = |pos: usize| -> (f64, u64, usize) {
            let d2 = (q_norm + self.sq_norms[pos] - 2.0 * dot_f32(q, self.row(pos))).max(0.0);
            (d2, self.meta[pos].image_id, pos)
        };

        let mut hits: Vec<(f64, u64, usize)> = match &self.partitions {
            None => (0..self.len()).map(score).collect(),
            Some(p) => self
                .probe_order(p, q)
                .into_iter()
                .flat_map(|c| p.lists[c].iter().map(|&pos| pos as usize))
                .map(score)
                .collect(),
        };

        let cmp = |a: &(f64, u64, usize), b: &(f64, u64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = k.min(hits.len());
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, cmp);
            hits.truncate(k);
        }
        hits.sort_unstable_by(cmp);

        Ok(hits
            .into_iter()
            .enumerate()
            .map(|(i, (d2, _, pos))| {
                let m = &self.meta[pos];
                RankedCandidate {
                    image_id: m.image_id,
                    location_id: m.location_id,
                    location: m.location,
                    rank: i + 1,
                    distance: d2.sqrt(),
                    local_score: None,
                }
            })
            .collect())
    }

    /// Run [`Index::knn`] for many queries in parallel; output order follows input.
    pub fn knn_batch(&self, queries: &[DescriptorVector], k: usize) -> Result<Vec<Vec<RankedCandidate>>> {
        queries.par_iter().map(|q| self.knn(q, k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::normalize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_records(n: usize, dim: usize, seed: u64) -> Vec<ReferenceRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                ReferenceRecord {
                    image_id: (n - i) as u64 * 3,
                    location_id: i as u64,
                    location: GeoPoint::new(40.0 + i as f64 * 1e-5, -80.0).unwrap(),
                    yaw: 0.0,
                    pitch: 0.0,
                    descriptor: normalize(&DescriptorVector::new(v).unwrap()).unwrap().quantized_f32(),
                }
            })
            .collect()
    }

    /// Full scan with direct squared differences.
    fn full_scan(records: &[ReferenceRecord], q: &DescriptorVector, k: usize) -> Vec<(u64, f64)> {
        let mut all: Vec<(f64, u64)> = records
            .iter()
            .map(|r| {
                let d: f64 = r.descriptor.as_slice().iter().zip(q.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d.sqrt(), r.image_id)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(d, id)| (id, d)).collect()
    }

    #[test]
    fn singleton_index() {
        let recs = random_records(1, 8, 1);
        let idx = build_index(&recs, &IndexConfig::exact()).unwrap();
        let hits = idx.knn(&recs[0].descriptor, 5).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].image_id, hits[0].rank, hits[0].distance), (recs[0].image_id, 1, 0.0));
        let approx = build_index(&recs, &IndexConfig::approximate()).unwrap();
        assert_eq!(approx.knn(&recs[0].descriptor, 5).unwrap(), hits);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(build_index(&[], &IndexConfig::exact()), Err(Error::Build(_))));
        let mut recs = random_records(4, 8, 2);
        recs[2].image_id = recs[0].image_id;
        assert!(matches!(build_index(&recs, &IndexConfig::exact()), Err(Error::Build(_))));

        let mut recs = random_records(4, 8, 2);
        recs[1].descriptor = DescriptorVector::new(vec![0.5; 4]).unwrap();
        assert!(build_index(&recs, &IndexConfig::exact()).is_err());

        let mut recs = random_records(4, 8, 2);
        recs[1].descriptor = DescriptorVector::new(vec![2.0; 8]).unwrap();
        assert!(build_index(&recs, &IndexConfig::exact()).is_err());

        let mut recs = random_records(4, 8, 2);
        recs[1].location_id = recs[0].location_id;
        assert!(build_index(&recs, &IndexConfig::exact()).is_err());
    }

    #[test]
    fn exact_matches_full_scan() {
        let recs = random_records(100, 16, 9);
        let idx = build_index(&recs, &IndexConfig::exact()).unwrap();
        let queries = random_records(20, 16, 10);
        for q in &queries {
            let got = idx.knn(&q.descriptor, 5).unwrap();
            let want = full_scan(&recs, &q.descriptor, 5);
            for (i, (h, (id, d))) in got.iter().zip(&want).enumerate() {
                assert_eq!(h.rank, i + 1);
                assert_eq!(h.image_id, *id);
                assert!((h.distance - d).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ties_break_by_image_id() {
        let mut recs = random_records(3, 4, 4);
        let shared = recs[0].descriptor.clone();
        for r in &mut recs {
            r.descriptor = shared.clone();
        }
        let idx = build_index(&recs, &IndexConfig::exact()).unwrap();
        let ids: Vec<_> = idx.knn(&shared, 3).unwrap().iter().map(|h| h.image_id).collect();
        let mut sorted: Vec<_> = recs.iter().map(|r| r.image_id).collect();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn exhaustive_probing_equals_exact() {
        let recs = random_records(400, 16, 12);
        let exact = build_index(&recs, &IndexConfig::exact()).unwrap();
        let cfg = IndexConfig {
            num_partitions: Some(20),
            probes: Some(20),
            ..IndexConfig::approximate()
        };
        let approx = build_index(&recs, &cfg).unwrap();
        for q in random_records(30, 16, 13) {
            assert_eq!(approx.knn(&q.descriptor, 7).unwrap(), exact.knn(&q.descriptor, 7).unwrap());
        }
    }

    #[test]
    fn config_validation() {
        let cfg = IndexConfig { num_partitions: Some(4), probes: Some(5), ..IndexConfig::approximate() };
        assert!(matches!(cfg.resolve(100), Err(Error::Config(_))));
        assert_eq!(IndexConfig::approximate().resolve(10_000).unwrap(), (100, 8));
        assert_eq!(IndexConfig::approximate().resolve(3).unwrap(), (2, 2));
    }

    #[test]
    fn query_errors() {
        let recs = random_records(5, 8, 3);
        let idx = build_index(&recs, &IndexConfig::exact()).unwrap();
        assert!(idx.knn(&recs[0].descriptor, 0).is_err());
        assert!(matches!(
            idx.knn(&DescriptorVector::new(vec![1.0]).unwrap(), 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn distances_non_decreasing() {
        let recs = random_records(300, 8, 21);
        let idx = build_index(&recs, &IndexConfig::approximate()).unwrap();
        for q in random_records(10, 8, 22) {
            let hits = idx.knn(&q.descriptor, 10).unwrap();
            assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
            assert!(hits.windows(2).all(|w| w[0].distance <= w[1].distance));
        }
    }
}
