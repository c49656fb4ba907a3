//! Aggregation of per-keyframe retrieval results into one video location.
//!
//! Every retrieved reference image casts a vote for its capture location
//! (`location_id`). Strategies differ only in vote weight and in which
//! candidates may vote:
//!
//! | Strategy | Weight of a candidate at rank `r` |
//! |----------|-----------------------------------|
//! | simple | `1` |
//! | weighted rank | `1 / r` |
//! | blended | `λ / r + (1 − λ)·s` for `r ≤ S`, `λ / r` otherwise, `s` the local-feature score |
//! | density(inner) | inner weight, restricted to the heaviest DBSCAN cluster |
//!
//! The location with the largest tally wins; ties go to the smaller rank
//! sum and then to the smaller `location_id`.

mod local;

pub use local::{attach_local_scores, local_match_score, KeypointSet, KeypointSource, LocalScore};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{dbscan, winning_cluster, DbscanParams, Label};
use crate::descriptor::DescriptorVector;
use crate::error::{Error, Result};
use crate::geo::{project_about_centroid, GeoPoint};
use crate::index::{Index, RankedCandidate};
use crate::DEFAULT_K;

/// Relative tolerance under which two tallies count as tied.
pub const TALLY_TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn strictly_greater(a: f64, b: f64) -> bool {
    a - b > TALLY_TIE_TOLERANCE * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub descriptor: DescriptorVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<KeypointSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoQuery {
    pub video_id: String,
    pub keyframes: Vec<Keyframe>,
    #[serde(default)]
    pub ground_truth: Option<GeoPoint>,
}

impl VideoQuery {
    pub fn validate(&self) -> Result<()> {
        if self.keyframes.is_empty() {
            return Err(Error::EmptyInput(format!("video {} has no keyframes", self.video_id)));
        }
        if let Some(i) = self.keyframes.iter().position(|k| !k.descriptor.is_normalized()) {
            return Err(Error::invalid(format!(
                "video {} keyframe {i} descriptor is not normalized",
                self.video_id
            )));
        }
        Ok(())
    }
}

/// Retrieval results of one video, one ranked list per keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub video_id: String,
    pub per_keyframe: Vec<Vec<RankedCandidate>>,
}

impl CandidateSet {
    pub fn iter(&self) -> impl Iterator<Item = &RankedCandidate> {
        self.per_keyframe.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.per_keyframe.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Strategies that assign a per-candidate weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Simple,
    WeightedRank,
    Blended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Strategy {
    Plain(WeightScheme),
    Density(WeightScheme),
}

impl Strategy {
    pub const SIMPLE: Strategy = Strategy::Plain(WeightScheme::Simple);
    pub const WEIGHTED_RANK: Strategy = Strategy::Plain(WeightScheme::WeightedRank);
    pub const BLENDED: Strategy = Strategy::Plain(WeightScheme::Blended);

    /// Every strategy, in order of increasing sophistication.
    pub fn all() -> [Strategy; 6] {
        use WeightScheme::*;
        [
            Strategy::Plain(Simple),
            Strategy::Plain(WeightedRank),
            Strategy::Plain(Blended),
            Strategy::Density(Simple),
            Strategy::Density(WeightedRank),
            Strategy::Density(Blended),
        ]
    }

    pub fn scheme(&self) -> WeightScheme {
        match self {
            Strategy::Plain(s) | Strategy::Density(s) => *s,
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Simple => "simple",
            WeightScheme::WeightedRank => "weighted_rank",
            WeightScheme::Blended => "blended",
        })
    }
}

impl FromStr for WeightScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(WeightScheme::Simple),
            "weighted_rank" | "weighted-rank" => Ok(WeightScheme::WeightedRank),
            "blended" => Ok(WeightScheme::Blended),
            other => Err(Error::Config(format!("unknown voting scheme {other:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Plain(s) => write!(f, "{s}"),
            Strategy::Density(s) => write!(f, "density+{s}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "density" {
            return Ok(Strategy::Density(WeightScheme::Simple));
        }
        match s.strip_prefix("density+") {
            Some(inner) => Ok(Strategy::Density(inner.parse()?)),
            None => Ok(Strategy::Plain(s.parse()?)),
        }
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub k: usize,
    pub strategy: Strategy,
    /// Weight of the rank term in blended voting, in [0, 1].
    pub lambda: f64,
    /// Candidates ranked `1..=top_s` per keyframe receive a local-feature score.
    pub top_s: usize,
    pub dbscan: DbscanParams,
    /// Keypoint matches averaged into the local-feature score.
    pub top_matches: usize,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            k: DEFAULT_K,
            strategy: Strategy::Density(WeightScheme::Blended),
            lambda: 0.4,
            top_s: DEFAULT_K,
            dbscan: DbscanParams::default(),
            top_matches: 50,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must be in [0, 1], got {}", self.lambda)));
        }
        if self.top_s > self.k {
            return Err(Error::Config(format!("S = {} exceeds K = {}", self.top_s, self.k)));
        }
        if self.top_matches == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        self.dbscan.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationTally {
    pub location_id: u64,
    pub location: GeoPoint,
    pub votes: f64,
    pub count: usize,
    pub rank_sum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    pub strategy: String,
    pub location: GeoPoint,
    pub winning_location_id: Option<u64>,
    pub total_vote: f64,
    /// Per-location tallies of the candidates that voted, by ascending `location_id`.
    pub tallies: Vec<LocationTally>,
    /// Density voting found no cluster and fell back to all candidates.
    pub no_dense_cluster: bool,
}

/// Retrieve the top `k` references for every keyframe.
pub fn retrieve_candidates(video: &VideoQuery, index: &Index, k: usize) -> Result<CandidateSet> {
    video.validate()?;
    let descriptors: Vec<DescriptorVector> = video.keyframes.iter().map(|kf| kf.descriptor.clone()).collect();
    Ok(CandidateSet {
        video_id: video.video_id.clone(),
        per_keyframe: index.knn_batch(&descriptors, k)?,
    })
}

/// Weight of one candidate under `scheme`. A missing local score counts as 0.
pub fn candidate_weight(c: &RankedCandidate, scheme: WeightScheme, lambda: f64, top_s: usize) -> f64 {
    let inv_rank = 1.0 / c.rank as f64;
    match scheme {
        WeightScheme::Simple => 1.0,
        WeightScheme::WeightedRank => inv_rank,
        WeightScheme::Blended if c.rank <= top_s => lambda * inv_rank + (1.0 - lambda) * c.local_score.unwrap_or(0.0),
        WeightScheme::Blended => lambda * inv_rank,
    }
}

/// Tally explicit weights onto locations and pick the winner.
pub fn weighted_vote(video_id: &str, strategy: &str, cands: &[&RankedCandidate], weights: &[f64]) -> Result<Prediction> {
    if cands.is_empty() {
        return Err(Error::EmptyInput(format!("video {video_id} has no candidates to vote")));
    }
    if cands.len() != weights.len() {
        return Err(Error::invalid(format!("{} weights for {} candidates", weights.len(), cands.len())));
    }
    let mut tallies: BTreeMap<u64, LocationTally> = BTreeMap::new();
    for (c, &w) in cands.iter().zip(weights) {
        let t = tallies.entry(c.location_id).or_insert(LocationTally {
            location_id: c.location_id,
            location: c.location,
            votes: 0.0,
            count: 0,
            rank_sum: 0,
        });
        t.votes += w;
        t.count += 1;
        t.rank_sum += c.rank as u64;
    }
    let tallies: Vec<LocationTally> = tallies.into_values().collect();
    let mut best = &tallies[0];
    for t in &tallies[1..] {
        // ascending location_id, so a full tie keeps the earlier one
        if strictly_greater(t.votes, best.votes)
            || (!strictly_greater(best.votes, t.votes) && t.rank_sum < best.rank_sum)
        {
            best = t;
        }
    }
    Ok(Prediction {
        video_id: video_id.to_string(),
        strategy: strategy.to_string(),
        location: best.location,
        winning_location_id: Some(best.location_id),
        total_vote: best.votes,
        no_dense_cluster: false,
        tallies: tallies.clone(),
    })
}

fn scheme_vote(cands: &CandidateSet, picked: &[&RankedCandidate], scheme: WeightScheme, lambda: f64, top_s: usize, name: &str) -> Result<Prediction> {
    let weights: Vec<f64> = picked.iter().map(|c| candidate_weight(c, scheme, lambda, top_s)).collect();
    weighted_vote(&cands.video_id, name, picked, &weights)
}

/// One vote per candidate.
pub fn simple_vote(cands: &CandidateSet) -> Result<Prediction> {
    let all: Vec<_> = cands.iter().collect();
    scheme_vote(cands, &all, WeightScheme::Simple, 1.0, 0, "simple")
}

/// Each candidate votes `1 / rank`.
pub fn weighted_rank_vote(cands: &CandidateSet) -> Result<Prediction> {
    let all: Vec<_> = cands.iter().collect();
    scheme_vote(cands, &all, WeightScheme::WeightedRank, 1.0, 0, "weighted_rank")
}

/// Each candidate votes `λ / rank + (1 − λ)·local_score` (local term only for rank ≤ `top_s`).
pub fn blended_vote(cands: &CandidateSet, lambda: f64, top_s: usize) -> Result<Prediction> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let all: Vec<_> = cands.iter().collect();
    scheme_vote(cands, &all, WeightScheme::Blended, lambda, top_s, "blended")
}

/// Restrict voting to the heaviest DBSCAN cluster of candidate locations,
/// then vote with `inner`. Falls back to all candidates, flagged, when every
/// candidate is noise.
pub fn density_vote(
    cands: &CandidateSet,
    params: &DbscanParams,
    inner: WeightScheme,
    lambda: f64,
    top_s: usize,
) -> Result<Prediction> {
    let all: Vec<&RankedCandidate> = cands.iter().collect();
    if all.is_empty() {
        return Err(Error::EmptyInput(format!("video {} has no candidates to vote", cands.video_id)));
    }
    let name = Strategy::Density(inner).to_string();
    let points: Vec<GeoPoint> = all.iter().map(|c| c.location).collect();
    let planar = project_about_centroid(&points)?;
    let labeling = dbscan(&planar, params)?;
    let weights: Vec<f64> = all.iter().map(|c| candidate_weight(c, inner, lambda, top_s)).collect();

    match winning_cluster(&labeling, Some(&weights))? {
        Some(cluster) => {
            let (picked, w): (Vec<_>, Vec<_>) = all
                .iter()
                .zip(&weights)
                .zip(&labeling.labels)
                .filter(|(_, l)| **l == Label::Cluster(cluster))
                .map(|((c, w), _)| (*c, *w))
                .unzip();
            weighted_vote(&cands.video_id, &name, &picked, &w)
        }
        None => {
            let mut p = weighted_vote(&cands.video_id, &name, &all, &weights)?;
            p.no_dense_cluster = true;
            Ok(p)
        }
    }
}

/// Aggregate with the strategy in `cfg`.
pub fn aggregate(cands: &CandidateSet, cfg: &AggregationConfig) -> Result<Prediction> {
    cfg.validate()?;
    let mut p = match cfg.strategy {
        Strategy::Plain(WeightScheme::Simple) => simple_vote(cands),
        Strategy::Plain(WeightScheme::WeightedRank) => weighted_rank_vote(cands),
        Strategy::Plain(WeightScheme::Blended) => blended_vote(cands, cfg.lambda, cfg.top_s),
        Strategy::Density(inner) => density_vote(cands, &cfg.dbscan, inner, cfg.lambda, cfg.top_s),
    }?;
    p.strategy = cfg.strategy.to_string();
    Ok(p)
}

/// Retrieve, score local features when the strategy needs them, and aggregate.
pub fn locate_video(
    video: &VideoQuery,
    index: &Index,
    cfg: &AggregationConfig,
    keypoints: Option<&dyn KeypointSource>,
) -> Result<(CandidateSet, Prediction)> {
    cfg.validate()?;
    let mut cands = retrieve_candidates(video, index, cfg.k)?;
    if cfg.strategy.scheme() == WeightScheme::Blended {
        if let Some(source) = keypoints {
            attach_local_scores(&mut cands, video, source, cfg.top_s, cfg.top_matches)?;
        }
    }
    let p = aggregate(&cands, cfg)?;
    Ok((cands, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cand(location_id: u64, rank: usize) -> RankedCandidate {
        RankedCandidate {
            image_id: location_id * 100 + rank as u64,
            location_id,
            location: GeoPoint::new(40.0 + location_id as f64 * 1e-3, -80.0).unwrap(),
            rank,
            distance: rank as f64 * 0.1,
            local_score: None,
        }
    }

    fn set(lists: Vec<Vec<RankedCandidate>>) -> CandidateSet {
        CandidateSet { video_id: "v".into(), per_keyframe: lists }
    }

    #[test]
    fn unanimity() {
        let cs = set((0..3).map(|_| (1..=5).map(|r| cand(9, r)).collect()).collect());
        let p = simple_vote(&cs).unwrap();
        assert_eq!((p.winning_location_id, p.total_vote), (Some(9), 15.0));
        assert_eq!(p.location, cand(9, 1).location);
    }

    #[test]
    fn majority() {
        let mut list: Vec<_> = (1..=5).map(|r| cand(1, r)).collect();
        list.extend((1..=2).map(|r| cand(1, r)));
        list.extend((3..=5).map(|r| cand(2, r)));
        let p = simple_vote(&set(vec![list])).unwrap();
        assert_eq!((p.winning_location_id, p.total_vote), (Some(1), 7.0));
    }

    #[test]
    fn simple_tie_goes_to_smaller_rank_sum() {
        // L1 ranks 1,1,2,2,3 (sum 9); L2 ranks 4,4,4,4,4 (sum 20)
        let l1: Vec<_> = [1, 1, 2, 2, 3].iter().map(|&r| cand(1, r)).collect();
        let l2: Vec<_> = [4; 5].iter().map(|&r| cand(2, r)).collect();
        let p = simple_vote(&set(vec![l2, l1])).unwrap();
        assert_eq!(p.winning_location_id, Some(1));
        let t: Vec<_> = p.tallies.iter().map(|t| (t.location_id, t.votes, t.rank_sum)).collect();
        assert_eq!(t, vec![(1, 5.0, 9), (2, 5.0, 20)]);
    }

    #[test]
    fn full_tie_goes_to_smaller_location_id() {
        let p = simple_vote(&set(vec![vec![cand(7, 1)], vec![cand(3, 1)]])).unwrap();
        assert_eq!(p.winning_location_id, Some(3));
    }

    #[test]
    fn weighted_rank_harmonic_sum() {
        let cs = set(vec![(1..=5).map(|r| cand(4, r)).collect()]);
        let p = weighted_rank_vote(&cs).unwrap();
        assert!((p.total_vote - (1.0 + 0.5 + 1.0 / 3.0 + 0.25 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn weighted_rank_prefers_top_hit() {
        let cs = set(vec![vec![cand(1, 1), cand(2, 3), cand(2, 4)]]);
        let p = weighted_rank_vote(&cs).unwrap();
        assert_eq!(p.winning_location_id, Some(1));
        let l2 = p.tallies.iter().find(|t| t.location_id == 2).unwrap();
        assert!((l2.votes - 7.0 / 12.0).abs() < 1e-12);
        // simple voting disagrees
        assert_eq!(simple_vote(&cs).unwrap().winning_location_id, Some(2));
    }

    #[test]
    fn singleton() {
        let p = weighted_rank_vote(&set(vec![vec![cand(5, 1)]])).unwrap();
        assert_eq!((p.winning_location_id, p.total_vote), (Some(5), 1.0));
    }

    #[test]
    fn empty_set_errors() {
        assert!(matches!(simple_vote(&set(vec![vec![]])), Err(Error::EmptyInput(_))));
        assert!(density_vote(&set(vec![]), &DbscanParams::default(), WeightScheme::Simple, 0.4, 5).is_err());
    }

    #[test]
    fn blended_weight_fixture() {
        let mut c = cand(1, 1);
        c.local_score = Some(0.5);
        let w = candidate_weight(&c, WeightScheme::Blended, 0.4, 5);
        assert!((w - 0.70).abs() < 1e-12);
        c.rank = 6;
        assert!((candidate_weight(&c, WeightScheme::Blended, 0.4, 5) - 0.4 / 6.0).abs() < 1e-15);
        c.local_score = None;
        c.rank = 2;
        assert_eq!(candidate_weight(&c, WeightScheme::Blended, 0.4, 5), 0.2);
    }

    #[test]
    fn blended_local_only() {
        let mut a = cand(1, 1);
        a.local_score = Some(0.2);
        let mut b = cand(2, 5);
        b.local_score = Some(0.9);
        let cs = set(vec![vec![a, b]]);
        assert_eq!(blended_vote(&cs, 0.0, 5).unwrap().winning_location_id, Some(2));
        assert_eq!(blended_vote(&cs, 1.0, 5).unwrap().winning_location_id, Some(1));
        assert!(blended_vote(&cs, 1.5, 5).is_err());
    }

    #[test]
    fn blended_lambda_one_is_weighted_rank() {
        let mut list: Vec<_> = (1..=5).map(|r| cand(r as u64 % 3, r)).collect();
        for (i, c) in list.iter_mut().enumerate() {
            c.local_score = Some(0.1 * i as f64);
        }
        let cs = set(vec![list.clone(), list]);
        let mut b = blended_vote(&cs, 1.0, 3).unwrap();
        let w = weighted_rank_vote(&cs).unwrap();
        b.strategy = w.strategy.clone();
        assert_eq!(b, w);
    }

    #[test]
    fn density_filters_scattered_outliers() {
        // 20 candidates near location 1..4 (within ~30 m), 4 far singletons
        let near = |id: u64, rank: usize| RankedCandidate {
            location: GeoPoint::new(40.4406 + id as f64 * 1e-4, -79.9959).unwrap(),
            ..cand(id, rank)
        };
        let far = |id: u64, rank: usize| RankedCandidate {
            location: GeoPoint::new(40.4406 + id as f64 * 0.01, -79.9959 + id as f64 * 0.01).unwrap(),
            ..cand(id, rank)
        };
        let mut lists = Vec::new();
        for kf in 0..4u64 {
            let mut l: Vec<_> = (1..=5).map(|r| near(1 + (kf + r as u64) % 4, r)).collect();
            l.push(far(10 + kf, 6));
            lists.push(l);
        }
        let cs = set(lists);
        let p = density_vote(&cs, &DbscanParams { eps: 75.0, min_pts: 3 }, WeightScheme::Simple, 0.4, 5).unwrap();
        assert!(!p.no_dense_cluster);
        assert!(p.tallies.iter().all(|t| t.location_id < 10));
        assert_eq!(p.tallies.iter().map(|t| t.count).sum::<usize>(), 20);
        assert!(p.winning_location_id.unwrap() < 10);
    }

    #[test]
    fn density_falls_back_when_all_noise() {
        let a = cand(1, 1);
        let b = RankedCandidate { location: GeoPoint::new(40.1, -80.0).unwrap(), ..cand(2, 1) };
        let cs = set(vec![vec![a], vec![b]]);
        let p = density_vote(&cs, &DbscanParams { eps: 75.0, min_pts: 3 }, WeightScheme::Simple, 0.4, 5).unwrap();
        assert!(p.no_dense_cluster);
        assert_eq!(p.winning_location_id, Some(1));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::all() {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("density".parse::<Strategy>().unwrap(), Strategy::Density(WeightScheme::Simple));
        assert!("majority".parse::<Strategy>().is_err());
    }

    #[test]
    fn config_validation() {
        let ok = AggregationConfig::default();
        assert!(ok.validate().is_ok());
        assert!(AggregationConfig { lambda: -0.1, ..ok }.validate().is_err());
        assert!(AggregationConfig { top_s: 6, ..ok }.validate().is_err());
        assert!(AggregationConfig { k: 0, ..ok }.validate().is_err());
    }
}
