//! Precision-within-distance evaluation and the two reference systems.
//!
//! `P(d)` is the fraction of videos whose predicted location lies within `d`
//! meters (closed threshold) of the ground truth. The random baseline picks
//! one retrieved candidate uniformly; the oracle picks the retrieved
//! candidate nearest to the truth and so bounds every aggregation strategy
//! that selects among the same candidates.

mod benchmark;

pub use benchmark::{synthetic_benchmark, BenchmarkConfig, BenchmarkRun};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_distance, GeoPoint};
use crate::index::{Index, RankedCandidate};
use crate::output::Fixed9;
use crate::rng::{mix_seed, Xorshift64Star};
use crate::voting::{
    aggregate, attach_local_scores, retrieve_candidates, weighted_vote, AggregationConfig, CandidateSet,
    KeypointSource, Prediction, Strategy, WeightScheme,
};

pub const DEFAULT_GRID: [f64; 6] = [5.0, 10.0, 30.0, 50.0, 100.0, 150.0];
pub const RANDOM: &str = "random";
pub const ORACLE: &str = "oracle";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Distance thresholds in meters, ascending.
    pub grid: Vec<f64>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { grid: DEFAULT_GRID.to_vec(), seed: 0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("distance grid is empty".into()));
        }
        if self.grid.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::Config("distance grid values must be non-negative".into()));
        }
        if self.grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("distance grid must be sorted ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCurve {
    pub method: String,
    /// `(d, P(d))` pairs in grid order.
    pub points: Vec<(f64, f64)>,
}

impl PrecisionCurve {
    pub fn at(&self, d: f64) -> Option<f64> {
        self.points.iter().find(|(x, _)| *x == d).map(|(_, p)| *p)
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// Distances in meters from each prediction to its truth.
pub fn errors_m(preds: &[GeoPoint], truths: &[GeoPoint]) -> Result<Vec<f64>> {
    if preds.len() != truths.len() {
        return Err(Error::invalid(format!("{} predictions for {} truths", preds.len(), truths.len())));
    }
    preds.iter().zip(truths).map(|(p, t)| haversine_distance(*p, *t)).collect()
}

fn fraction_within(errors: &[f64], d: f64) -> f64 {
    errors.iter().filter(|e| **e <= d).count() as f64 / errors.len() as f64
}

/// `P(d)` over aligned predictions and truths.
pub fn precision_at(preds: &[Prediction], truths: &[GeoPoint], d: f64) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions to evaluate".into()));
    }
    let locs: Vec<GeoPoint> = preds.iter().map(|p| p.location).collect();
    Ok(fraction_within(&errors_m(&locs, truths)?, d))
}

/// Precision curve from per-video errors.
pub fn curve_from_errors(method: &str, errors: &[f64], grid: &[f64]) -> Result<PrecisionCurve> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("no predictions to evaluate".into()));
    }
    Ok(PrecisionCurve {
        method: method.to_string(),
        points: grid.iter().map(|&d| (d, fraction_within(errors, d))).collect(),
    })
}

fn single_vote(cands: &CandidateSet, method: &str, c: &RankedCandidate) -> Result<Prediction> {
    weighted_vote(&cands.video_id, method, &[c], &[1.0])
}

/// Uniformly pick one of the candidates with a seeded xorshift64* draw.
pub fn random_baseline(cands: &CandidateSet, seed: u64) -> Result<Prediction> {
    let all: Vec<&RankedCandidate> = cands.iter().collect();
    if all.is_empty() {
        return Err(Error::EmptyInput(format!("video {} has no candidates", cands.video_id)));
    }
    let i = Xorshift64Star::new(seed).below(all.len() as u64) as usize;
    single_vote(cands, RANDOM, all[i])
}

/// The candidate location nearest to `truth`; ties go to the smaller `location_id`.
pub fn oracle(cands: &CandidateSet, truth: Option<GeoPoint>) -> Result<Prediction> {
    let truth = truth.ok_or_else(|| Error::invalid(format!("video {} has no ground truth", cands.video_id)))?;
    let mut best: Option<(f64, &RankedCandidate)> = None;
    for c in cands.iter() {
        let d = haversine_distance(c.location, truth)?;
        let better = match best {
            None => true,
            Some((bd, b)) => d < bd || (d == bd && c.location_id < b.location_id),
        };
        if better {
            best = Some((d, c));
        }
    }
    match best {
        Some((_, c)) => single_vote(cands, ORACLE, c),
        None => Err(Error::EmptyInput(format!("video {} has no candidates", cands.video_id))),
    }
}

/// Per-video, per-method outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoDiagnostic {
    pub video_id: String,
    pub method: String,
    pub pred_lat: Fixed9,
    pub pred_lon: Fixed9,
    pub truth_lat: Fixed9,
    pub truth_lon: Fixed9,
    pub error_m: f64,
    pub winning_location_id: Option<u64>,
    pub winning_tally: f64,
    pub no_dense_cluster: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub grid: Vec<f64>,
    /// Requested strategies in order, then random, then oracle.
    pub curves: Vec<PrecisionCurve>,
    /// Video-major, methods in curve order.
    pub diagnostics: Vec<VideoDiagnostic>,
    /// Aligned with `diagnostics`.
    pub predictions: Vec<Prediction>,
}

impl Comparison {
    pub fn curve(&self, method: &str) -> Option<&PrecisionCurve> {
        self.curves.iter().find(|c| c.method == method)
    }

    /// Errors in meters of `method`, in video order.
    pub fn errors(&self, method: &str) -> Vec<f64> {
        self.diagnostics.iter().filter(|d| d.method == method).map(|d| d.error_m).collect()
    }

    /// Table with one row per method and one column per grid distance.
    pub fn to_csv(&self) -> String {
        curves_csv(&self.grid, &self.curves)
    }

    pub fn diagnostics_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.diagnostics).map_err(|e| Error::invalid(e.to_string()))
    }
}

pub fn curves_csv(grid: &[f64], curves: &[PrecisionCurve]) -> String {
    let mut out = String::from("method");
    for d in grid {
        let _ = write!(out, ",{d}");
    }
    out.push('\n');
    for c in curves {
        out.push_str(&c.method);
        for (_, p) in &c.points {
            let _ = write!(out, ",{p:.6}");
        }
        out.push('\n');
    }
    out
}

/// Seed of the random baseline for the video at `position`.
pub fn video_seed(seed: u64, position: usize) -> u64 {
    mix_seed(&[seed, position as u64])
}

/// Run every strategy plus the random baseline and the oracle on the same
/// candidate sets, then build one precision curve per method.
pub fn compare_methods(
    videos: &[crate::voting::VideoQuery],
    index: &Index,
    strategies: &[Strategy],
    agg: &AggregationConfig,
    keypoints: Option<&dyn KeypointSource>,
    cfg: &EvalConfig,
) -> Result<Comparison> {
    cfg.validate()?;
    agg.validate()?;
    if videos.is_empty() {
        return Err(Error::EmptyInput("no videos to evaluate".into()));
    }
    let wants_local = strategies.iter().any(|s| s.scheme() == WeightScheme::Blended);
    let mut methods: Vec<String> = strategies.iter().map(Strategy::to_string).collect();
    methods.push(RANDOM.into());
    methods.push(ORACLE.into());

    let per_video: Vec<Vec<(VideoDiagnostic, Prediction)>> = videos
        .par_iter()
        .enumerate()
        .map(|(pos, video)| -> Result<Vec<(VideoDiagnostic, Prediction)>> {
            let truth = video
                .ground_truth
                .ok_or_else(|| Error::invalid(format!("video {} has no ground truth", video.video_id)))?;
            let mut cands = retrieve_candidates(video, index, agg.k)?;
            if wants_local {
                if let Some(source) = keypoints {
                    attach_local_scores(&mut cands, video, source, agg.top_s, agg.top_matches)?;
                }
            }
            let mut preds = Vec::with_capacity(methods.len());
            for s in strategies {
                preds.push(aggregate(&cands, &agg.with_strategy(*s))?);
            }
            preds.push(random_baseline(&cands, video_seed(cfg.seed, pos))?);
            preds.push(oracle(&cands, Some(truth))?);
            preds
                .into_iter()
                .zip(&methods)
                .map(|(p, m)| {
                    let d = VideoDiagnostic {
                        video_id: video.video_id.clone(),
                        method: m.clone(),
                        pred_lat: Fixed9(p.location.lat),
                        pred_lon: Fixed9(p.location.lon),
                        truth_lat: Fixed9(truth.lat),
                        truth_lon: Fixed9(truth.lon),
                        error_m: haversine_distance(p.location, truth)?,
                        winning_location_id: p.winning_location_id,
                        winning_tally: p.total_vote,
                        no_dense_cluster: p.no_dense_cluster,
                    };
                    Ok((d, p))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (diagnostics, predictions): (Vec<_>, Vec<_>) = per_video.into_iter().flatten().unzip();
    let curves = methods
        .iter()
        .map(|m| {
            let errs: Vec<f64> = diagnostics.iter().filter(|d| &d.method == m).map(|d| d.error_m).collect();
            curve_from_errors(m, &errs, &cfg.grid)
        })
        .collect::<Result<_>>()?;
    Ok(Comparison { grid: cfg.grid.clone(), curves, diagnostics, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn cand(location_id: u64, location: GeoPoint, rank: usize) -> RankedCandidate {
        RankedCandidate { image_id: location_id * 10 + rank as u64, location_id, location, rank, distance: 0.0, local_score: None }
    }

    fn pred_at(loc: GeoPoint) -> Prediction {
        Prediction {
            video_id: "v".into(),
            strategy: "x".into(),
            location: loc,
            winning_location_id: None,
            total_vote: 0.0,
            tallies: vec![],
            no_dense_cluster: false,
        }
    }

    #[test]
    fn perfect_predictor() {
        let t = vec![gp(40.0, -80.0), gp(40.01, -80.0)];
        let p: Vec<_> = t.iter().map(|&l| pred_at(l)).collect();
        for d in [0.0, 5.0, 150.0] {
            assert_eq!(precision_at(&p, &t, d).unwrap(), 1.0);
        }
    }

    #[test]
    fn half_within() {
        let t = vec![gp(40.0, -80.0), gp(40.0, -80.0)];
        let p = vec![pred_at(gp(40.0, -80.0)), pred_at(gp(40.01, -80.0))];
        assert_eq!(precision_at(&p, &t, 100.0).unwrap(), 0.5);
        assert!(precision_at(&p, &t[..1], 100.0).is_err());
    }

    #[test]
    fn counting_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t: Vec<_> = (0..50).map(|_| gp(40.0 + rng.random_range(-0.01..0.01), -80.0)).collect();
        let p: Vec<_> = (0..50).map(|_| pred_at(gp(40.0 + rng.random_range(-0.01..0.01), -80.0))).collect();
        for d in DEFAULT_GRID {
            let mut hits = 0;
            for i in 0..50 {
                if haversine_distance(p[i].location, t[i]).unwrap() <= d {
                    hits += 1;
                }
            }
            assert_eq!(precision_at(&p, &t, d).unwrap(), hits as f64 / 50.0);
        }
    }

    #[test]
    fn random_singleton_and_determinism() {
        let one = CandidateSet { video_id: "v".into(), per_keyframe: vec![vec![cand(4, gp(1.0, 2.0), 1)]] };
        for seed in 0..20 {
            assert_eq!(random_baseline(&one, seed).unwrap().winning_location_id, Some(4));
        }
        let many = CandidateSet {
            video_id: "v".into(),
            per_keyframe: vec![(1..=5).map(|r| cand(r as u64, gp(r as f64, 0.0), r)).collect()],
        };
        assert_eq!(random_baseline(&many, 99).unwrap(), random_baseline(&many, 99).unwrap());
    }

    #[test]
    fn random_is_uniform() {
        let cs = CandidateSet {
            video_id: "v".into(),
            per_keyframe: vec![(1..=4).map(|r| cand(r as u64, gp(r as f64, 0.0), r)).collect()],
        };
        let mut counts = [0usize; 4];
        for seed in 0..10_000u64 {
            let id = random_baseline(&cs, seed).unwrap().winning_location_id.unwrap();
            counts[id as usize - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn oracle_picks_nearest() {
        let truth = gp(40.0, -80.0);
        let near = gp(40.0 + 10.0 / 111_195.0, -80.0);
        let far = gp(40.0 + 200.0 / 111_195.0, -80.0);
        let cs = CandidateSet { video_id: "v".into(), per_keyframe: vec![vec![cand(2, far, 1), cand(1, near, 2)]] };
        assert_eq!(oracle(&cs, Some(truth)).unwrap().winning_location_id, Some(1));
        assert!(oracle(&cs, None).is_err());
        let exact = CandidateSet { video_id: "v".into(), per_keyframe: vec![vec![cand(8, truth, 1)]] };
        let p = oracle(&exact, Some(truth)).unwrap();
        assert_eq!(haversine_distance(p.location, truth).unwrap(), 0.0);
    }

    #[test]
    fn oracle_matches_exhaustive_min() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let truth = gp(40.0 + rng.random_range(-0.01..0.01), -80.0 + rng.random_range(-0.01..0.01));
            let list: Vec<_> = (1..=15)
                .map(|r| {
                    let id = rng.random_range(0..8u64);
                    cand(id, gp(40.0 + id as f64 * 1e-3, -80.0 + id as f64 * 7e-4), r)
                })
                .collect();
            let best = list
                .iter()
                .map(|c| (haversine_distance(c.location, truth).unwrap(), c.location_id))
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            let cs = CandidateSet { video_id: "v".into(), per_keyframe: vec![list] };
            assert_eq!(oracle(&cs, Some(truth)).unwrap().winning_location_id, Some(best.1));
        }
    }

    #[test]
    fn grid_validation_and_csv() {
        assert!(EvalConfig { grid: vec![10.0, 5.0], seed: 0 }.validate().is_err());
        assert!(EvalConfig { grid: vec![], seed: 0 }.validate().is_err());
        let c = curve_from_errors("simple", &[3.0, 40.0, 1e9], &DEFAULT_GRID).unwrap();
        assert!(c.is_monotone());
        assert_eq!(c.at(5.0), Some(1.0 / 3.0));
        let csv = curves_csv(&DEFAULT_GRID, &[c]);
        assert_eq!(csv.lines().next().unwrap(), "method,5,10,30,50,100,150");
        assert_eq!(csv.lines().nth(1).unwrap(), "simple,0.333333,0.333333,0.333333,0.666667,0.666667,0.666667");
    }
}
