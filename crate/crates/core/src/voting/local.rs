//! Local-feature similarity between a keyframe and a retrieved reference.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{CandidateSet, VideoQuery};
use crate::error::{Error, Result};

/// A set of local-feature descriptors for one image.
pub type KeypointSet = Vec<Vec<f32>>;

/// Supplies keypoint descriptors for reference images.
pub trait KeypointSource: Sync {
    fn keypoints(&self, image_id: u64) -> Option<KeypointSet>;
}

impl KeypointSource for HashMap<u64, KeypointSet> {
    fn keypoints(&self, image_id: u64) -> Option<KeypointSet> {
        self.get(&image_id).cloned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalScore {
    /// Similarity in [0, 1]; 0 when `missing`.
    pub score: f64,
    /// One of the keypoint sets was empty.
    pub missing: bool,
}

fn l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Brute-force match every query keypoint to its nearest candidate keypoint,
/// average the `top_matches` smallest match distances and map the mean `m`
/// to `1 / (1 + m)`.
pub fn local_match_score(query: &[Vec<f32>], candidate: &[Vec<f32>], top_matches: usize) -> Result<LocalScore> {
    if top_matches == 0 {
        return Err(Error::invalid("number of top matches must be at least 1"));
    }
    if query.is_empty() || candidate.is_empty() {
        return Ok(LocalScore { score: 0.0, missing: true });
    }
    let dim = query[0].len();
    if query.iter().chain(candidate).any(|k| k.len() != dim) {
        return Err(Error::invalid("keypoint descriptors have mixed dimensions"));
    }
    let mut matches: Vec<f64> = query
        .iter()
        .map(|q| candidate.iter().map(|c| l2(q, c)).fold(f64::INFINITY, f64::min))
        .collect();
    matches.sort_by(f64::total_cmp);
    matches.truncate(top_matches);
    let mean = matches.iter().sum::<f64>() / matches.len() as f64;
    Ok(LocalScore { score: 1.0 / (1.0 + mean), missing: false })
}

/// Fill `local_score` for candidates ranked `1..=top_s` of every keyframe.
/// Candidates without keypoints on either side are left as `None`.
pub fn attach_local_scores(
    cands: &mut CandidateSet,
    video: &VideoQuery,
    source: &dyn KeypointSource,
    top_s: usize,
    top_matches: usize,
) -> Result<()> {
    if cands.per_keyframe.len() != video.keyframes.len() {
        return Err(Error::invalid(format!(
            "{} candidate lists for {} keyframes",
            cands.per_keyframe.len(),
            video.keyframes.len()
        )));
    }
    cands
        .per_keyframe
        .par_iter_mut()
        .zip(video.keyframes.par_iter())
        .try_for_each(|(list, kf)| -> Result<()> {
            for c in list.iter_mut() {
                c.local_score = None;
                if c.rank > top_s {
                    continue;
                }
                let (Some(q), Some(r)) = (kf.keypoints.as_ref(), source.keypoints(c.image_id)) else {
                    continue;
                };
                let s = local_match_score(q, &r, top_matches)?;
                if !s.missing {
                    c.local_score = Some(s.score);
                }
            }
            Ok(())
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identical_sets_score_one() {
        let k = vec![vec![0.1, 0.2], vec![0.5, -1.0]];
        assert_eq!(local_match_score(&k, &k, 50).unwrap(), LocalScore { score: 1.0, missing: false });
    }

    #[test]
    fn constant_distance() {
        let q = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        let c = vec![vec![0.0, 2.0], vec![10.0, 2.0]];
        let s = local_match_score(&q, &c, 5).unwrap();
        assert!((s.score - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_sets_are_flagged() {
        let k = vec![vec![1.0]];
        assert_eq!(local_match_score(&[], &k, 3).unwrap(), LocalScore { score: 0.0, missing: true });
        assert!(local_match_score(&k, &[], 3).unwrap().missing);
        assert!(local_match_score(&k, &k, 0).is_err());
    }

    #[test]
    fn matches_all_pairs_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut set = |n: usize| -> Vec<Vec<f32>> {
                (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect()
            };
            let q = set(7);
            let c = set(5);
            // all pairs, then per query row minimum
            let mut best = vec![f64::INFINITY; q.len()];
            for (i, a) in q.iter().enumerate() {
                for b in &c {
                    let d: f64 = a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2)).sum();
                    best[i] = best[i].min(d.sqrt());
                }
            }
            best.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = (best[0] + best[1] + best[2]) / 3.0;
            let got = local_match_score(&q, &c, 3).unwrap().score;
            assert!((got - 1.0 / (1.0 + mean)).abs() < 1e-12);
        }
    }
}
