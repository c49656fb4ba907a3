use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{rng_for, unit_descriptor, SyntheticWorld};
use crate::error::{Error, Result};
use crate::geo::{centroid, GeoPoint};
use crate::voting::{Keyframe, KeypointSet, VideoQuery};

const TAG_VIDEO: u64 = 11;
const TAG_PATH: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VideoSpec {
    pub keyframes: usize,
    /// Query noise, relative to a unit-norm signal.
    pub noise: f64,
    /// Weight of look-alike content from a random other place in every keyframe.
    pub confusion: f64,
    /// Probability that a keyframe shows only look-alike content.
    pub distractor_rate: f64,
    /// Length of the straight walk sampled by [`benchmark_videos`].
    pub path_length_m: f64,
    pub keypoints: bool,
}

impl Default for VideoSpec {
    fn default() -> Self {
        VideoSpec {
            keyframes: 10,
            noise: 0.5,
            confusion: 0.5,
            distractor_rate: 0.3,
            path_length_m: 45.0,
            keypoints: true,
        }
    }
}

impl VideoSpec {
    pub fn validate(&self) -> Result<()> {
        if self.keyframes == 0 {
            return Err(Error::Config("a video needs at least one keyframe".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config("video noise must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.confusion) {
            return Err(Error::Config("confusion must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.distractor_rate) {
            return Err(Error::Config("distractor rate must be in [0, 1]".into()));
        }
        if !(self.path_length_m.is_finite() && self.path_length_m >= 0.0) {
            return Err(Error::Config("path length must be non-negative".into()));
        }
        Ok(())
    }
}

/// Point at arc-length fraction `t` of a polyline given in grid coordinates.
fn along(path: &[(f64, f64)], t: f64) -> (f64, f64) {
    if path.len() == 1 {
        return path[0];
    }
    let seg: Vec<f64> = path.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).collect();
    let total: f64 = seg.iter().sum();
    if total == 0.0 {
        return path[0];
    }
    let mut left = t * total;
    for (i, len) in seg.iter().enumerate() {
        if left <= *len || i == seg.len() - 1 {
            let f = if *len > 0.0 { (left / len).min(1.0) } else { 0.0 };
            let (a, b) = (path[i], path[i + 1]);
            return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        }
        left -= len;
    }
    unreachable!()
}

impl SyntheticWorld {
    /// Bilinear neighbors of a continuous grid point as `(location_id, weight)`.
    fn neighbors(&self, x: f64, y: f64) -> Vec<(u64, f64)> {
        let axis = |v: f64, n: usize| -> (usize, f64) {
            if n == 1 {
                return (0, 0.0);
            }
            let i = (v.floor() as usize).min(n - 2);
            (i, v - i as f64)
        };
        let (c, fx) = axis(x, self.spec.cols);
        let (r, fy) = axis(y, self.spec.rows);
        let mut out = Vec::with_capacity(4);
        for (dr, wr) in [(0, 1.0 - fy), (1, fy)] {
            for (dc, wc) in [(0, 1.0 - fx), (1, fx)] {
                let w = wr * wc;
                if w > 0.0 {
                    out.push((self.location_id(r + dr, c + dc), w));
                }
            }
        }
        out
    }

    /// Noise-free view content at a continuous grid point.
    fn scene(&self, x: f64, y: f64, yaw_deg: f64, pitch: usize) -> Vec<f64> {
        let t = yaw_deg / self.spec.yaw_step();
        let y0 = t.floor() as usize % self.spec.yaws;
        let y1 = (y0 + 1) % self.spec.yaws;
        let fy = t - t.floor();
        let mut d = vec![0.0; self.spec.dim];
        for (loc, w) in self.neighbors(x, y) {
            let b = self.base(loc);
            let v0 = self.view(loc, pitch, y0);
            let v1 = self.view(loc, pitch, y1);
            for i in 0..d.len() {
                d[i] += w * (b[i] + (1.0 - fy) * v0[i] + fy * v1[i]);
            }
        }
        d
    }

    fn random_keypoints(&self, words: &[u64]) -> KeypointSet {
        let mut rng = rng_for(words);
        (0..self.spec.keypoints)
            .map(|_| (0..self.spec.keypoint_dim).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f32>>())
            .collect()
    }
}

struct Shot {
    at: (f64, f64),
    yaw: f64,
    pitch: usize,
    lookalike: (f64, f64, f64, usize),
    distractor: bool,
}

fn keyframe(world: &SyntheticWorld, shot: &Shot, spec: &VideoSpec, words: &[u64]) -> Result<Keyframe> {
    let (lx, ly, lyaw, lpitch) = shot.lookalike;
    let other = world.scene(lx, ly, lyaw, lpitch);
    let own_weight = if shot.distractor { 0.0 } else { 1.0 - spec.confusion };
    let mut d: Vec<f64> = other.iter().map(|v| (1.0 - own_weight) * v).collect();
    if own_weight > 0.0 {
        let own = world.scene(shot.at.0, shot.at.1, shot.yaw, shot.pitch);
        d.iter_mut().zip(own).for_each(|(a, b)| *a += own_weight * b);
    }
    let e = world.noise(words, spec.noise);
    d.iter_mut().zip(e).for_each(|(a, b)| *a += b);
    let keypoints = spec.keypoints.then(|| {
        let kw = [words, &[1]].concat();
        if shot.distractor {
            world.random_keypoints(&kw)
        } else {
            world.keypoints_from(&world.landmarks_at(shot.at.0, shot.at.1), &kw)
        }
    });
    Ok(Keyframe { descriptor: unit_descriptor(d)?, keypoints })
}

/// A video walking `path`: keyframes are spread evenly along it by arc
/// length, each with a random heading, and the ground truth is the path
/// centroid. Every keyframe mixes in `spec.confusion` of the view at a random
/// other place; a `spec.distractor_rate` share shows only that other place.
pub fn generate_video(world: &SyntheticWorld, video_id: &str, path: &[GeoPoint], spec: &VideoSpec, seed: u64) -> Result<VideoQuery> {
    spec.validate()?;
    if path.is_empty() {
        return Err(Error::invalid("video path is empty"));
    }
    let grid: Vec<(f64, f64)> = path.iter().map(|&p| world.grid_coords(p)).collect::<Result<_>>()?;
    let mut rng = rng_for(&[world.seed, TAG_VIDEO, seed]);
    let n = spec.keyframes;
    let mut keyframes = Vec::with_capacity(n);
    for k in 0..n {
        let words = [world.seed, TAG_VIDEO, seed, k as u64];
        let yaw = rng.random_range(0.0..360.0);
        let pitch = rng.random_range(0..world.spec.pitches.len());
        let lookalike = (
            rng.random_range(0.0..=(world.spec.cols - 1) as f64),
            rng.random_range(0.0..=(world.spec.rows - 1) as f64),
            rng.random_range(0.0..360.0),
            rng.random_range(0..world.spec.pitches.len()),
        );
        let distractor = rng.random_bool(spec.distractor_rate);
        let shot = Shot { at: along(&grid, (k as f64 + 0.5) / n as f64), yaw, pitch, lookalike, distractor };
        keyframes.push(keyframe(world, &shot, spec, &words)?);
    }
    Ok(VideoQuery { video_id: video_id.to_string(), keyframes, ground_truth: Some(centroid(path)?) })
}

/// `count` straight walks of `spec.path_length_m` at random positions and
/// headings, named `video_000`, `video_001`, ...
pub fn benchmark_videos(world: &SyntheticWorld, count: usize, spec: &VideoSpec, seed: u64) -> Result<Vec<VideoQuery>> {
    spec.validate()?;
    let half = spec.path_length_m / 2.0 / world.spec.spacing_m;
    let (w, h) = ((world.spec.cols - 1) as f64, (world.spec.rows - 1) as f64);
    if 2.0 * half > w.min(h) {
        return Err(Error::Config("world is too small for the requested path length".into()));
    }
    let mut rng = rng_for(&[world.seed, TAG_PATH, seed]);
    (0..count)
        .map(|i| {
            let cx = rng.random_range(half..=w - half);
            let cy = rng.random_range(half..=h - half);
            let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (dx, dy) = (half * heading.cos(), half * heading.sin());
            let path = [world.point_at(cx - dx, cy - dy)?, world.point_at(cx + dx, cy + dy)?];
            generate_video(world, &format!("video_{i:03}"), &path, spec, crate::rng::mix_seed(&[seed, i as u64]))
        })
        .collect()
}
