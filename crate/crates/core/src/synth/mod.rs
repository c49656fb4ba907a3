//! A synthetic street-view world with controllable retrieval behavior.
//!
//! Capture locations sit on a `rows × cols` grid (row-major `location_id`,
//! rows run north, columns east of `origin`). Every location has one image
//! per (pitch, yaw). A reference descriptor is
//!
//! ```text
//! normalize(B(loc) + view_weight·V(loc, view) + noise·ε)
//! ```
//!
//! where `B` mixes a smooth random field over the grid (so nearby locations
//! look alike) with an independent per-location term, `V` is a per-view
//! perturbation and `ε` is per-image Gaussian noise. Local features are 32
//! "landmarks" per image, each sampled from its own smooth field plus noise,
//! so keypoint match distances shrink with spatial proximity.
//!
//! Generation is deterministic in `(spec, seed)`; every random draw is seeded
//! from a hash of the ids involved, so parallel generation cannot change the
//! output.

mod field;
pub mod sweep;
mod video;

pub use field::Lattice;
pub use video::{benchmark_videos, generate_video, VideoSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{normalize, DescriptorVector};
use crate::error::{Error, Result};
use crate::geo::{project_local, unproject_local, GeoPoint, PlanarPoint};
use crate::index::ReferenceRecord;
use crate::rng::mix_seed;
use crate::voting::{KeypointSet, KeypointSource};

const TAG_FIELD: u64 = 1;
const TAG_LOCATION: u64 = 2;
const TAG_VIEW: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_LANDMARK: u64 = 5;
const TAG_KEYPOINT_NOISE: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    /// Yaws per location, evenly spaced over 360°.
    pub yaws: usize,
    pub pitches: Vec<f32>,
    pub dim: usize,
    /// Correlation length of the smooth fields, in grid cells.
    pub correlation_cells: f64,
    /// Weight of the independent per-location term of `B`.
    pub location_weight: f64,
    pub view_weight: f64,
    /// Standard deviation of per-image noise, relative to a unit-norm signal.
    pub noise: f64,
    pub keypoints: usize,
    pub keypoint_dim: usize,
    pub keypoint_noise: f64,
    /// Location of grid cell (0, 0).
    pub origin: GeoPoint,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            rows: 50,
            cols: 50,
            spacing_m: 15.0,
            yaws: 12,
            pitches: vec![0.0, 30.0],
            dim: 64,
            correlation_cells: 2.0,
            location_weight: 0.6,
            view_weight: 0.5,
            noise: 0.15,
            keypoints: 32,
            keypoint_dim: 16,
            keypoint_noise: 0.25,
            origin: GeoPoint { lat: 40.4406, lon: -79.9959 },
        }
    }
}

impl WorldSpec {
    pub fn grid(rows: usize, cols: usize) -> Self {
        WorldSpec { rows, cols, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rows == 0 || self.cols == 0 {
            return bad("grid needs at least one row and one column");
        }
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return bad("spacing must be positive");
        }
        if self.yaws == 0 || self.pitches.is_empty() {
            return bad("need at least one yaw and one pitch");
        }
        if self.dim < 2 || self.keypoint_dim == 0 || self.keypoints == 0 {
            return bad("dimensions and keypoint count must be positive");
        }
        if !(self.correlation_cells.is_finite() && self.correlation_cells > 0.0) {
            return bad("correlation length must be positive");
        }
        let weights = [self.location_weight, self.view_weight, self.noise, self.keypoint_noise];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("weights and noise levels must be non-negative");
        }
        self.origin.validate()
    }

    pub fn views_per_location(&self) -> usize {
        self.yaws * self.pitches.len()
    }

    pub fn num_locations(&self) -> usize {
        self.rows * self.cols
    }

    pub fn num_records(&self) -> usize {
        self.num_locations() * self.views_per_location()
    }

    pub fn yaw_step(&self) -> f64 {
        360.0 / self.yaws as f64
    }
}

/// Generator state shared by references and videos.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub spec: WorldSpec,
    pub seed: u64,
    pub records: Vec<ReferenceRecord>,
    field: Lattice,
    landmarks: Lattice,
}

/// Reproducibility record written next to a generated store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldManifest {
    pub spec: WorldSpec,
    pub seed: u64,
    pub records: usize,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect::<Vec<f64>>()
}

pub(crate) fn rng_for(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(words))
}

pub(crate) fn unit_descriptor(v: Vec<f64>) -> Result<DescriptorVector> {
    Ok(normalize(&DescriptorVector::new(v)?)?.quantized_f32())
}

impl SyntheticWorld {
    /// Fields only; `records` is left empty.
    pub fn model(spec: WorldSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let field = Lattice::new(
            &[seed, TAG_FIELD],
            spec.rows,
            spec.cols,
            spec.correlation_cells,
            spec.dim,
            1.0 / (spec.dim as f64).sqrt(),
        );
        let landmarks = Lattice::new(
            &[seed, TAG_LANDMARK],
            spec.rows,
            spec.cols,
            spec.correlation_cells,
            spec.keypoints * spec.keypoint_dim,
            1.0,
        );
        Ok(SyntheticWorld { spec, seed, records: Vec::new(), field, landmarks })
    }

    pub fn manifest(&self) -> WorldManifest {
        WorldManifest { spec: self.spec.clone(), seed: self.seed, records: self.records.len() }
    }

    pub fn location_id(&self, row: usize, col: usize) -> u64 {
        (row * self.spec.cols + col) as u64
    }

    /// `(row, col)` of a location.
    pub fn cell(&self, location_id: u64) -> (usize, usize) {
        let id = location_id as usize;
        (id / self.spec.cols, id % self.spec.cols)
    }

    pub fn location_point(&self, location_id: u64) -> GeoPoint {
        let (r, c) = self.cell(location_id);
        let p = PlanarPoint { x: c as f64 * self.spec.spacing_m, y: r as f64 * self.spec.spacing_m };
        unproject_local(self.spec.origin, p).expect("grid stays within valid coordinates")
    }

    /// Continuous `(col, row)` grid coordinates of a point, checked against the grid bounds.
    pub fn grid_coords(&self, p: GeoPoint) -> Result<(f64, f64)> {
        let q = project_local(self.spec.origin, p)?;
        let (x, y) = (q.x / self.spec.spacing_m, q.y / self.spec.spacing_m);
        let tol = 1e-6;
        let (xmax, ymax) = ((self.spec.cols - 1) as f64, (self.spec.rows - 1) as f64);
        if x < -tol || y < -tol || x > xmax + tol || y > ymax + tol {
            return Err(Error::invalid(format!(
                "point ({}, {}) lies outside the synthetic world",
                p.lat, p.lon
            )));
        }
        Ok((x.clamp(0.0, xmax), y.clamp(0.0, ymax)))
    }

    /// Geographic point at continuous grid coordinates.
    pub fn point_at(&self, col: f64, row: f64) -> Result<GeoPoint> {
        let p = PlanarPoint::new(col * self.spec.spacing_m, row * self.spec.spacing_m)?;
        unproject_local(self.spec.origin, p)
    }

    /// Location base vector `B`.
    pub(crate) fn base(&self, location_id: u64) -> Vec<f64> {
        let (r, c) = self.cell(location_id);
        let mut b = vec![0.0; self.spec.dim];
        self.field.eval(c as f64, r as f64, &mut b);
        let mut rng = rng_for(&[self.seed, TAG_LOCATION, location_id]);
        let g = gaussian_vec(&mut rng, self.spec.dim, self.spec.location_weight / (self.spec.dim as f64).sqrt());
        b.iter_mut().zip(g).for_each(|(x, y)| *x += y);
        b
    }

    /// Per-view perturbation `V`, already scaled by `view_weight`.
    pub(crate) fn view(&self, location_id: u64, pitch: usize, yaw: usize) -> Vec<f64> {
        let view = (pitch * self.spec.yaws + yaw) as u64;
        let mut rng = rng_for(&[self.seed, TAG_VIEW, location_id, view]);
        gaussian_vec(&mut rng, self.spec.dim, self.spec.view_weight / (self.spec.dim as f64).sqrt())
    }

    pub(crate) fn noise(&self, words: &[u64], sigma: f64) -> Vec<f64> {
        let mut rng = rng_for(words);
        gaussian_vec(&mut rng, self.spec.dim, sigma / (self.spec.dim as f64).sqrt())
    }

    pub(crate) fn landmarks_at(&self, col: f64, row: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.landmarks.dim()];
        self.landmarks.eval(col, row, &mut out);
        out
    }

    pub(crate) fn keypoints_from(&self, landmarks: &[f64], noise_words: &[u64]) -> KeypointSet {
        let mut rng = rng_for(noise_words);
        landmarks
            .chunks(self.spec.keypoint_dim)
            .map(|lm| {
                lm.iter()
                    .map(|&v| (v + self.spec.keypoint_noise * Distribution::<f64>::sample(&StandardNormal, &mut rng)) as f32)
                    .collect()
            })
            .collect()
    }

    fn location_records(&self, location_id: u64) -> Result<Vec<ReferenceRecord>> {
        let base = self.base(location_id);
        let location = self.location_point(location_id);
        let views = self.spec.views_per_location() as u64;
        let mut out = Vec::with_capacity(views as usize);
        for (p, &pitch) in self.spec.pitches.iter().enumerate() {
            for y in 0..self.spec.yaws {
                let image_id = location_id * views + (p * self.spec.yaws + y) as u64;
                let v = self.view(location_id, p, y);
                let e = self.noise(&[self.seed, TAG_NOISE, image_id], self.spec.noise);
                let d: Vec<f64> = (0..self.spec.dim).map(|i| base[i] + v[i] + e[i]).collect();
                out.push(ReferenceRecord {
                    image_id,
                    location_id,
                    location,
                    yaw: (y as f64 * self.spec.yaw_step()) as f32,
                    pitch,
                    descriptor: unit_descriptor(d)?,
                });
            }
        }
        Ok(out)
    }
}

impl KeypointSource for SyntheticWorld {
    fn keypoints(&self, image_id: u64) -> Option<KeypointSet> {
        let views = self.spec.views_per_location() as u64;
        let location_id = image_id / views;
        if location_id as usize >= self.spec.num_locations() {
            return None;
        }
        let (r, c) = self.cell(location_id);
        let lm = self.landmarks_at(c as f64, r as f64);
        Some(self.keypoints_from(&lm, &[self.seed, TAG_KEYPOINT_NOISE, image_id]))
    }
}

/// Generate every reference record of the world, `location_id` row-major and
/// `image_id = location_id · views + pitch_index · yaws + yaw_index`.
pub fn generate_world(spec: &WorldSpec, seed: u64) -> Result<SyntheticWorld> {
    let mut world = SyntheticWorld::model(spec.clone(), seed)?;
    let per_location: Vec<Vec<ReferenceRecord>> = (0..spec.num_locations() as u64)
        .into_par_iter()
        .map(|l| world.location_records(l))
        .collect::<Result<_>>()?;
    world.records = per_location.into_iter().flatten().collect();
    Ok(world)
}
