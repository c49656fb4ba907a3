//! Seeded k-means used to partition descriptors for approximate search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Training points are subsampled above this many per centroid.
const MAX_POINTS_PER_CENTROID: usize = 64;
const MIN_TRAINING_POINTS: usize = 20_000;

fn sq_dist(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (f64::from(x) - y).powi(2)).sum()
}

fn nearest(point: &[f32], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Train `k` centroids over the rows of `data` (row length `dim`).
/// k-means++ seeding followed by `iterations` Lloyd steps.
pub(crate) fn train(data: &[f32], dim: usize, k: usize, iterations: usize, seed: u64) -> Vec<f32> {
    let n = data.len() / dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let cap = (k * MAX_POINTS_PER_CENTROID).max(MIN_TRAINING_POINTS);
    let sample: Vec<usize> = if n > cap {
        let mut s = rand::seq::index::sample(&mut rng, n, cap).into_vec();
        s.sort_unstable();
        s
    } else {
        (0..n).collect()
    };
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    // k-means++ seeding
    let mut centroids: Vec<f64> = Vec::with_capacity(k * dim);
    let first = sample[rng.random_range(0..sample.len())];
    centroids.extend(row(first).iter().map(|&v| f64::from(v)));
    let mut closest: Vec<f64> = sample.par_iter().map(|&i| sq_dist(row(i), &centroids[..dim])).collect();
    while centroids.len() < k * dim {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = sample.len() - 1;
            for (j, &d) in closest.iter().enumerate() {
                if target < d {
                    chosen = j;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..sample.len())
        };
        let start = centroids.len();
        centroids.extend(row(sample[pick]).iter().map(|&v| f64::from(v)));
        let newest = &centroids[start..];
        closest
            .par_iter_mut()
            .zip(sample.par_iter())
            .for_each(|(c, &i)| *c = c.min(sq_dist(row(i), newest)));
    }

    for _ in 0..iterations {
        let assignment: Vec<usize> = sample
            .par_iter()
            .map(|&i| nearest(row(i), &centroids, dim).0)
            .collect();
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (&i, &c) in sample.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += f64::from(v);
            }
        }
        let mut moved = false;
        for c in 0..k {
            // empty clusters keep their previous centroid
            if counts[c] == 0 {
                continue;
            }
            for j in 0..dim {
                let v = sums[c * dim + j] / counts[c] as f64;
                if v != centroids[c * dim + j] {
                    moved = true;
                }
                centroids[c * dim + j] = v;
            }
        }
        if !moved {
            break;
        }
    }
    centroids.into_iter().map(|v| v as f32).collect()
}

/// Assign each row to its nearest centroid; returns ascending row positions per centroid.
pub(crate) fn assign_lists(data: &[f32], dim: usize, centroids: &[f32]) -> Vec<Vec<u32>> {
    let c64: Vec<f64> = centroids.iter().map(|&v| f64::from(v)).collect();
    let assignment: Vec<usize> = data.par_chunks(dim).map(|p| nearest(p, &c64, dim).0).collect();
    let mut lists = vec![Vec::new(); centroids.len() / dim];
    for (pos, c) in assignment.into_iter().enumerate() {
        lists[c].push(pos as u32);
    }
    lists
}
