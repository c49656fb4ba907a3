//! Keyframe selection by quantized color-histogram differences.
//!
//! Each RGB channel is quantized into four equal-width bins, giving a
//! 64-bin joint histogram per frame. Scanning left to right, a frame becomes
//! a keyframe when the Manhattan distance between its histogram and that of
//! the last selected keyframe exceeds the threshold. The first frame is
//! always selected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

pub const HISTOGRAM_BINS: usize = 64;

/// Joint RGB histogram with bin index `16·qR + 4·qG + qB`, `q = ⌊v/64⌋`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorHistogram64 {
    pub bins: [u64; HISTOGRAM_BINS],
}

impl ColorHistogram64 {
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    pub fn frequencies(&self) -> [f64; HISTOGRAM_BINS] {
        let total = self.total() as f64;
        let mut out = [0.0; HISTOGRAM_BINS];
        for (o, &b) in out.iter_mut().zip(&self.bins) {
            *o = b as f64 / total;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyframeConfig {
    /// Selection threshold on the Manhattan distance. Frequency-normalized
    /// distances lie in [0, 2].
    pub threshold: f64,
    /// Compare frequency-normalized histograms instead of raw counts.
    pub normalize_hist: bool,
}

impl Default for KeyframeConfig {
    fn default() -> Self {
        KeyframeConfig {
            threshold: 0.3,
            normalize_hist: true,
        }
    }
}

#[inline]
pub fn bin_index(rgb: &[u8]) -> usize {
    16 * (rgb[0] as usize / 64) + 4 * (rgb[1] as usize / 64) + rgb[2] as usize / 64
}

pub fn rgb_histogram(frame: &ImageGrid) -> Result<ColorHistogram64> {
    if frame.channels() != 3 {
        return Err(Error::invalid(format!(
            "color histogram needs 3 channels, frame has {}",
            frame.channels()
        )));
    }
    let mut bins = [0u64; HISTOGRAM_BINS];
    for px in frame.pixels() {
        bins[bin_index(px)] += 1;
    }
    Ok(ColorHistogram64 { bins })
}

/// Manhattan distance, on raw counts or on frequencies.
pub fn manhattan(h1: &ColorHistogram64, h2: &ColorHistogram64, normalized: bool) -> f64 {
    if normalized {
        let (a, b) = (h1.frequencies(), h2.frequencies());
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        h1.bins.iter().zip(&h2.bins).map(|(&x, &y)| x.abs_diff(y) as f64).sum()
    }
}

/// Streaming selector: feed histograms in frame order.
#[derive(Debug, Clone)]
pub struct KeyframeSelector {
    cfg: KeyframeConfig,
    anchor: Option<ColorHistogram64>,
    next_index: usize,
}

impl KeyframeSelector {
    pub fn new(cfg: KeyframeConfig) -> Result<Self> {
        if cfg.threshold.is_nan() || cfg.threshold < 0.0 {
            return Err(Error::invalid(format!("threshold must be >= 0, got {}", cfg.threshold)));
        }
        Ok(KeyframeSelector {
            cfg,
            anchor: None,
            next_index: 0,
        })
    }

    /// Returns `true` when the pushed frame is a keyframe.
    pub fn push(&mut self, hist: ColorHistogram64) -> bool {
        self.next_index += 1;
        let selected = match &self.anchor {
            None => true,
            Some(anchor) => manhattan(&hist, anchor, self.cfg.normalize_hist) > self.cfg.threshold,
        };
        if selected {
            self.anchor = Some(hist);
        }
        selected
    }
}

/// Indices of the selected keyframes, strictly increasing, starting with 0.
pub fn select_keyframes(frames: &[ImageGrid], cfg: &KeyframeConfig) -> Result<Vec<usize>> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to select keyframes from".into()));
    }
    let hists = frames.par_iter().map(rgb_histogram).collect::<Result<Vec<_>>>()?;
    select_from_histograms(hists, cfg)
}

pub fn select_from_histograms(hists: Vec<ColorHistogram64>, cfg: &KeyframeConfig) -> Result<Vec<usize>> {
    if hists.is_empty() {
        return Err(Error::EmptyInput("no frames to select keyframes from".into()));
    }
    let mut sel = KeyframeSelector::new(*cfg)?;
    Ok(hists
        .into_iter()
        .enumerate()
        .filter_map(|(i, h)| sel.push(h).then_some(i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn solid(rgb: [u8; 3]) -> ImageGrid {
        ImageGrid::filled(10, 10, rgb).unwrap()
    }

    #[test]
    fn histogram_fixtures() {
        let h = rgb_histogram(&solid([0, 0, 0])).unwrap();
        assert_eq!(h.bins[0], 100);
        assert_eq!(h.total(), 100);

        let img = ImageGrid::new(2, 1, 3, vec![255, 255, 255, 0, 0, 0]).unwrap();
        let h = rgb_histogram(&img).unwrap();
        assert_eq!((h.bins[63], h.bins[0], h.total()), (1, 1, 2));

        let gray = ImageGrid::new(2, 2, 1, vec![0; 4]).unwrap();
        assert!(matches!(rgb_histogram(&gray), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn histogram_matches_counting_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let data: Vec<u8> = (0..8 * 8 * 3).map(|_| rng.random()).collect();
        let img = ImageGrid::new(8, 8, 3, data.clone()).unwrap();
        let mut oracle = [0u64; 64];
        for px in data.chunks(3) {
            let (r, g, b) = (px[0] >> 6, px[1] >> 6, px[2] >> 6);
            oracle[(r as usize) * 16 + (g as usize) * 4 + b as usize] += 1;
        }
        assert_eq!(rgb_histogram(&img).unwrap().bins, oracle);
    }

    #[test]
    fn manhattan_fixtures() {
        let a = rgb_histogram(&solid([0, 0, 0])).unwrap();
        assert_eq!(manhattan(&a, &a, false), 0.0);
        let mut b = a.clone();
        b.bins[0] -= 1;
        b.bins[5] += 1;
        assert_eq!(manhattan(&a, &b, false), 2.0);
        assert_eq!(manhattan(&a, &b, false), manhattan(&b, &a, false));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x = ColorHistogram64 { bins: [0; 64] };
        let mut y = ColorHistogram64 { bins: [0; 64] };
        for i in 0..64 {
            x.bins[i] = rng.random_range(0..50);
            y.bins[i] = rng.random_range(0..50);
        }
        let oracle: i64 = (0..64).map(|i| (x.bins[i] as i64 - y.bins[i] as i64).abs()).sum();
        assert_eq!(manhattan(&x, &y, false), oracle as f64);
    }

    #[test]
    fn constant_video_has_one_keyframe() {
        let frames = vec![solid([40, 90, 200]); 12];
        let cfg = KeyframeConfig { threshold: 0.01, normalize_hist: true };
        assert_eq!(select_keyframes(&frames, &cfg).unwrap(), vec![0]);
    }

    #[test]
    fn zero_threshold_selects_every_distinct_frame() {
        let frames: Vec<_> = (0..6u8).map(|i| solid([(i % 4) * 64, (i / 4) * 64, 0])).collect();
        let cfg = KeyframeConfig { threshold: 0.0, normalize_hist: false };
        assert_eq!(select_keyframes(&frames, &cfg).unwrap(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn alternating_black_white() {
        let frames: Vec<_> = (0..7).map(|i| solid(if i % 2 == 0 { [0; 3] } else { [255; 3] })).collect();
        let cfg = KeyframeConfig { threshold: 1.0, normalize_hist: true };
        assert_eq!(select_keyframes(&frames, &cfg).unwrap(), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn huge_threshold_selects_only_first() {
        let frames: Vec<_> = (0..5u8).map(|i| solid([i * 60, 255 - i * 60, 0])).collect();
        let cfg = KeyframeConfig { threshold: 200.0, normalize_hist: false };
        assert_eq!(select_keyframes(&frames, &cfg).unwrap(), vec![0]);
    }

    #[test]
    fn empty_and_negative_threshold_rejected() {
        assert!(matches!(select_keyframes(&[], &KeyframeConfig::default()), Err(Error::EmptyInput(_))));
        let cfg = KeyframeConfig { threshold: -1.0, normalize_hist: true };
        assert!(select_keyframes(&[solid([0; 3])], &cfg).is_err());
    }

    #[test]
    fn appending_frames_preserves_prefix() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<_> = (0..30)
            .map(|_| solid([rng.random(), rng.random(), rng.random()]))
            .collect();
        let cfg = KeyframeConfig::default();
        let full = select_keyframes(&frames, &cfg).unwrap();
        for cut in 1..frames.len() {
            let part = select_keyframes(&frames[..cut], &cfg).unwrap();
            let expected: Vec<_> = full.iter().copied().filter(|&i| i < cut).collect();
            assert_eq!(part, expected);
        }
    }
}
