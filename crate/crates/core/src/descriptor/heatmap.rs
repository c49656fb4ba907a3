use rayon::prelude::*;

use super::{l2_distance, DescriptorFunction, DescriptorVector, ImageGrid};
use crate::error::{Error, Result};

/// Occlusion saliency grid. Cell `(r, c)` corresponds to a black square of
/// side `cell_size` anchored at pixel `(c·stride, r·stride)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: usize,
    pub stride: usize,
    /// Descriptor distance to the reference for each occluder placement, row-major.
    pub distances: Vec<f64>,
    /// `distances` min-max scaled to [0, 1]; all zero when every distance is equal.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Cell with the largest value, first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best / self.cols, best % self.cols)
    }

    /// Rows of comma-separated values, one line per heatmap row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols).map(|c| format!("{:.9}", self.get(r, c))).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Number of occluder placements along an axis of `extent` pixels.
pub(crate) fn placements(extent: usize, patch: usize, stride: usize) -> usize {
    (extent - patch) / stride + 1
}

/// Slide a black `patch`×`patch` occluder over `query` in steps of `stride`,
/// recording how far each occluded image's descriptor lands from `reference`.
///
/// Higher output values mark regions whose occlusion moves the descriptor
/// furthest from the reference. Placements that would cross the image edge
/// are skipped.
pub fn occlusion_heatmap(
    query: &ImageGrid,
    reference: &DescriptorVector,
    f: &dyn DescriptorFunction,
    patch: usize,
    stride: usize,
) -> Result<Heatmap> {
    if patch == 0 || stride == 0 {
        return Err(Error::invalid("patch and stride must be at least 1"));
    }
    if patch > query.width().min(query.height()) {
        return Err(Error::invalid(format!(
            "patch {patch} exceeds image {}x{}",
            query.width(),
            query.height()
        )));
    }
    let rows = placements(query.height(), patch, stride);
    let cols = placements(query.width(), patch, stride);

    let distances = (0..rows * cols)
        .into_par_iter()
        .map(|cell| {
            let (r, c) = (cell / cols, cell % cols);
            let occluded = query.occluded(c * stride, r * stride, patch);
            l2_distance(&f.describe(&occluded)?, reference)
        })
        .collect::<Result<Vec<f64>>>()?;

    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = if max > min {
        distances.iter().map(|d| (d - min) / (max - min)).collect()
    } else {
        vec![0.0; distances.len()]
    };

    Ok(Heatmap {
        rows,
        cols,
        cell_size: patch,
        stride,
        distances,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mean RGB of the left half of the image.
    fn left_half_mean(img: &ImageGrid) -> Result<DescriptorVector> {
        let half = img.width() / 2;
        let mut sum = [0.0f64; 3];
        for y in 0..img.height() {
            for x in 0..half {
                for (s, &v) in sum.iter_mut().zip(img.pixel(x, y)) {
                    *s += f64::from(v);
                }
            }
        }
        let n = (half * img.height()) as f64;
        DescriptorVector::new(sum.iter().map(|s| s / n).collect())
    }

    fn card() -> ImageGrid {
        ImageGrid::from_fn(8, 8, |x, y| [(x * 30) as u8, (y * 30) as u8, 200]).unwrap()
    }

    #[test]
    fn whole_image_patch_gives_single_zero_cell() {
        let img = card();
        let reference = left_half_mean(&img).unwrap();
        let h = occlusion_heatmap(&img, &reference, &left_half_mean, 8, 3).unwrap();
        assert_eq!((h.rows, h.cols), (1, 1));
        assert_eq!(h.values, vec![0.0]);
    }

    #[test]
    fn right_half_occlusions_have_no_influence() {
        let img = card();
        let reference = left_half_mean(&img).unwrap();
        let h = occlusion_heatmap(&img, &reference, &left_half_mean, 2, 2).unwrap();
        assert_eq!((h.rows, h.cols), (4, 4));
        for r in 0..4 {
            for c in 2..4 {
                assert_eq!(h.get(r, c), 0.0);
                assert_eq!(h.distances[r * 4 + c], 0.0);
            }
        }
        assert!(h.values.contains(&1.0));
    }

    #[test]
    fn argmax_matches_exhaustive_search() {
        let img = ImageGrid::from_fn(8, 8, |x, y| {
            if (2..4).contains(&x) && (4..6).contains(&y) { [250, 250, 250] } else { [10, 20, 30] }
        })
        .unwrap();
        let reference = left_half_mean(&img).unwrap();
        let h = occlusion_heatmap(&img, &reference, &left_half_mean, 2, 1).unwrap();

        let mut best = (0, 0, f64::NEG_INFINITY);
        for top in 0..=6 {
            for left in 0..=6 {
                let d = l2_distance(&left_half_mean(&img.occluded(left, top, 2)).unwrap(), &reference).unwrap();
                if d > best.2 {
                    best = (top, left, d);
                }
            }
        }
        assert_eq!(h.argmax(), (best.0, best.1));
        assert_eq!(h.argmax(), (4, 2));
    }

    #[test]
    fn rejects_bad_geometry() {
        let img = card();
        let reference = left_half_mean(&img).unwrap();
        assert!(occlusion_heatmap(&img, &reference, &left_half_mean, 0, 1).is_err());
        assert!(occlusion_heatmap(&img, &reference, &left_half_mean, 2, 0).is_err());
        assert!(occlusion_heatmap(&img, &reference, &left_half_mean, 9, 1).is_err());
    }

    #[test]
    fn invariant_to_constant_shift() {
        let img = card();
        let reference = left_half_mean(&img).unwrap();
        let h = occlusion_heatmap(&img, &reference, &left_half_mean, 3, 1).unwrap();
        let min = h.distances.iter().copied().fold(f64::INFINITY, f64::min);
        let max = h.distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (d, v) in h.distances.iter().zip(&h.values) {
            let shifted = ((d + 5.0) - (min + 5.0)) / ((max + 5.0) - (min + 5.0));
            assert!((shifted - v).abs() < 1e-9);
        }
    }
}
