//! Descriptor distance as an image is rotated or shrunk.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::descriptor::{l2_distance, normalize, DescriptorFunction, DescriptorVector};
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::keyframes::{bin_index, HISTOGRAM_BINS};

/// Color histograms of the left, right, top and bottom halves of an image,
/// concatenated and L2-normalized. Sensitive to where colors sit, so it is
/// not rotation invariant.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalvesHistogram;

impl HalvesHistogram {
    pub const DIM: usize = 4 * HISTOGRAM_BINS;
}

impl DescriptorFunction for HalvesHistogram {
    fn describe(&self, image: &ImageGrid) -> Result<DescriptorVector> {
        if image.channels() != 3 {
            return Err(Error::invalid("halves histogram needs an RGB image"));
        }
        let (w, h) = (image.width(), image.height());
        let mut v = vec![0.0; Self::DIM];
        let mut counts = [0usize; 4];
        for y in 0..h {
            for x in 0..w {
                let b = bin_index(image.pixel(x, y));
                let regions = [2 * x < w, 2 * x >= w, 2 * y < h, 2 * y >= h];
                for (r, inside) in regions.into_iter().enumerate() {
                    if inside {
                        v[r * HISTOGRAM_BINS + b] += 1.0;
                        counts[r] += 1;
                    }
                }
            }
        }
        for (r, n) in counts.iter().enumerate() {
            if *n > 0 {
                v[r * HISTOGRAM_BINS..(r + 1) * HISTOGRAM_BINS].iter_mut().for_each(|x| *x /= *n as f64);
            }
        }
        normalize(&DescriptorVector::new(v)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Angles `0, step, 2·step, ..., 360` degrees.
    Rotation { step_deg: f64 },
    /// Factors `1.0, 1.0 − step, ...` down to `step`.
    Scale { step: f64 },
}

impl Transform {
    pub fn rotation() -> Self {
        Transform::Rotation { step_deg: 10.0 }
    }

    pub fn scale() -> Self {
        Transform::Scale { step: 0.1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Transform::Rotation { .. } => "rotation",
            Transform::Scale { .. } => "scale",
        }
    }

    pub fn parameters(&self) -> Result<Vec<f64>> {
        match *self {
            Transform::Rotation { step_deg } if step_deg > 0.0 && step_deg <= 360.0 => {
                let n = (360.0 / step_deg + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| i as f64 * step_deg).collect())
            }
            Transform::Scale { step } if step > 0.0 && step <= 1.0 => {
                let n = (1.0 / step + 1e-9).floor() as usize;
                Ok((0..n).map(|i| 1.0 - i as f64 * step).filter(|f| *f > 1e-9).collect())
            }
            _ => Err(Error::Config(format!("invalid {} step", self.name()))),
        }
    }

    pub fn apply(&self, image: &ImageGrid, param: f64) -> Result<ImageGrid> {
        match self {
            Transform::Rotation { .. } => Ok(image.rotated(param)),
            Transform::Scale { .. } => image.scaled_down(param),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(Transform::rotation()),
            "scale" => Ok(Transform::scale()),
            other => Err(Error::Config(format!("unknown transform {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub distance: f64,
}

/// Distance between the descriptor of `image` and of each transformed copy.
pub fn invariance_sweep(f: &dyn DescriptorFunction, image: &ImageGrid, transform: Transform) -> Result<Vec<SweepPoint>> {
    let reference = f.describe(image)?;
    transform
        .parameters()?
        .into_iter()
        .map(|p| {
            let d = l2_distance(&reference, &f.describe(&transform.apply(image, p)?)?)?;
            Ok(SweepPoint { parameter: p, distance: d })
        })
        .collect()
}

pub fn sweep_csv(transform: Transform, points: &[SweepPoint]) -> String {
    let mut out = String::from("transform,parameter,distance\n");
    for p in points {
        let _ = writeln!(out, "{},{},{:.9}", transform.name(), p.parameter, p.distance);
    }
    out
}

/// A square card split into a red left half and a blue right half, with a
/// yellow block in the top-left corner.
pub fn test_card(size: usize) -> Result<ImageGrid> {
    ImageGrid::from_fn(size, size, |x, y| {
        if x < size / 4 && y < size / 4 {
            [230, 210, 20]
        } else if x < size / 2 {
            [200, 30, 30]
        } else {
            [30, 40, 200]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_transforms_have_zero_distance() {
        let card = test_card(32).unwrap();
        let rot = invariance_sweep(&HalvesHistogram, &card, Transform::rotation()).unwrap();
        assert_eq!(rot.len(), 37);
        assert_eq!(rot[0], SweepPoint { parameter: 0.0, distance: 0.0 });
        let sc = invariance_sweep(&HalvesHistogram, &card, Transform::scale()).unwrap();
        assert_eq!(sc.len(), 10);
        assert_eq!(sc[0], SweepPoint { parameter: 1.0, distance: 0.0 });
        assert!((sc[9].parameter - 0.1).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_of_two_color_card() {
        // left red / right blue becomes top / bottom after a quarter turn
        let card = ImageGrid::from_fn(8, 8, |x, _| if x < 4 { [255, 0, 0] } else { [0, 0, 255] }).unwrap();
        let red = bin_index(&[255, 0, 0]);
        let blue = bin_index(&[0, 0, 255]);
        // halves of the original: left all red, right all blue, top and bottom half/half
        let mut before = vec![0.0; HalvesHistogram::DIM];
        before[red] = 1.0;
        before[HISTOGRAM_BINS + blue] = 1.0;
        for r in 2..4 {
            before[r * HISTOGRAM_BINS + red] = 0.5;
            before[r * HISTOGRAM_BINS + blue] = 0.5;
        }
        let n = (2.0 + 4.0 * 0.25f64).sqrt();
        let got = HalvesHistogram.describe(&card).unwrap();
        for (g, b) in got.as_slice().iter().zip(&before) {
            assert!((g - b / n).abs() < 1e-12);
        }
        let pts = invariance_sweep(&HalvesHistogram, &card, Transform::rotation()).unwrap();
        let at90 = pts.iter().find(|p| p.parameter == 90.0).unwrap();
        assert!(at90.distance > 0.0);
        // by hand: a quarter turn swaps the roles of the vertical and horizontal halves
        let mut after = vec![0.0; HalvesHistogram::DIM];
        for r in 0..2 {
            after[r * HISTOGRAM_BINS + red] = 0.5;
            after[r * HISTOGRAM_BINS + blue] = 0.5;
        }
        let rotated = HalvesHistogram.describe(&card.rotated(90.0)).unwrap();
        let top_red = rotated.as_slice()[2 * HISTOGRAM_BINS + red] > 0.0;
        let (t, b) = if top_red { (red, blue) } else { (blue, red) };
        after[2 * HISTOGRAM_BINS + t] = 1.0;
        after[3 * HISTOGRAM_BINS + b] = 1.0;
        let expect: f64 = got.as_slice().iter().zip(&after).map(|(g, a)| (g - a / n).powi(2)).sum::<f64>().sqrt();
        assert!((at90.distance - expect).abs() < 1e-12, "{} {expect}", at90.distance);
    }

    #[test]
    fn bad_steps_and_names() {
        assert!(Transform::Rotation { step_deg: 0.0 }.parameters().is_err());
        assert!(Transform::Scale { step: 1.5 }.parameters().is_err());
        assert_eq!("scale".parse::<Transform>().unwrap(), Transform::scale());
        assert!("shear".parse::<Transform>().is_err());
        let csv = sweep_csv(Transform::scale(), &[SweepPoint { parameter: 1.0, distance: 0.0 }]);
        assert_eq!(csv, "transform,parameter,distance\nscale,1,0.000000000\n");
    }
}
