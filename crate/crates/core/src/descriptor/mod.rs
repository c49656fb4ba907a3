//! Global image descriptors.
//!
//! A [`DescriptorVector`] is a fixed-length real vector, typically unit-L2
//! normalized so that Euclidean and dot-product retrieval agree. Where it
//! comes from is abstracted by [`DescriptorFunction`]: precomputed network
//! outputs, or the synthetic histogram descriptor in [`crate::synth`].

mod heatmap;
pub mod store;

pub use heatmap::{occlusion_heatmap, Heatmap};
pub use crate::image::ImageGrid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the L2 norm of a vector that claims to be normalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DescriptorVector(Vec<f64>);

impl DescriptorVector {
    /// Rejects empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("descriptor must have at least one dimension"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("descriptor component {i} is not finite")));
        }
        Ok(DescriptorVector(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn dot(&self, other: &DescriptorVector) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    /// Round every component to the nearest `f32`. Storage is single
    /// precision, so this makes a vector identical to what a store file holds.
    pub fn quantized_f32(&self) -> DescriptorVector {
        DescriptorVector(self.0.iter().map(|&v| f64::from(v as f32)).collect())
    }
}

fn check_dims(a: &DescriptorVector, b: &DescriptorVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "descriptor dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Euclidean distance between two descriptors of equal dimension.
pub fn l2_distance(a: &DescriptorVector, b: &DescriptorVector) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Scale to unit L2 norm.
pub fn normalize(v: &DescriptorVector) -> Result<DescriptorVector> {
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::Degenerate("cannot normalize a zero vector".into()));
    }
    Ok(DescriptorVector(v.0.iter().map(|x| x / n).collect()))
}

/// Maps an image to a global descriptor. Implementations must be deterministic.
pub trait DescriptorFunction: Sync {
    fn describe(&self, image: &ImageGrid) -> Result<DescriptorVector>;
}

impl<F> DescriptorFunction for F
where
    F: Fn(&ImageGrid) -> Result<DescriptorVector> + Sync,
{
    fn describe(&self, image: &ImageGrid) -> Result<DescriptorVector> {
        self(image)
    }
}
