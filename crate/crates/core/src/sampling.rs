//! Farthest point sampling and the cloud and image normalizations applied
//! before learning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Point3;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("requested {requested} points from a cloud of {available}")]
    TooFewPoints { requested: usize, available: usize },
    #[error("sample size must be at least 1")]
    ZeroSample,
    #[error("cloud has zero extent")]
    DegenerateCloud,
    #[error("images have zero variance")]
    ZeroVariance,
    #[error("no images")]
    NoImages,
}

/// Greedy farthest point sampling. Starts from the point nearest the
/// centroid, then repeatedly takes the point farthest from the chosen set.
/// Ties go to the lowest index, so the result is independent of thread
/// count. Returns `n` indices in selection order.
pub fn farthest_point_sample(points: &[Point3], n: usize) -> Result<Vec<usize>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroSample);
    }
    if n > points.len() {
        return Err(SamplingError::TooFewPoints {
            requested: n,
            available: points.len(),
        });
    }
    let centroid = points.iter().sum::<Point3>() / points.len() as f64;
    let start = argmax(points.par_iter().map(|p| -(p - centroid).norm_squared()));
    let mut chosen = Vec::with_capacity(n);
    chosen.push(start);
    let mut dist: Vec<f64> = points.par_iter().map(|p| (p - points[start]).norm_squared()).collect();
    while chosen.len() < n {
        let next = argmax(dist.par_iter().copied());
        chosen.push(next);
        let q = points[next];
        dist.par_iter_mut().zip(points.par_iter()).for_each(|(d, p)| {
            *d = d.min((p - q).norm_squared());
        });
    }
    Ok(chosen)
}

/// Index of the largest value, lowest index among equals.
fn argmax(values: impl IndexedParallelIterator<Item = f64>) -> usize {
    values
        .enumerate()
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        )
        .0
}

/// Smallest distance between any two of the given points.
pub fn min_pairwise_distance(points: &[Point3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).norm());
        }
    }
    best
}

/// `p -> (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudTransform {
    pub center: Point3,
    pub scale: f64,
}

impl CloudTransform {
    pub fn identity() -> Self {
        Self {
            center: Point3::zeros(),
            scale: 1.0,
        }
    }

    /// Centers the bounding box of `points` and scales its largest
    /// half-extent to 1.
    pub fn fit<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Result<Self, SamplingError> {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let half = ((hi - lo) * 0.5).max();
        if !(half > 0.0 && half.is_finite()) {
            return Err(SamplingError::DegenerateCloud);
        }
        Ok(Self {
            center: (lo + hi) * 0.5,
            scale: 1.0 / half,
        })
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, p: &Point3) -> Point3 {
        p / self.scale + self.center
    }
}

/// Normalizes one cloud into `[-1, 1]^3` by its own bounding box.
pub fn normalize_cloud(points: &[Point3]) -> Result<(Vec<Point3>, CloudTransform), SamplingError> {
    let t = CloudTransform::fit(points)?;
    Ok((points.iter().map(|p| t.apply(p)).collect(), t))
}

/// One transform fitted to the union of all clouds, for corpus-wide
/// normalization.
pub fn corpus_transform(clouds: &[Vec<Point3>]) -> Result<CloudTransform, SamplingError> {
    CloudTransform::fit(clouds.iter().flatten())
}

/// Scalar mean and standard deviation over every pixel of a set of images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    pub mean: f64,
    pub std: f64,
}

impl ImageStats {
    pub fn fit(images: &[Vec<f32>]) -> Result<Self, SamplingError> {
        let count: usize = images.iter().map(Vec::len).sum();
        if count == 0 {
            return Err(SamplingError::NoImages);
        }
        let mean = images.iter().flatten().map(|&v| v as f64).sum::<f64>() / count as f64;
        let var = images.iter().flatten().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / count as f64;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(SamplingError::ZeroVariance);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, image: &[f32]) -> Vec<f32> {
        image.iter().map(|&v| ((v as f64 - self.mean) / self.std) as f32).collect()
    }
}

/// Zero-mean, unit-variance images using statistics of the whole set. Reuse
/// the returned stats on held-out images.
pub fn normalize_images(images: &[Vec<f32>]) -> Result<(Vec<Vec<f32>>, ImageStats), SamplingError> {
    let stats = ImageStats::fit(images)?;
    Ok((images.iter().map(|i| stats.apply(i)).collect(), stats))
}
