use crate::mesh::{direction_extent, MeshError, TriangleMesh};
use crate::skeleton::{Joint, Skeleton};

use super::BodyFrame;

/// Euclidean distance between two joints, meters.
pub fn joint_distance(skeleton: &Skeleton, a: Joint, b: Joint) -> f64 {
    (skeleton.get(a) - skeleton.get(b)).norm()
}

/// Range of the mesh along the body's lateral axis (fingertip to fingertip
/// in T-pose), meters.
pub fn arm_span(mesh: &TriangleMesh, frame: &BodyFrame) -> Result<f64, MeshError> {
    let (lo, hi) = direction_extent(mesh, &frame.lateral)?;
    Ok(hi - lo)
}
