//! Closed tube and ellipsoid builders used to assemble bodies.

use std::f64::consts::PI;

use crate::mesh::{Point3, TriangleMesh};

/// Direction a tube runs in. Rings must be added in increasing order along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TubeAxis {
    X,
    Y,
}

impl TubeAxis {
    /// Right-handed ring basis `(u, v)` with `u × v` equal to the axis.
    fn basis(self) -> (Point3, Point3) {
        match self {
            TubeAxis::Y => (Point3::z(), Point3::x()),
            TubeAxis::X => (Point3::y(), Point3::z()),
        }
    }

    fn direction(self) -> Point3 {
        match self {
            TubeAxis::X => Point3::x(),
            TubeAxis::Y => Point3::y(),
        }
    }
}

/// Ring angle `k` of `segments`, exact at quarter turns when `segments % 4 == 0`.
pub fn ring_angle(k: usize, segments: usize) -> f64 {
    2.0 * PI * k as f64 / segments as f64
}

/// Accumulates rings of equal vertex count and closes them into a watertight
/// tube with flat (or apex) end caps.
#[derive(Debug, Clone)]
pub struct TubeBuilder {
    segments: usize,
    rings: Vec<Vec<Point3>>,
    centers: Vec<Point3>,
}

impl TubeBuilder {
    pub fn new(segments: usize) -> Self {
        assert!(segments >= 3, "a ring needs at least 3 vertices");
        Self {
            segments,
            rings: Vec::new(),
            centers: Vec::new(),
        }
    }

    pub fn ring(&mut self, center: Point3, points: Vec<Point3>) -> &mut Self {
        assert_eq!(points.len(), self.segments);
        self.rings.push(points);
        self.centers.push(center);
        self
    }

    /// Circular ring of the given radius around `center`.
    pub fn ring_circle(&mut self, center: Point3, radius: f64, axis: TubeAxis) -> &mut Self {
        self.ring_superellipse(center, radius, radius, 2.0, axis)
    }

    /// Superellipse ring `|s/su|^p + |t/tv|^p = 1` in the axis' `(u, v)` basis.
    pub fn ring_superellipse(
        &mut self,
        center: Point3,
        half_u: f64,
        half_v: f64,
        exponent: f64,
        axis: TubeAxis,
    ) -> &mut Self {
        let (u, v) = axis.basis();
        let e = 2.0 / exponent;
        let points = (0..self.segments)
            .map(|k| {
                let a = ring_angle(k, self.segments);
                let (s, c) = a.sin_cos();
                let cu = c.signum() * c.abs().powf(e);
                let sv = s.signum() * s.abs().powf(e);
                center + u * (half_u * cu) + v * (half_v * sv)
            })
            .collect();
        self.ring(center, points)
    }

    /// Closes the tube with flat fans around the first and last ring centers.
    pub fn finish(self) -> TriangleMesh {
        let first = self.centers[0];
        let last = *self.centers.last().expect("at least one ring");
        self.finish_with_apexes(first, last)
    }

    /// Closes the tube with fans to the given apex points.
    pub fn finish_with_apexes(self, bottom: Point3, top: Point3) -> TriangleMesh {
        assert!(self.rings.len() >= 2, "a tube needs at least 2 rings");
        let n = self.segments as u32;
        let mut vertices: Vec<Point3> = self.rings.into_iter().flatten().collect();
        let ring_count = vertices.len() as u32 / n;
        let mut triangles = Vec::with_capacity((ring_count as usize + 1) * 2 * n as usize);
        for r in 0..ring_count - 1 {
            let lo = r * n;
            let hi = (r + 1) * n;
            for k in 0..n {
                let k1 = (k + 1) % n;
                triangles.push([lo + k, lo + k1, hi + k1]);
                triangles.push([lo + k, hi + k1, hi + k]);
            }
        }
        let b = vertices.len() as u32;
        vertices.push(bottom);
        let t = vertices.len() as u32;
        vertices.push(top);
        let last = (ring_count - 1) * n;
        for k in 0..n {
            let k1 = (k + 1) % n;
            triangles.push([b, k1, k]);
            triangles.push([t, last + k, last + k1]);
        }
        TriangleMesh {
            vertices,
            triangles,
            normals: None,
        }
    }
}

/// UV ellipsoid with poles on Y; `stacks` latitude bands.
pub fn ellipsoid(center: Point3, semi_axes: [f64; 3], segments: usize, stacks: usize) -> TriangleMesh {
    let [a, b, c] = semi_axes;
    let mut tube = TubeBuilder::new(segments);
    for i in 1..stacks {
        // from the bottom pole upward
        let phi = PI * i as f64 / stacks as f64;
        let y = -b * phi.cos();
        let s = phi.sin();
        let ring_center = center + Point3::new(0.0, y, 0.0);
        tube.ring_superellipse(ring_center, c * s, a * s, 2.0, TubeAxis::Y);
    }
    tube.finish_with_apexes(center - Point3::new(0.0, b, 0.0), center + Point3::new(0.0, b, 0.0))
}

/// Tube along an axis from `(position, radius)` stations given in increasing
/// order; the ring centers sit on the line through `origin` along the axis.
pub fn circular_tube(origin: Point3, axis: TubeAxis, stations: &[(f64, f64)], segments: usize) -> TriangleMesh {
    let dir = axis.direction();
    let mut tube = TubeBuilder::new(segments);
    for &(s, r) in stations {
        tube.ring_circle(origin + dir * s, r, axis);
    }
    tube.finish()
}
