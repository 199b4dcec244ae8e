//! Triangle meshes and the geometric primitives the annotation pipeline is
//! built on: plane slicing, convex hull perimeters, ray casting and extents.
//!
//! All coordinates are meters. The body frame convention is the T-pose frame:
//! Y up, Z toward the camera, the body's left arm along +X.

mod hull;
pub mod io;
mod ray;
mod slice;

use std::collections::HashMap;

use nalgebra::{Rotation3, Vector3};
use thiserror::Error;

pub use hull::{convex_hull_2d, convex_hull_perimeter, loop_perimeter, polygon_perimeter_2d};
pub use ray::{raycast, Bvh, RayHit};
pub use slice::{slice_mesh, HorizontalSlicer};

pub type Point3 = Vector3<f64>;

/// Area below which a triangle counts as degenerate (m²).
pub const DEGENERATE_AREA: f64 = 1e-18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        count: usize,
    },
    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),
    #[error("mesh is empty")]
    Empty,
    #[error("edge ({0}, {1}) is shared by {2} triangles, expected 2")]
    NonManifoldEdge(u32, u32, usize),
    #[error("plane normal is not unit length (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("cross-section is degenerate: {0}")]
    DegenerateSection(&'static str),
    #[error("cross-section vertex {index} is {distance:e} m off its plane")]
    OffPlane { index: usize, distance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Point3 {
        let mut v = Point3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

/// Indexed triangle surface.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Point3>>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range indices and zero-area triangles.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            triangles,
            normals: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= count {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index,
                        count,
                    });
                }
            }
            if self.triangle_area(t) <= DEGENERATE_AREA {
                return Err(MeshError::DegenerateTriangle(t));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty() || self.vertices.is_empty()
    }

    pub fn triangle_points(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit face normal following the counter-clockwise winding.
    pub fn face_normal(&self, t: usize) -> Point3 {
        let [a, b, c] = self.triangle_points(t);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Undirected edge → number of incident triangles.
    pub fn edge_valence(&self) -> HashMap<(u32, u32), usize> {
        let mut map = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for tri in &self.triangles {
            for k in 0..3 {
                *map.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        map
    }

    /// First edge that is not shared by exactly two triangles.
    pub fn first_open_edge(&self) -> Option<((u32, u32), usize)> {
        let mut bad: Vec<_> = self
            .edge_valence()
            .into_iter()
            .filter(|&(_, n)| n != 2)
            .collect();
        bad.sort_unstable();
        bad.into_iter().next()
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.is_empty() && self.first_open_edge().is_none()
    }

    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Area-weighted vertex normals.
    pub fn compute_vertex_normals(&self) -> Vec<Point3> {
        let mut acc = vec![Point3::zeros(); self.vertices.len()];
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            for &i in tri {
                acc[i as usize] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    n
                }
            })
            .collect()
    }

    /// Appends another mesh as a separate component.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
        self.normals = None;
    }

    pub fn translated(&self, offset: &Point3) -> Self {
        self.map_points(|p| p + offset, |n| n)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_points(|p| p * factor, |n| n)
    }

    pub fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        self.map_points(|p| rotation * p, |n| rotation * n)
    }

    fn map_points(&self, f: impl Fn(Point3) -> Point3, g: impl Fn(Point3) -> Point3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
            triangles: self.triangles.clone(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|&n| g(n)).collect()),
        }
    }
}

pub(crate) fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Exact min/max vertex coordinate along an axis.
pub fn axis_extent(mesh: &TriangleMesh, axis: Axis) -> Result<(f64, f64), MeshError> {
    if mesh.vertices.is_empty() {
        return Err(MeshError::Empty);
    }
    let i = axis.index();
    Ok(mesh
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v[i]), hi.max(v[i]))
        }))
}

/// Min/max of vertex projections onto an arbitrary unit direction.
pub fn direction_extent(mesh: &TriangleMesh, direction: &Point3) -> Result<(f64, f64), MeshError> {
    if mesh.vertices.is_empty() {
        return Err(MeshError::Empty);
    }
    Ok(mesh
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let s = v.dot(direction);
            (lo.min(s), hi.max(s))
        }))
}

/// Oriented plane `normal · p = offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Point3,
    offset: f64,
}

impl Plane {
    pub fn new(normal: Point3, offset: f64) -> Result<Self, MeshError> {
        let len = normal.norm();
        if (len - 1.0).abs() > 1e-9 {
            return Err(MeshError::NonUnitNormal(len));
        }
        Ok(Self { normal, offset })
    }

    /// Plane through `point`; the normal is normalized first.
    pub fn through(point: &Point3, normal: &Point3) -> Self {
        let normal = normal.normalize();
        Self {
            normal,
            offset: normal.dot(point),
        }
    }

    pub fn horizontal(y: f64) -> Self {
        Self {
            normal: Point3::y(),
            offset: y,
        }
    }

    pub fn normal(&self) -> &Point3 {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Orthonormal in-plane basis `(u, v)` with `u × v = normal`.
    pub fn basis(&self) -> (Point3, Point3) {
        let n = self.normal;
        let helper = if n.x.abs() < 0.9 { Point3::x() } else { Point3::y() };
        let u = (helper - n * n.dot(&helper)).normalize();
        let v = n.cross(&u);
        (u, v)
    }

    pub fn project_2d(&self, p: &Point3) -> [f64; 2] {
        let (u, v) = self.basis();
        [p.dot(&u), p.dot(&v)]
    }
}

/// Closed planar polyline produced by slicing; the last vertex connects back
/// to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    points: Vec<Point3>,
    plane: Plane,
}

impl CrossSection {
    pub const PLANE_TOLERANCE: f64 = 1e-7;

    pub fn new(points: Vec<Point3>, plane: Plane) -> Result<Self, MeshError> {
        if points.len() < 3 {
            return Err(MeshError::DegenerateSection("fewer than 3 vertices"));
        }
        for (index, p) in points.iter().enumerate() {
            let distance = plane.signed_distance(p).abs();
            if distance > Self::PLANE_TOLERANCE {
                return Err(MeshError::OffPlane { index, distance });
            }
        }
        Ok(Self { points, plane })
    }

    pub(crate) fn new_unchecked(points: Vec<Point3>, plane: Plane) -> Self {
        Self { points, plane }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        self.points.iter().sum::<Point3>() / self.points.len() as f64
    }

    pub fn perimeter(&self) -> f64 {
        loop_perimeter(self)
    }

    pub fn hull_perimeter(&self) -> Result<f64, MeshError> {
        convex_hull_perimeter(self)
    }

    /// Points expressed in the plane's 2D basis.
    pub fn projected(&self) -> Vec<[f64; 2]> {
        let (u, v) = self.plane.basis();
        self.points.iter().map(|p| [p.dot(&u), p.dot(&v)]).collect()
    }
}

/// Axis-aligned unit cube centered at the origin, outward-facing triangles.
pub fn unit_cube() -> TriangleMesh {
    box_mesh(Point3::repeat(-0.5), Point3::repeat(0.5))
}

pub fn box_mesh(lo: Point3, hi: Point3) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 4, 6],
        [0, 6, 2], // -x
        [1, 3, 7],
        [1, 7, 5], // +x
        [0, 1, 5],
        [0, 5, 4], // -y
        [2, 6, 7],
        [2, 7, 3], // +y
        [0, 2, 3],
        [0, 3, 1], // -z
        [4, 5, 7],
        [4, 7, 6], // +z
    ];
    TriangleMesh {
        vertices,
        triangles,
        normals: None,
    }
}

/// Closed polygonal cylinder along Y with flat capped ends.
pub fn cylinder(radius: f64, y0: f64, y1: f64, segments: usize) -> TriangleMesh {
    let mut b = crate::bodygen::TubeBuilder::new(segments);
    b.ring_circle(Point3::new(0.0, y0, 0.0), radius, crate::bodygen::TubeAxis::Y);
    b.ring_circle(Point3::new(0.0, y1, 0.0), radius, crate::bodygen::TubeAxis::Y);
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_is_watertight() {
        let cube = unit_cube();
        assert!(cube.is_watertight());
        cube.validate().unwrap();
    }

    #[test]
    fn cube_normals_point_outward() {
        let cube = unit_cube();
        for t in 0..cube.triangles.len() {
            let [a, b, c] = cube.triangle_points(t);
            let centroid = (a + b + c) / 3.0;
            assert!(cube.face_normal(t).dot(&centroid) > 0.0, "triangle {t}");
        }
    }

    #[test]
    fn extents() {
        let cube = unit_cube();
        assert_eq!(axis_extent(&cube, Axis::X).unwrap(), (-0.5, 0.5));

        let tri = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 2.0, 0.0),
                Point3::new(3.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(axis_extent(&tri, Axis::Y).unwrap(), (0.0, 2.0));

        let t = 0.37;
        let (lo, hi) = axis_extent(&cube.translated(&Point3::new(t, 0.0, 0.0)), Axis::X).unwrap();
        assert_eq!((lo, hi), (-0.5 + t, 0.5 + t));
    }

    #[test]
    fn empty_mesh_has_no_extent() {
        assert_eq!(
            axis_extent(&TriangleMesh::default(), Axis::X),
            Err(MeshError::Empty)
        );
    }

    #[test]
    fn rejects_bad_indices_and_degenerate_triangles() {
        let v = vec![Point3::zeros(), Point3::x(), Point3::y()];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(MeshError::IndexOutOfRange { index: 3, .. })
        ));
        let collinear = vec![Point3::zeros(), Point3::x(), Point3::x() * 2.0];
        assert_eq!(
            TriangleMesh::new(collinear, vec![[0, 1, 2]]),
            Err(MeshError::DegenerateTriangle(0))
        );
    }

    #[test]
    fn open_mesh_detected() {
        let mut cube = unit_cube();
        cube.triangles.pop();
        assert!(!cube.is_watertight());
    }

    #[test]
    fn plane_requires_unit_normal() {
        assert!(Plane::new(Point3::new(0.0, 2.0, 0.0), 0.0).is_err());
        let p = Plane::new(Point3::y(), 0.3).unwrap();
        let (u, v) = p.basis();
        assert!((u.cross(&v) - Point3::y()).norm() < 1e-12);
    }

    #[test]
    fn cross_section_checks_planarity() {
        let plane = Plane::horizontal(0.0);
        let pts = vec![Point3::zeros(), Point3::x(), Point3::new(0.0, 1e-3, 1.0)];
        assert!(matches!(
            CrossSection::new(pts, plane),
            Err(MeshError::OffPlane { index: 2, .. })
        ));
        assert!(CrossSection::new(vec![Point3::zeros(), Point3::x()], plane).is_err());
    }
}
