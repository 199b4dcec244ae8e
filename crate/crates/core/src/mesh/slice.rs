use std::collections::HashMap;

use super::{edge_key, CrossSection, MeshError, Plane, Point3, TriangleMesh};

/// Distance assigned to vertices lying exactly on the cutting plane, so that
/// tangent planes resolve deterministically to the positive side.
const ON_PLANE_NUDGE: f64 = 1e-9;

/// Intersects a mesh with a plane and stitches the pieces into closed loops.
///
/// Loops come back sorted by centroid (x, then y, then z). Every intersected
/// edge must be shared by exactly two triangles; otherwise the loop cannot be
/// closed and [`MeshError::NonManifoldEdge`] is returned.
pub fn slice_mesh(mesh: &TriangleMesh, plane: &Plane) -> Result<Vec<CrossSection>, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::Empty);
    }
    let n = plane.normal().norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(MeshError::NonUnitNormal(n));
    }
    slice_triangles(mesh, plane, 0..mesh.triangles.len())
}

fn signed(plane: &Plane, p: &Point3) -> f64 {
    let d = plane.signed_distance(p);
    if d == 0.0 {
        ON_PLANE_NUDGE
    } else {
        d
    }
}

fn slice_triangles(
    mesh: &TriangleMesh,
    plane: &Plane,
    candidates: impl IntoIterator<Item = usize>,
) -> Result<Vec<CrossSection>, MeshError> {
    // crossed edge -> the (up to two) other crossed edges it is linked to
    let mut links: HashMap<(u32, u32), Vec<(u32, u32)>> = HashMap::new();
    for t in candidates {
        let tri = mesh.triangles[t];
        let d = tri.map(|i| signed(plane, &mesh.vertices[i as usize]));
        let mut crossed = [(0u32, 0u32); 2];
        let mut count = 0;
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            if (d[a] > 0.0) != (d[b] > 0.0) {
                if count < 2 {
                    crossed[count] = edge_key(tri[a], tri[b]);
                }
                count += 1;
            }
        }
        if count == 2 {
            links.entry(crossed[0]).or_default().push(crossed[1]);
            links.entry(crossed[1]).or_default().push(crossed[0]);
        }
    }
    if links.is_empty() {
        return Ok(Vec::new());
    }

    let mut keys: Vec<_> = links.keys().copied().collect();
    keys.sort_unstable();
    for key in &keys {
        let valence = links[key].len();
        if valence != 2 {
            return Err(MeshError::NonManifoldEdge(key.0, key.1, valence));
        }
    }

    let crossing = |(a, b): (u32, u32)| -> Point3 {
        let pa = mesh.vertices[a as usize];
        let pb = mesh.vertices[b as usize];
        let da = signed(plane, &pa);
        let db = signed(plane, &pb);
        pa + (pb - pa) * (da / (da - db))
    };

    let mut visited: HashMap<(u32, u32), bool> = keys.iter().map(|&k| (k, false)).collect();
    let mut loops = Vec::new();
    for &start in &keys {
        if visited[&start] {
            continue;
        }
        let mut points = Vec::new();
        let mut prev = start;
        let mut current = start;
        loop {
            visited.insert(current, true);
            points.push(crossing(current));
            let next = links[&current]
                .iter()
                .copied()
                .find(|&e| e != prev && !visited[&e])
                .or_else(|| links[&current].iter().copied().find(|&e| !visited[&e]));
            match next {
                Some(e) => {
                    prev = current;
                    current = e;
                }
                None => break,
            }
        }
        if points.len() >= 3 {
            loops.push(CrossSection::new_unchecked(points, *plane));
        }
    }

    loops.sort_by(|a, b| {
        let (ca, cb) = (a.centroid(), b.centroid());
        ca.x.total_cmp(&cb.x)
            .then(ca.y.total_cmp(&cb.y))
            .then(ca.z.total_cmp(&cb.z))
    });
    Ok(loops)
}

/// Repeated horizontal slicing of one mesh, with triangles bucketed by height
/// so each query only touches the triangles spanning that level.
#[derive(Debug, Clone)]
pub struct HorizontalSlicer<'a> {
    mesh: &'a TriangleMesh,
    y_min: f64,
    bin_height: f64,
    bins: Vec<Vec<u32>>,
}

impl<'a> HorizontalSlicer<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let (lo, hi) = mesh.bounds();
        let count = (mesh.triangles.len() / 32).clamp(1, 4096);
        let span = (hi.y - lo.y).max(1e-12);
        let bin_height = span / count as f64;
        let mut bins = vec![Vec::new(); count];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let ys = tri.map(|i| mesh.vertices[i as usize].y);
            let a = ys[0].min(ys[1]).min(ys[2]);
            let b = ys[0].max(ys[1]).max(ys[2]);
            let first = Self::bin_of(lo.y, bin_height, count, a);
            let last = Self::bin_of(lo.y, bin_height, count, b);
            for bin in &mut bins[first..=last] {
                bin.push(t as u32);
            }
        }
        Self {
            mesh,
            y_min: lo.y,
            bin_height,
            bins,
        }
    }

    fn bin_of(y_min: f64, h: f64, count: usize, y: f64) -> usize {
        (((y - y_min) / h).floor().max(0.0) as usize).min(count - 1)
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    /// Same result as `slice_mesh(mesh, &Plane::horizontal(y))`.
    pub fn slice(&self, y: f64) -> Result<Vec<CrossSection>, MeshError> {
        if self.mesh.is_empty() {
            return Err(MeshError::Empty);
        }
        let plane = Plane::horizontal(y);
        let bin = Self::bin_of(self.y_min, self.bin_height, self.bins.len(), y);
        slice_triangles(
            self.mesh,
            &plane,
            self.bins[bin].iter().map(|&t| t as usize),
        )
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use nalgebra::Rotation3;

    use super::*;
    use crate::mesh::{cylinder, unit_cube};

    #[test]
    fn cube_square_section() {
        let loops = slice_mesh(&unit_cube(), &Plane::horizontal(0.0)).unwrap();
        assert_eq!(loops.len(), 1);
        assert!((loops[0].perimeter() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn miss_is_empty() {
        let loops = slice_mesh(&unit_cube(), &Plane::horizontal(10.0)).unwrap();
        assert!(loops.is_empty());
    }

    #[test]
    fn cylinder_inscribed_polygon() {
        // 2 n r sin(pi / n) for the inscribed 64-gon
        let expected = 2.0 * 64.0 * 0.1 * (PI / 64.0).sin();
        assert!((expected - 0.62807).abs() < 1e-5);
        let mesh = cylinder(0.1, -0.5, 0.5, 64);
        let loops = slice_mesh(&mesh, &Plane::horizontal(0.0)).unwrap();
        assert_eq!(loops.len(), 1);
        assert!((loops[0].perimeter() - expected).abs() / expected < 1e-9);
    }

    #[test]
    fn tangent_plane_through_vertices_is_deterministic() {
        // cube top face vertices lie on y = 0.5; nudged to the positive side
        let cube = unit_cube();
        let a = slice_mesh(&cube, &Plane::horizontal(0.5)).unwrap();
        let b = slice_mesh(&cube, &Plane::horizontal(0.5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
        assert!((a[0].perimeter() - 4.0).abs() < 1e-6);
        // bottom face vertices count as above the plane: nothing is crossed
        assert!(slice_mesh(&cube, &Plane::horizontal(-0.5)).unwrap().is_empty());
    }

    #[test]
    fn open_mesh_reports_non_manifold_edge() {
        let mut cube = unit_cube();
        // drop one side triangle that the y = 0 plane crosses
        cube.triangles.remove(0);
        let err = slice_mesh(&cube, &Plane::horizontal(0.0)).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge(_, _, 1)));
    }

    #[test]
    fn loops_sorted_by_centroid() {
        let mut mesh = cylinder(0.1, 0.0, 1.0, 16).translated(&Point3::new(1.0, 0.0, 0.0));
        mesh.append(&cylinder(0.1, 0.0, 1.0, 16).translated(&Point3::new(-1.0, 0.0, 0.0)));
        let loops = slice_mesh(&mesh, &Plane::horizontal(0.5)).unwrap();
        assert_eq!(loops.len(), 2);
        assert!(loops[0].centroid().x < loops[1].centroid().x);
    }

    #[test]
    fn horizontal_slicer_matches_full_slice() {
        let mut mesh = cylinder(0.1, 0.0, 1.0, 32);
        mesh.append(&unit_cube().translated(&Point3::new(2.0, 0.3, 0.0)));
        let slicer = HorizontalSlicer::new(&mesh);
        for k in 0..40 {
            let y = -0.3 + k as f64 * 0.037;
            assert_eq!(
                slicer.slice(y).unwrap(),
                slice_mesh(&mesh, &Plane::horizontal(y)).unwrap(),
                "y = {y}"
            );
        }
    }

    #[test]
    fn loops_are_closed_and_planar() {
        let mesh = cylinder(0.2, -1.0, 1.0, 48)
            .rotated(&Rotation3::from_euler_angles(0.3, 0.2, 0.1));
        let plane = Plane::through(&Point3::new(0.0, 0.1, 0.0), &Point3::new(0.1, 1.0, 0.2));
        let loops = slice_mesh(&mesh, &plane).unwrap();
        assert_eq!(loops.len(), 1);
        for p in loops[0].points() {
            assert!(plane.signed_distance(p).abs() < CrossSection::PLANE_TOLERANCE);
        }
        CrossSection::new(loops[0].points().to_vec(), plane).unwrap();
    }
}
