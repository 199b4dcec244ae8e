//! Virtual depth scanner and frontal renderer.
//!
//! A [`Camera`] casts one ray per pixel center. [`depth_scan`] records the
//! nearest surface point per pixel in a [`StructuredScan`]; scans from
//! several views are noised along their rays and merged into an unorganized
//! [`PointCloud`]. The same rays drive the binary and gray-scale renders.

mod camera;
mod image;

use std::io::{self, BufRead, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{Camera, Projection, MAX_FOV_DEG, MIN_RESOLUTION};
pub use image::{render_grayscale, render_silhouette, ImageBuffer};

use crate::bodygen::derive_seed;
use crate::mesh::io::{read_ply, write_ply, FormatError};
use crate::mesh::{Bvh, Point3, TriangleMesh};

/// Leading bytes of a structured scan file.
pub const SCAN_MAGIC: &[u8; 8] = b"BDSCAN\x00\x01";
pub const SCAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("scan grid is {found:?}, camera expects {expected:?}")]
    DimensionMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl From<io::Error> for ScanError {
    fn from(e: io::Error) -> Self {
        ScanError::Format(FormatError::Io(e))
    }
}

/// Per-pixel surface points from one camera, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredScan {
    pub camera: Camera,
    pub cells: Vec<Option<Point3>>,
}

impl StructuredScan {
    pub fn width(&self) -> u32 {
        self.camera.width
    }

    pub fn height(&self) -> u32 {
        self.camera.height
    }

    pub fn get(&self, col: u32, row: u32) -> Option<Point3> {
        self.cells[row as usize * self.camera.width as usize + col as usize]
    }

    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Little-endian: magic, u32 width, u32 height, f32 xyz per cell (zeros
    /// where empty), then a validity bitmask with cell `i` in bit `i % 8` of
    /// byte `i / 8`.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(SCAN_MAGIC)?;
        w.write_all(&self.camera.width.to_le_bytes())?;
        w.write_all(&self.camera.height.to_le_bytes())?;
        let mut grid = Vec::with_capacity(self.cells.len() * 12);
        let mut mask = vec![0u8; self.cells.len().div_ceil(8)];
        for (i, cell) in self.cells.iter().enumerate() {
            let p = cell.unwrap_or_else(Point3::zeros);
            for k in 0..3 {
                grid.extend_from_slice(&(p[k] as f32).to_le_bytes());
            }
            if cell.is_some() {
                mask[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&grid)?;
        w.write_all(&mask)
    }

    /// Reads a scan written by [`StructuredScan::write`]. The file does not
    /// store the camera, so the caller supplies it.
    pub fn read<R: Read>(mut r: R, camera: Camera) -> Result<Self, ScanError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SCAN_MAGIC {
            return Err(FormatError::Unsupported("not a structured scan file".into()).into());
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let width = u32::from_le_bytes(word);
        r.read_exact(&mut word)?;
        let height = u32::from_le_bytes(word);
        if (width, height) != (camera.width, camera.height) {
            return Err(ScanError::DimensionMismatch {
                expected: (camera.width, camera.height),
                found: (width, height),
            });
        }
        let n = width as usize * height as usize;
        let mut grid = vec![0u8; n * 12];
        r.read_exact(&mut grid)?;
        let mut mask = vec![0u8; n.div_ceil(8)];
        r.read_exact(&mut mask)?;
        let f = |i: usize| f32::from_le_bytes(grid[i * 4..i * 4 + 4].try_into().unwrap()) as f64;
        let cells = (0..n)
            .map(|i| (mask[i / 8] >> (i % 8) & 1 == 1).then(|| Point3::new(f(3 * i), f(3 * i + 1), f(3 * i + 2))))
            .collect();
        Ok(Self { camera, cells })
    }

    /// The scan as stored on disk: coordinates rounded to `f32`.
    pub fn quantized(&self) -> Self {
        let q = |p: Point3| p.map(|v| v as f32 as f64);
        Self {
            camera: self.camera,
            cells: self.cells.iter().map(|c| c.map(q)).collect(),
        }
    }
}

/// Casts one ray per pixel center and keeps the nearest hit.
pub fn depth_scan(mesh: &TriangleMesh, camera: &Camera) -> Result<StructuredScan, ScanError> {
    camera.validate()?;
    let mut cells = vec![None; camera.pixel_count()];
    if !mesh.triangles.is_empty() {
        let bvh = Bvh::new(mesh);
        let w = camera.width;
        cells.par_iter_mut().enumerate().for_each(|(i, cell)| {
            let (o, d) = camera.ray(i as u32 % w, i as u32 / w);
            *cell = bvh.raycast(&o, &d).map(|h| h.point);
        });
    }
    Ok(StructuredScan { camera: *camera, cells })
}

/// Displaces each valid point by `N(0, sigma^2)` along its pixel ray. Each
/// pixel draws from its own generator seeded from `(seed, pixel index)`.
pub fn add_noise(scan: &StructuredScan, sigma: f64, seed: u64) -> Result<StructuredScan, ScanError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ScanError::InvalidSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(scan.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    let w = scan.camera.width;
    let cells = scan
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            cell.map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                let (_, d) = scan.camera.ray(i as u32 % w, i as u32 / w);
                p + d * normal.sample(&mut rng)
            })
        })
        .collect();
    Ok(StructuredScan {
        camera: scan.camera,
        cells,
    })
}

/// Unorganized, non-empty set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self, ScanError> {
        if points.is_empty() {
            return Err(ScanError::EmptyCloud);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    /// Points at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self, ScanError> {
        Self::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    /// Binary little-endian PLY with double-precision vertices.
    pub fn write_ply<W: Write>(&self, w: W) -> io::Result<()> {
        write_ply(&self.points, &[], w)
    }

    pub fn read_ply<R: BufRead>(r: R) -> Result<Self, ScanError> {
        let (points, _) = read_ply(r)?;
        Self::new(points)
    }
}

/// Valid points of every scan, row-major within a scan, scans in order.
pub fn merge_scans(scans: &[StructuredScan]) -> Result<PointCloud, ScanError> {
    PointCloud::new(scans.iter().flat_map(|s| s.cells.iter().flatten().copied()).collect())
}

/// Viewpoints and image settings for a body. Views circle the vertical axis
/// through the mesh bounding-box center; azimuth 0 looks from +Z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScannerConfig {
    pub view_azimuths_deg: Vec<f64>,
    pub distance: f64,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub scan_width: u32,
    pub scan_height: u32,
    /// Gaussian noise along each ray, meters.
    pub noise_sigma: f64,
    pub image_size: u32,
    /// Half the side of the square orthographic image window, meters.
    pub image_half_extent: f64,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        Self {
            view_azimuths_deg: vec![0.0, 180.0],
            distance: 2.5,
            hfov_deg: 50.0,
            vfov_deg: 50.0,
            scan_width: 256,
            scan_height: 256,
            noise_sigma: 0.002,
            image_size: 200,
            image_half_extent: 1.2,
        }
    }
}

fn view_center(mesh: &TriangleMesh) -> Point3 {
    let (lo, hi) = mesh.bounds();
    (lo + hi) * 0.5
}

impl ScannerConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        if self.view_azimuths_deg.is_empty() {
            return Err(ScanError::InvalidCamera("no views".into()));
        }
        if !(self.distance > 0.0) {
            return Err(ScanError::InvalidCamera(format!("distance {}", self.distance)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(ScanError::InvalidSigma(self.noise_sigma));
        }
        let probe = Point3::zeros();
        self.view_cameras_at(probe)[0].validate()?;
        self.image_camera_at(probe).validate()
    }

    fn view_cameras_at(&self, center: Point3) -> Vec<Camera> {
        self.view_azimuths_deg
            .iter()
            .map(|a| {
                let (s, c) = a.to_radians().sin_cos();
                Camera {
                    position: center + Point3::new(s, 0.0, c) * self.distance,
                    look_at: center,
                    up: Point3::y(),
                    projection: Projection::Perspective {
                        hfov_deg: self.hfov_deg,
                        vfov_deg: self.vfov_deg,
                    },
                    width: self.scan_width,
                    height: self.scan_height,
                }
            })
            .collect()
    }

    fn image_camera_at(&self, center: Point3) -> Camera {
        Camera {
            position: center + Point3::z() * self.distance,
            look_at: center,
            up: Point3::y(),
            projection: Projection::Orthographic {
                half_width: self.image_half_extent,
                half_height: self.image_half_extent,
            },
            width: self.image_size,
            height: self.image_size,
        }
    }

    /// Scan cameras aimed at the mesh bounding-box center.
    pub fn view_cameras(&self, mesh: &TriangleMesh) -> Vec<Camera> {
        self.view_cameras_at(view_center(mesh))
    }

    /// Frontal orthographic camera for the silhouette and gray-scale images.
    pub fn image_camera(&self, mesh: &TriangleMesh) -> Camera {
        self.image_camera_at(view_center(mesh))
    }

    /// Noisy scans from every view. View `k` uses noise seed
    /// `derive_seed(seed, k)`.
    pub fn scan_views(&self, mesh: &TriangleMesh, seed: u64) -> Result<Vec<StructuredScan>, ScanError> {
        self.view_cameras(mesh)
            .iter()
            .enumerate()
            .map(|(k, cam)| add_noise(&depth_scan(mesh, cam)?, self.noise_sigma, derive_seed(seed, k as u64)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cylinder, unit_cube};
    use crate::skeleton::distance_to_mesh;

    fn front(size: u32) -> Camera {
        Camera::new(
            Point3::new(0.0, 0.0, 3.0),
            Point3::zeros(),
            Point3::y(),
            Projection::Perspective {
                hfov_deg: 40.0,
                vfov_deg: 40.0,
            },
            size,
            size,
        )
        .unwrap()
    }

    #[test]
    fn cube_center_pixel_hits_front_face() {
        let scan = depth_scan(&unit_cube(), &front(33)).unwrap();
        let p = scan.get(16, 16).unwrap();
        assert!((p - Point3::new(0.0, 0.0, 0.5)).norm() < 1e-9);
        assert_eq!(scan.get(0, 0), None);
    }

    #[test]
    fn looking_away_sees_nothing() {
        let cam = Camera::new(
            Point3::new(0.0, 0.0, 3.0),
            Point3::new(0.0, 0.0, 6.0),
            Point3::y(),
            Projection::Perspective {
                hfov_deg: 60.0,
                vfov_deg: 60.0,
            },
            32,
            32,
        )
        .unwrap();
        assert_eq!(depth_scan(&unit_cube(), &cam).unwrap().valid_count(), 0);
    }

    #[test]
    fn scan_points_lie_on_surface() {
        let mesh = cylinder(0.3, -0.6, 0.6, 24);
        let scan = depth_scan(&mesh, &front(48)).unwrap();
        assert!(scan.valid_count() > 100);
        for p in scan.cells.iter().flatten() {
            assert!(distance_to_mesh(&mesh, p) < 1e-7);
        }
    }

    #[test]
    fn silhouette_matches_scan_cells() {
        let mesh = cylinder(0.3, -0.6, 0.6, 24);
        let cam = front(40);
        let scan = depth_scan(&mesh, &cam).unwrap();
        assert_eq!(render_silhouette(&mesh, &cam).sum(), scan.valid_count() as u64);
    }

    #[test]
    fn noise_is_along_rays_and_seeded() {
        let mesh = cylinder(0.3, -0.6, 0.6, 24);
        let cam = front(64);
        let scan = depth_scan(&mesh, &cam).unwrap();
        assert_eq!(add_noise(&scan, 0.0, 3).unwrap(), scan);
        let a = add_noise(&scan, 0.002, 3).unwrap();
        assert_eq!(a, add_noise(&scan, 0.002, 3).unwrap());
        assert_ne!(a, add_noise(&scan, 0.002, 4).unwrap());
        for (p, q) in scan.cells.iter().zip(&a.cells) {
            match (p, q) {
                (Some(p), Some(q)) => {
                    let u = (p - cam.position).normalize();
                    let off = q - cam.position;
                    assert!((off - u * off.dot(&u)).norm() < 1e-9);
                }
                (None, None) => {}
                _ => panic!("validity changed"),
            }
        }
        assert!(add_noise(&scan, -1.0, 0).is_err());
    }

    #[test]
    fn noise_std_matches_sigma() {
        // 10k+ valid cells: sample std within 5% of sigma
        let big = unit_cube().scaled(2.0);
        let cam = front(128);
        let scan = depth_scan(&big, &cam).unwrap();
        assert!(scan.valid_count() >= 10_000);
        let noisy = add_noise(&scan, 0.002, 11).unwrap();
        let d: Vec<f64> = scan
            .cells
            .iter()
            .zip(&noisy.cells)
            .filter_map(|(p, q)| Some((q.as_ref()? - cam.position).norm() - (p.as_ref()? - cam.position).norm()))
            .collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.0019..=0.0021).contains(&sd), "{sd}");
    }

    #[test]
    fn merge_counts_and_order() {
        let mesh = unit_cube();
        let a = depth_scan(&mesh, &front(32)).unwrap();
        let away = Camera {
            look_at: Point3::new(0.0, 0.0, 6.0),
            ..front(32)
        };
        let empty = depth_scan(&mesh, &away).unwrap();
        let merged = merge_scans(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(merged.len(), 2 * a.valid_count());
        let only = merge_scans(&[empty.clone(), a.clone()]).unwrap();
        assert_eq!(only.points(), merge_scans(&[a]).unwrap().points());
        assert!(matches!(merge_scans(&[empty]), Err(ScanError::EmptyCloud)));
    }

    #[test]
    fn scan_file_round_trip() {
        let cam = front(20);
        let scan = add_noise(&depth_scan(&unit_cube(), &cam).unwrap(), 0.01, 1).unwrap();
        let mut buf = Vec::new();
        scan.write(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 400 * 12 + 50);
        let back = StructuredScan::read(&buf[..], cam).unwrap();
        assert_eq!(back, scan.quantized());
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(again, buf);
        assert!(matches!(
            StructuredScan::read(&buf[..], front(21)),
            Err(ScanError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn origin_point_kept_by_mask() {
        let cam = front(16);
        let mut cells = vec![None; 256];
        cells[5] = Some(Point3::zeros());
        let scan = StructuredScan { camera: cam, cells };
        let mut buf = Vec::new();
        scan.write(&mut buf).unwrap();
        let back = StructuredScan::read(&buf[..], cam).unwrap();
        assert_eq!(back.valid_count(), 1);
        assert_eq!(back.get(5, 0), Some(Point3::zeros()));
    }

    #[test]
    fn cloud_ply_is_exact() {
        let cloud = PointCloud::new(vec![Point3::new(0.1, 1.0 / 3.0, -2.5e-7), Point3::new(1.0, 2.0, 3.0)]).unwrap();
        let mut buf = Vec::new();
        cloud.write_ply(&mut buf).unwrap();
        assert_eq!(PointCloud::read_ply(&buf[..]).unwrap(), cloud);
        assert!(PointCloud::new(vec![]).is_err());
    }

    #[test]
    fn default_views_frame_a_body() {
        let body = crate::bodygen::generate_body(&crate::bodygen::BodyParams::preset(crate::bodygen::Gender::Male, 1)).unwrap();
        let cfg = ScannerConfig::default();
        cfg.validate().unwrap();
        let scans = cfg.scan_views(&body.mesh, 9).unwrap();
        assert_eq!(scans.len(), 2);
        let cloud = merge_scans(&scans).unwrap();
        assert!(cloud.len() > 5000);
        let img = render_silhouette(&body.mesh, &cfg.image_camera(&body.mesh));
        // body fully inside the window: border pixels are background
        for i in 0..200 {
            assert_eq!(img.get(i, 0) + img.get(i, 199) + img.get(0, i) + img.get(199, i), 0);
        }
        assert_eq!(scans, cfg.scan_views(&body.mesh, 9).unwrap());
    }
}
