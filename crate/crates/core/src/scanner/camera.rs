use serde::{Deserialize, Serialize};

use crate::mesh::Point3;

use super::ScanError;

pub const MIN_RESOLUTION: u32 = 16;
pub const MAX_FOV_DEG: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Projection {
    /// Pinhole camera with full horizontal and vertical field of view in degrees.
    Perspective { hfov_deg: f64, vfov_deg: f64 },
    /// Parallel rays over a `2 * half_width` by `2 * half_height` window (meters).
    Orthographic { half_width: f64, half_height: f64 },
}

/// A camera producing one ray per pixel through the pixel center. Row 0 is
/// the top of the image, column 0 its left edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Point3,
    pub look_at: Point3,
    pub up: Point3,
    pub projection: Projection,
    pub width: u32,
    pub height: u32,
}

/// Orthonormal camera basis: `forward` points into the scene.
#[derive(Debug, Clone, Copy)]
struct Basis {
    forward: Point3,
    right: Point3,
    up: Point3,
}

impl Camera {
    pub fn new(
        position: Point3,
        look_at: Point3,
        up: Point3,
        projection: Projection,
        width: u32,
        height: u32,
    ) -> Result<Self, ScanError> {
        let cam = Self {
            position,
            look_at,
            up,
            projection,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |m: String| Err(ScanError::InvalidCamera(m));
        if self.width < MIN_RESOLUTION || self.height < MIN_RESOLUTION {
            return bad(format!(
                "resolution {}x{} below {MIN_RESOLUTION}x{MIN_RESOLUTION}",
                self.width, self.height
            ));
        }
        match self.projection {
            Projection::Perspective { hfov_deg, vfov_deg } => {
                for fov in [hfov_deg, vfov_deg] {
                    if !(fov > 0.0 && fov < MAX_FOV_DEG) {
                        return bad(format!("field of view {fov} outside (0, {MAX_FOV_DEG})"));
                    }
                }
            }
            Projection::Orthographic { half_width, half_height } => {
                if !(half_width > 0.0 && half_height > 0.0 && half_width.is_finite() && half_height.is_finite()) {
                    return bad(format!("orthographic window {half_width}x{half_height}"));
                }
            }
        }
        let f = self.look_at - self.position;
        if !(f.norm() > 0.0) {
            return bad("look-at coincides with position".into());
        }
        if f.cross(&self.up).norm() <= 1e-12 * f.norm() * self.up.norm() {
            return bad("up vector parallel to view direction".into());
        }
        Ok(())
    }

    fn basis(&self) -> Basis {
        let forward = (self.look_at - self.position).normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        Basis { forward, right, up }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Image-plane coordinates of a pixel center in `[-1, 1]`, x to the
    /// right and y upward.
    pub fn pixel_center(&self, col: u32, row: u32) -> (f64, f64) {
        let x = 2.0 * (col as f64 + 0.5) / self.width as f64 - 1.0;
        let y = 1.0 - 2.0 * (row as f64 + 0.5) / self.height as f64;
        (x, y)
    }

    /// Ray for normalized image-plane coordinates: `(origin, unit direction)`.
    pub fn ray_at(&self, x: f64, y: f64) -> (Point3, Point3) {
        let b = self.basis();
        match self.projection {
            Projection::Perspective { hfov_deg, vfov_deg } => {
                let tx = (hfov_deg.to_radians() / 2.0).tan();
                let ty = (vfov_deg.to_radians() / 2.0).tan();
                let d = b.forward + b.right * (x * tx) + b.up * (y * ty);
                (self.position, d.normalize())
            }
            Projection::Orthographic { half_width, half_height } => {
                let o = self.position + b.right * (x * half_width) + b.up * (y * half_height);
                (o, b.forward)
            }
        }
    }

    /// Ray through the center of pixel `(col, row)`.
    pub fn ray(&self, col: u32, row: u32) -> (Point3, Point3) {
        let (x, y) = self.pixel_center(col, row);
        self.ray_at(x, y)
    }

    /// Same view at twice the resolution in both directions.
    pub fn doubled(&self) -> Self {
        Self {
            width: self.width * 2,
            height: self.height * 2,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn front(w: u32, h: u32) -> Camera {
        Camera::new(
            Point3::new(0.0, 0.0, 3.0),
            Point3::zeros(),
            Point3::y(),
            Projection::Perspective {
                hfov_deg: 40.0,
                vfov_deg: 30.0,
            },
            w,
            h,
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_cameras() {
        let p = Projection::Perspective {
            hfov_deg: 40.0,
            vfov_deg: 40.0,
        };
        assert!(Camera::new(Point3::z(), Point3::zeros(), Point3::y(), p, 15, 64).is_err());
        assert!(Camera::new(Point3::z(), Point3::z(), Point3::y(), p, 64, 64).is_err());
        assert!(Camera::new(Point3::z(), Point3::zeros(), Point3::z(), p, 64, 64).is_err());
        for fov in [0.0, 120.0, -5.0, f64::NAN] {
            let p = Projection::Perspective {
                hfov_deg: fov,
                vfov_deg: 40.0,
            };
            assert!(Camera::new(Point3::z(), Point3::zeros(), Point3::y(), p, 64, 64).is_err());
        }
    }

    #[test]
    fn center_and_corner_rays() {
        let cam = front(17, 17);
        let (o, d) = cam.ray(8, 8);
        assert_eq!(o, cam.position);
        assert!((d - -Point3::z()).norm() < 1e-12);
        // top-left pixel looks up and to the left
        let (_, d) = cam.ray(0, 0);
        assert!(d.x < 0.0 && d.y > 0.0);
    }

    #[test]
    fn doubled_resolution_splits_each_pixel() {
        // a pixel's center is the midpoint of the centers of the 2x2 pixels
        // covering it at double resolution
        let cam = front(20, 16);
        let fine = cam.doubled();
        for (col, row) in [(0, 0), (7, 3), (19, 15)] {
            let (x, y) = cam.pixel_center(col, row);
            let (x0, y0) = fine.pixel_center(2 * col, 2 * row);
            let (x1, y1) = fine.pixel_center(2 * col + 1, 2 * row + 1);
            assert!((x - 0.5 * (x0 + x1)).abs() < 1e-15);
            assert!((y - 0.5 * (y0 + y1)).abs() < 1e-15);
        }
    }

    #[test]
    fn orthographic_rays_are_parallel() {
        let cam = Camera::new(
            Point3::new(0.0, 1.0, 5.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::y(),
            Projection::Orthographic {
                half_width: 1.2,
                half_height: 1.2,
            },
            200,
            200,
        )
        .unwrap();
        let (o0, d0) = cam.ray(0, 0);
        let (o1, d1) = cam.ray(199, 199);
        assert_eq!(d0, d1);
        assert!((o0.x - (-1.2 + 1.2 / 200.0)).abs() < 1e-12);
        assert!((o1.y - (1.0 - 1.2 + 1.2 / 200.0)).abs() < 1e-12);
    }
}
