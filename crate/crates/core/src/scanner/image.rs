use std::io::{self, BufRead, Write};

use rayon::prelude::*;

use crate::mesh::io::FormatError;
use crate::mesh::{Bvh, Point3, TriangleMesh};

use super::Camera;

/// Single-channel 8-bit image, row-major with row 0 at the top. Binary
/// images hold 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize],
        }
    }

    pub fn get(&self, col: u32, row: u32) -> u8 {
        self.pixels[row as usize * self.width as usize + col as usize]
    }

    pub fn sum(&self) -> u64 {
        self.pixels.iter().map(|&p| p as u64).sum()
    }

    pub fn as_f32(&self) -> Vec<f32> {
        self.pixels.iter().map(|&p| p as f32).collect()
    }

    /// Binary PGM (P5), maxval 255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    /// Binary PBM (P4). Nonzero pixels are written as 1 bits.
    pub fn write_pbm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P4\n{} {}\n", self.width, self.height)?;
        let stride = (self.width as usize).div_ceil(8);
        let mut row = vec![0u8; stride];
        for r in 0..self.height as usize {
            row.fill(0);
            for c in 0..self.width as usize {
                if self.pixels[r * self.width as usize + c] != 0 {
                    row[c / 8] |= 0x80 >> (c % 8);
                }
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Self, FormatError> {
        let (width, height, maxval) = read_header(&mut r, "P5", true)?;
        if maxval != 255 {
            return Err(FormatError::Unsupported(format!("PGM maxval {maxval}")));
        }
        let mut pixels = vec![0u8; width as usize * height as usize];
        r.read_exact(&mut pixels)?;
        Ok(Self { width, height, pixels })
    }

    pub fn read_pbm<R: BufRead>(mut r: R) -> Result<Self, FormatError> {
        let (width, height, _) = read_header(&mut r, "P4", false)?;
        let stride = (width as usize).div_ceil(8);
        let mut row = vec![0u8; stride];
        let mut img = Self::new(width, height);
        for rr in 0..height as usize {
            r.read_exact(&mut row)?;
            for c in 0..width as usize {
                img.pixels[rr * width as usize + c] = (row[c / 8] >> (7 - c % 8)) & 1;
            }
        }
        Ok(img)
    }
}

/// Reads whitespace-separated header tokens (skipping `#` comments) and the
/// single whitespace byte that ends the header.
fn read_header<R: BufRead>(r: &mut R, magic: &str, with_max: bool) -> Result<(u32, u32, u32), FormatError> {
    let wanted = if with_max { 4 } else { 3 };
    let mut tokens: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut byte = [0u8; 1];
    let mut comment = false;
    while tokens.len() < wanted {
        r.read_exact(&mut byte)?;
        let ch = byte[0] as char;
        if comment {
            comment = ch != '\n';
            continue;
        }
        if ch == '#' {
            comment = true;
        } else if ch.is_ascii_whitespace() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(ch);
        }
    }
    let err = |m: String| FormatError::Parse { line: 1, message: m };
    if tokens[0] != magic {
        return Err(FormatError::Unsupported(format!("expected {magic}, found {}", tokens[0])));
    }
    let num = |s: &str| s.parse::<u32>().map_err(|e| err(format!("{s}: {e}")));
    let width = num(&tokens[1])?;
    let height = num(&tokens[2])?;
    let maxval = if with_max { num(&tokens[3])? } else { 1 };
    Ok((width, height, maxval))
}

/// Pixel is 1 where the pixel-center ray hits the mesh.
pub fn render_silhouette(mesh: &TriangleMesh, camera: &Camera) -> ImageBuffer {
    let mut img = ImageBuffer::new(camera.width, camera.height);
    if mesh.triangles.is_empty() {
        return img;
    }
    let bvh = Bvh::new(mesh);
    let w = camera.width;
    img.pixels.par_iter_mut().enumerate().for_each(|(i, px)| {
        let (o, d) = camera.ray(i as u32 % w, i as u32 / w);
        *px = bvh.raycast(&o, &d).is_some() as u8;
    });
    img
}

/// Lambertian shading under a light at the camera: `255 * max(0, -n . d)`
/// with `n` the interpolated vertex normal at the hit. Background is 0.
pub fn render_grayscale(mesh: &TriangleMesh, camera: &Camera) -> ImageBuffer {
    let mut img = ImageBuffer::new(camera.width, camera.height);
    if mesh.triangles.is_empty() {
        return img;
    }
    let normals = match &mesh.normals {
        Some(n) => n.clone(),
        None => mesh.compute_vertex_normals(),
    };
    let bvh = Bvh::new(mesh);
    let w = camera.width;
    img.pixels.par_iter_mut().enumerate().for_each(|(i, px)| {
        let (o, d) = camera.ray(i as u32 % w, i as u32 / w);
        if let Some(hit) = bvh.raycast(&o, &d) {
            let n = interpolated_normal(mesh, &normals, hit.triangle, &hit.point);
            let lambert = (-n.dot(&d)).max(0.0);
            *px = (255.0 * lambert).round().clamp(0.0, 255.0) as u8;
        }
    });
    img
}

fn interpolated_normal(mesh: &TriangleMesh, normals: &[Point3], t: usize, p: &Point3) -> Point3 {
    let [a, b, c] = mesh.triangle_points(t);
    let tri = mesh.triangles[t];
    let n = (b - a).cross(&(c - a));
    let area2 = n.norm_squared();
    let wa = (b - p).cross(&(c - p)).dot(&n) / area2;
    let wb = (c - p).cross(&(a - p)).dot(&n) / area2;
    let wc = 1.0 - wa - wb;
    let s = normals[tri[0] as usize] * wa + normals[tri[1] as usize] * wb + normals[tri[2] as usize] * wc;
    let len = s.norm();
    if len > 0.0 {
        s / len
    } else {
        n / area2.sqrt()
    }
}
