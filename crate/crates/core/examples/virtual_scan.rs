//! Scans a body from the front and back, merges the views into one cloud and
//! renders the silhouette and gray-scale images.
//!
//! `cargo run --example virtual_scan -- [out_dir]`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use bodydims::bodygen::{generate_body, BodyParams, Gender};
use bodydims::scanner::{merge_scans, render_grayscale, render_silhouette, ScannerConfig};

fn main() {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("bodydims-scan"), PathBuf::from);
    std::fs::create_dir_all(&out).unwrap();

    let body = generate_body(&BodyParams::preset(Gender::Female, 3)).unwrap();
    let cfg = ScannerConfig::default();
    let scans = cfg.scan_views(&body.mesh, 42).unwrap();
    for (k, s) in scans.iter().enumerate() {
        println!("view {k}: {} of {} pixels hit", s.valid_count(), s.cells.len());
        s.write(BufWriter::new(File::create(out.join(format!("view{k}.scan"))).unwrap())).unwrap();
    }
    let cloud = merge_scans(&scans).unwrap();
    cloud.write_ply(BufWriter::new(File::create(out.join("cloud.ply")).unwrap())).unwrap();
    println!("merged cloud: {} points", cloud.len());

    let cam = cfg.image_camera(&body.mesh);
    let sil = render_silhouette(&body.mesh, &cam);
    let gray = render_grayscale(&body.mesh, &cam);
    sil.write_pbm(File::create(out.join("silhouette.pbm")).unwrap()).unwrap();
    gray.write_pgm(File::create(out.join("gray.pgm")).unwrap()).unwrap();
    println!("{}x{} images, {} body pixels, written to {}", sil.width, sil.height, sil.sum(), out.display());
}
