//! Slices a 256-sided cylinder and compares the tape-measure girth with the
//! inscribed polygon and the true circle.

use std::f64::consts::PI;

use bodydims::measure::{scan_girth, AnnotationConfig, Extremum};
use bodydims::mesh::{cylinder, slice_mesh, HorizontalSlicer, Plane, Point3};

fn main() {
    let (r, n) = (0.1, 256);
    let mesh = cylinder(r, 0.0, 1.0, n);

    let loops = slice_mesh(&mesh, &Plane::horizontal(0.5)).expect("slice");
    println!("loops at y = 0.5: {}", loops.len());
    println!("loop perimeter:  {:.6} m", loops[0].perimeter());
    println!("hull perimeter:  {:.6} m", loops[0].hull_perimeter().unwrap());

    let slicer = HorizontalSlicer::new(&mesh);
    let axis = (Point3::zeros(), Point3::y());
    let (y, girth) = scan_girth(&slicer, (0.4, 0.6), axis, Extremum::Min, &AnnotationConfig::default(), "waist").unwrap();
    let polygon = 2.0 * n as f64 * r * (PI / n as f64).sin();
    println!("scanned minimum: {girth:.6} m at y = {y:.4}");
    println!("polygon {polygon:.6} m, circle {:.6} m", 2.0 * PI * r);
}
