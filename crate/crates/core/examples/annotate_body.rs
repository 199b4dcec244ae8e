//! Measures a generated body, or an imported one given mesh and skeleton
//! paths, and prints the 16 measurements.
//!
//! `cargo run --example annotate_body -- [mesh.obj skeleton.json]`

use std::path::Path;

use bodydims::bodygen::{generate_body, import_body, BodyParams, Gender};
use bodydims::measure::{detect_axilla, detect_crotch, measure_all, AnnotationConfig, Measurement};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let body = match args.as_slice() {
        [mesh, skeleton] => import_body(Path::new(mesh), Path::new(skeleton)).expect("import").0,
        _ => generate_body(&BodyParams::preset(Gender::Male, 1)).unwrap(),
    };
    let cfg = AnnotationConfig::default();
    let m = measure_all(&body, &cfg).expect("annotation");
    for k in Measurement::ALL {
        println!("{:<22} {:>8.1} mm", k.label(), m.get(k));
    }
    println!("axilla at y = {:.4} m", detect_axilla(&body, &cfg).unwrap());
    println!("crotch at y = {:.4} m", detect_crotch(&body, &cfg).unwrap());
    if let Some(refs) = &body.refs {
        println!("construction: axilla {:.4} m, crotch {:.4} m", refs.axilla_y, refs.crotch_y);
    }
}
