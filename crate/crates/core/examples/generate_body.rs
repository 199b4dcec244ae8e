//! Generates one procedural body and writes its mesh (OBJ) and skeleton
//! (JSON).
//!
//! `cargo run --example generate_body -- [female|male] [seed] [out_dir]`

use std::path::PathBuf;

use bodydims::bodygen::{generate_body, BodyParams, Gender};
use bodydims::mesh::io::save_mesh;

fn main() {
    let mut args = std::env::args().skip(1);
    let gender: Gender = args.next().as_deref().unwrap_or("female").parse().expect("gender");
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));
    let out = args.next().map_or_else(|| std::env::temp_dir().join("bodydims-body"), PathBuf::from);

    let body = generate_body(&BodyParams::preset(gender, seed)).expect("valid preset");
    std::fs::create_dir_all(&out).unwrap();
    save_mesh(&body.mesh, &out.join("body.obj")).unwrap();
    std::fs::write(out.join("body.json"), body.skeleton.to_json()).unwrap();

    println!(
        "{gender} body: {} vertices, {} triangles, stature {:.3} m, watertight {}",
        body.mesh.vertices.len(),
        body.mesh.triangles.len(),
        body.stature(),
        body.mesh.is_watertight()
    );
    println!("wrote {}/body.obj and body.json", out.display());
}
