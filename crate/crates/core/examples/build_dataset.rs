//! Builds a small dataset (rerunning resumes) and a gender-stratified 5-fold
//! split.
//!
//! `cargo run --release --example build_dataset -- [count] [out_dir] [jobs]`

use std::path::PathBuf;

use bodydims::dataset::{build_dataset, kfold_split, DatasetConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let count = args.next().map_or(20, |s| s.parse().expect("count"));
    let out = args.next().map_or_else(|| std::env::temp_dir().join("bodydims-dataset"), PathBuf::from);
    let jobs = args.next().map_or(4, |s| s.parse().expect("jobs"));

    let cfg = DatasetConfig {
        count,
        seed: 1,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let manifest = build_dataset(&out, &cfg, jobs).expect("dataset");
    println!(
        "{} samples ({} failed) in {:.1?} at {}",
        manifest.samples.len(),
        manifest.failures.len(),
        start.elapsed(),
        out.display()
    );
    if let Some(n) = manifest.image_normalization {
        println!("gray pixels: mean {:.2}, std {:.2}", n.gray.mean, n.gray.std);
    }

    let ids = manifest.ids();
    let split = kfold_split(&ids, Some(&manifest.genders()), 5, cfg.seed).expect("split");
    split.validate(&ids).unwrap();
    for (f, fold) in split.folds.iter().enumerate() {
        println!("fold {f}: {} test, {} train", fold.len(), split.train(f).len());
    }
    std::fs::write(out.join("split.json"), split.to_json()).unwrap();
}
