//! Farthest point sampling of a scanned cloud to 1024 and 512 points, then
//! normalization into the unit cube, compared with random subsets.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bodydims::bodygen::{generate_body, BodyParams, Gender};
use bodydims::mesh::Point3;
use bodydims::sampling::{farthest_point_sample, min_pairwise_distance, normalize_cloud};
use bodydims::scanner::{merge_scans, ScannerConfig};

fn main() {
    let body = generate_body(&BodyParams::preset(Gender::Male, 5)).unwrap();
    let scans = ScannerConfig::default().scan_views(&body.mesh, 1).unwrap();
    let cloud = merge_scans(&scans).unwrap();
    println!("scanned {} points", cloud.len());

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in [1024, 512] {
        let idx = farthest_point_sample(cloud.points(), n).unwrap();
        let picked: Vec<Point3> = idx.iter().map(|&i| cloud.points()[i]).collect();
        let random: Vec<Point3> = sample(&mut rng, cloud.len(), n).iter().map(|i| cloud.points()[i]).collect();
        let (normalized, t) = normalize_cloud(&picked).unwrap();
        let extent = normalized.iter().fold(0.0f64, |m, p| m.max(p.amax()));
        println!(
            "{n} points: min spacing fps {:.2} mm, random {:.2} mm; scale {:.3}, max |coord| {extent:.3}",
            1e3 * min_pairwise_distance(&picked),
            1e3 * min_pairwise_distance(&random),
            t.scale
        );
    }
}
