use std::fs::{self, File};
use std::io::BufReader;

use bodydims::bodygen::{generate_body, import_body, BodyParams, Gender};
use bodydims::dataset::{build_dataset, kfold_split, DatasetConfig, DatasetManifest};
use bodydims::measure::{measure_all, Measurement};
use bodydims::mesh::io::{load_mesh, save_mesh};
use bodydims::metrics::{evaluate, MeasurementTable};
use bodydims::sampling::{farthest_point_sample, normalize_cloud};
use bodydims::scanner::{merge_scans, PointCloud, ScannerConfig, StructuredScan};

fn small() -> DatasetConfig {
    let mut cfg = DatasetConfig {
        count: 6,
        seed: 8,
        ..Default::default()
    };
    cfg.scanner.scan_width = 64;
    cfg.scanner.scan_height = 64;
    cfg.scanner.image_size = 40;
    cfg.population.segments = 32;
    cfg
}

#[test]
fn dataset_files_reload_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let m = build_dataset(root, &small(), 1).unwrap();
    let cameras = m.config.scanner.view_cameras(&bodydims::mesh::unit_cube());

    for s in &m.samples {
        // mesh and skeleton reload into the same measurements
        let (body, _) = import_body(&root.join(&s.files.mesh), &root.join(&s.files.skeleton)).unwrap();
        let again = measure_all(&body, &m.config.annotation).unwrap();
        for k in Measurement::ALL {
            assert!((again.get(k) - s.measurements.get(k)).abs() < 1e-9, "{} {k}", s.id);
        }
        // merged cloud equals the union of the stored scans' valid cells
        let scans: Vec<StructuredScan> = s
            .files
            .scans
            .iter()
            .zip(&cameras)
            .map(|(f, c)| StructuredScan::read(File::open(root.join(f)).unwrap(), *c).unwrap())
            .collect();
        let cloud = PointCloud::read_ply(BufReader::new(File::open(root.join(&s.files.cloud)).unwrap())).unwrap();
        assert_eq!(cloud.len(), s.cloud_points);
        let merged = merge_scans(&scans).unwrap();
        for (a, b) in merged.points().iter().zip(cloud.points()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    let truth = MeasurementTable::read_csv(File::open(root.join(&m.measurements)).unwrap()).unwrap();
    let report = evaluate(&truth, &m.measurement_table(), &[1.0], None).unwrap();
    assert!(report.mae.iter().all(|&e| e < 1e-3));
}

#[test]
fn resume_rebuilds_only_missing_and_rejects_new_versions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let m = build_dataset(dir.path(), &cfg, 1).unwrap();
    fs::remove_file(dir.path().join(&m.samples[2].files.gray)).unwrap();
    assert!(m.validate(dir.path()).is_err());
    let again = build_dataset(dir.path(), &cfg, 2).unwrap();
    assert_eq!(again, m);
    again.validate(dir.path()).unwrap();

    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let future = text.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    assert!(DatasetManifest::from_json(&future).is_err());

    let split = kfold_split(&m.ids(), Some(&m.genders()), 3, 0).unwrap();
    split.validate(&m.ids()).unwrap();
}

#[test]
fn mesh_formats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let body = generate_body(&BodyParams::preset(Gender::Male, 9)).unwrap();
    for name in ["b.obj", "b.ply"] {
        let p = dir.path().join(name);
        save_mesh(&body.mesh, &p).unwrap();
        let back = load_mesh(&p).unwrap();
        assert_eq!(back.triangles, body.mesh.triangles);
        assert!(back.is_watertight());
    }
}

#[test]
fn scan_to_network_input() {
    let body = generate_body(&BodyParams::preset(Gender::Female, 6)).unwrap();
    let cfg = ScannerConfig {
        scan_width: 96,
        scan_height: 96,
        ..Default::default()
    };
    let cloud = merge_scans(&cfg.scan_views(&body.mesh, 3).unwrap()).unwrap();
    for n in [512, 1024] {
        let idx = farthest_point_sample(cloud.points(), n).unwrap();
        let mut unique = idx.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), n);
        let (pts, t) = normalize_cloud(cloud.select(&idx).unwrap().points()).unwrap();
        assert!(pts.iter().all(|p| p.amax() <= 1.0 + 1e-12));
        assert!(t.scale > 0.0);
    }
}
