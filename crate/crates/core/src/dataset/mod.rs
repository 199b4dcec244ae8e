//! Dataset assembly: generate, annotate, scan and render bodies into a
//! directory tree described by a JSON manifest.
//!
//! Layout, relative to the dataset root:
//!
//! ```text
//! manifest.json
//! measurements.csv
//! bodies/{gender}/{id}.mesh.ply
//! bodies/{gender}/{id}.skeleton.json
//! bodies/{gender}/{id}.view{k}.scan
//! bodies/{gender}/{id}.cloud.ply
//! bodies/{gender}/{id}.silhouette.pbm
//! bodies/{gender}/{id}.gray.pgm
//! bodies/{gender}/{id}.record.json
//! ```

mod split;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use split::{kfold_split, FoldSplit};

use crate::bodygen::{derive_seed, generate_body, BodyGenError, BodyParams, Gender, PopulationConfig};
use crate::measure::{measure_all, AnnotationConfig, MeasureError, MeasurementSet};
use crate::mesh::io::{write_ply, FormatError};
use crate::metrics::MeasurementTable;
use crate::sampling::{CloudTransform, ImageStats, SamplingError};
use crate::scanner::{merge_scans, render_grayscale, render_silhouette, ImageBuffer, ScanError, ScannerConfig};

pub const MANIFEST_VERSION: u32 = 1;
pub const SPLIT_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";

/// Largest tolerated fraction of failed samples.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Body(#[from] BodyGenError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("unsupported manifest version {0} (expected {MANIFEST_VERSION})")]
    UnsupportedVersion(u32),
    #[error("{failed} of {total} samples failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("{count} samples cannot be split into {k} folds")]
    TooFewSamples { count: usize, k: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("manifest references missing file {0}")]
    MissingFile(PathBuf),
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Everything that determines a dataset's content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count: usize,
    pub seed: u64,
    pub population: PopulationConfig,
    pub annotation: AnnotationConfig,
    pub scanner: ScannerConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            population: PopulationConfig::default(),
            annotation: AnnotationConfig::default(),
            scanner: ScannerConfig::default(),
        }
    }
}

/// Paths of one sample's files, relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub mesh: String,
    pub skeleton: String,
    pub scans: Vec<String>,
    pub cloud: String,
    pub silhouette: String,
    pub gray: String,
}

impl SampleFiles {
    fn for_id(id: &str, gender: Gender, views: usize) -> Self {
        let base = format!("bodies/{gender}/{id}");
        Self {
            mesh: format!("{base}.mesh.ply"),
            skeleton: format!("{base}.skeleton.json"),
            scans: (0..views).map(|k| format!("{base}.view{k}.scan")).collect(),
            cloud: format!("{base}.cloud.ply"),
            silhouette: format!("{base}.silhouette.pbm"),
            gray: format!("{base}.gray.pgm"),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &String> {
        [&self.mesh, &self.skeleton]
            .into_iter()
            .chain(self.scans.iter())
            .chain([&self.cloud, &self.silhouette, &self.gray])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub index: usize,
    pub gender: Gender,
    pub params: BodyParams,
    pub files: SampleFiles,
    pub measurements: MeasurementSet,
    pub cloud_points: usize,
    /// Per-cloud normalization into `[-1, 1]^3`.
    pub cloud_transform: CloudTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub id: String,
    pub error: String,
}

/// Dataset-wide pixel statistics of the gray-scale and binary images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageNormalization {
    pub gray: ImageStats,
    pub silhouette: ImageStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub measurements: String,
    pub image_normalization: Option<ImageNormalization>,
    pub samples: Vec<SampleRecord>,
    pub failures: Vec<FailureRecord>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Parses a manifest, rejecting unknown format versions.
    pub fn from_json(s: &str) -> Result<Self, DatasetError> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(s)?;
        if v.format_version != MANIFEST_VERSION {
            return Err(DatasetError::UnsupportedVersion(v.format_version));
        }
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(root: &Path) -> Result<Self, DatasetError> {
        Self::from_json(&fs::read_to_string(root.join(MANIFEST_FILE))?)
    }

    /// Unique ids and every referenced file present.
    pub fn validate(&self, root: &Path) -> Result<(), DatasetError> {
        let mut seen = std::collections::HashSet::new();
        for s in &self.samples {
            if !seen.insert(&s.id) {
                return Err(DatasetError::DuplicateId(s.id.clone()));
            }
            for f in s.files.all().chain(std::iter::once(&self.measurements)) {
                let p = root.join(f);
                if !p.is_file() {
                    return Err(DatasetError::MissingFile(p));
                }
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    pub fn genders(&self) -> Vec<Gender> {
        self.samples.iter().map(|s| s.gender).collect()
    }

    pub fn measurement_table(&self) -> MeasurementTable {
        MeasurementTable::new(self.ids(), self.samples.iter().map(|s| s.measurements).collect())
    }
}

pub fn sample_id(index: usize) -> String {
    format!("{index:06}")
}

/// Writes `bytes` to `path` unless the file already holds exactly them.
/// Returns whether the file was written.
pub fn write_if_changed(path: &Path, bytes: &[u8]) -> io::Result<bool> {
    if let Ok(existing) = fs::read(path) {
        if existing == bytes {
            return Ok(false);
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(true)
}

/// Per-sample record plus the settings it was produced with, used to skip
/// finished samples on a rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredRecord {
    record: SampleRecord,
    annotation: AnnotationConfig,
    scanner: ScannerConfig,
}

fn record_path(root: &Path, files: &SampleFiles) -> PathBuf {
    root.join(files.mesh.replace(".mesh.ply", ".record.json"))
}

fn resume(root: &Path, params: &BodyParams, index: usize, cfg: &DatasetConfig) -> Option<SampleRecord> {
    let id = sample_id(index);
    let files = SampleFiles::for_id(&id, params.gender, cfg.scanner.view_azimuths_deg.len());
    let stored: StoredRecord = serde_json::from_slice(&fs::read(record_path(root, &files)).ok()?).ok()?;
    let ok = stored.record.params == *params
        && stored.record.files == files
        && stored.annotation == cfg.annotation
        && stored.scanner == cfg.scanner
        && files.all().all(|f| root.join(f).is_file());
    ok.then_some(stored.record)
}

fn encode<F: FnOnce(&mut Vec<u8>) -> io::Result<()>>(f: F) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Runs the full pipeline for one body and writes its files.
pub fn build_sample(root: &Path, index: usize, cfg: &DatasetConfig) -> Result<SampleRecord, DatasetError> {
    let params = cfg.population.params_for(index, cfg.count, cfg.seed);
    if let Some(done) = resume(root, &params, index, cfg) {
        return Ok(done);
    }
    let id = sample_id(index);
    let body = generate_body(&params)?;
    let measurements = measure_all(&body, &cfg.annotation)?;
    let scans = cfg.scanner.scan_views(&body.mesh, derive_seed(params.seed, 1))?;
    let cloud = merge_scans(&scans)?;
    let cloud_transform = CloudTransform::fit(cloud.points())?;
    let cam = cfg.scanner.image_camera(&body.mesh);
    let silhouette = render_silhouette(&body.mesh, &cam);
    let gray = render_grayscale(&body.mesh, &cam);

    let files = SampleFiles::for_id(&id, params.gender, scans.len());
    let put = |rel: &str, bytes: Vec<u8>| write_if_changed(&root.join(rel), &bytes);
    put(&files.mesh, encode(|b| write_ply(&body.mesh.vertices, &body.mesh.triangles, b))?)?;
    put(&files.skeleton, body.skeleton.to_json().into_bytes())?;
    for (scan, rel) in scans.iter().zip(&files.scans) {
        put(rel, encode(|b| scan.write(b))?)?;
    }
    put(&files.cloud, encode(|b| cloud.write_ply(b))?)?;
    put(&files.silhouette, encode(|b| silhouette.write_pbm(b))?)?;
    put(&files.gray, encode(|b| gray.write_pgm(b))?)?;

    let record = SampleRecord {
        id,
        index,
        gender: params.gender,
        params,
        files: files.clone(),
        measurements,
        cloud_points: cloud.len(),
        cloud_transform,
    };
    let stored = StoredRecord {
        record: record.clone(),
        annotation: cfg.annotation,
        scanner: cfg.scanner.clone(),
    };
    write_if_changed(&record_path(root, &files), serde_json::to_string_pretty(&stored)?.as_bytes())?;
    Ok(record)
}

fn image_normalization(root: &Path, samples: &[SampleRecord]) -> Result<Option<ImageNormalization>, DatasetError> {
    if samples.is_empty() {
        return Ok(None);
    }
    let load = |rel: &String, pgm: bool| -> Result<Vec<f32>, DatasetError> {
        let r = io::BufReader::new(fs::File::open(root.join(rel))?);
        let img = if pgm { ImageBuffer::read_pgm(r)? } else { ImageBuffer::read_pbm(r)? };
        Ok(img.as_f32())
    };
    let gray: Vec<Vec<f32>> = samples.iter().map(|s| load(&s.files.gray, true)).collect::<Result<_, _>>()?;
    let sil: Vec<Vec<f32>> = samples.iter().map(|s| load(&s.files.silhouette, false)).collect::<Result<_, _>>()?;
    Ok(Some(ImageNormalization {
        gray: ImageStats::fit(&gray)?,
        silhouette: ImageStats::fit(&sil)?,
    }))
}

/// Builds (or resumes) a dataset of `cfg.count` bodies under `root` using at
/// most `jobs` worker threads. Output does not depend on `jobs`. Samples that
/// fail are logged and left out; more than 1% failures is an error.
pub fn build_dataset(root: &Path, cfg: &DatasetConfig, jobs: usize) -> Result<DatasetManifest, DatasetError> {
    cfg.annotation.validate()?;
    cfg.scanner.validate()?;
    fs::create_dir_all(root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| DatasetError::Pool(e.to_string()))?;
    let results: Vec<Result<SampleRecord, DatasetError>> =
        pool.install(|| (0..cfg.count).into_par_iter().map(|i| build_sample(root, i, cfg)).collect());

    let mut samples = Vec::with_capacity(cfg.count);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => {
                warn!("sample {} skipped: {e}", sample_id(i));
                failures.push(FailureRecord {
                    id: sample_id(i),
                    error: e.to_string(),
                });
            }
        }
    }

    let table = MeasurementTable::new(
        samples.iter().map(|s| s.id.clone()).collect(),
        samples.iter().map(|s| s.measurements).collect(),
    );
    write_if_changed(&root.join(MEASUREMENTS_FILE), &encode(|b| table.write_csv(b))?)?;
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        config: cfg.clone(),
        measurements: MEASUREMENTS_FILE.to_string(),
        image_normalization: image_normalization(root, &samples)?,
        samples,
        failures,
    };
    write_if_changed(&root.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    info!(
        "dataset at {}: {} samples, {} failed",
        root.display(),
        manifest.samples.len(),
        manifest.failures.len()
    );
    let failed = manifest.failures.len();
    if failed as f64 > MAX_FAILURE_FRACTION * cfg.count as f64 {
        return Err(DatasetError::TooManyFailures {
            failed,
            total: cfg.count,
        });
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use std::time::SystemTime;

    use super::*;

    fn small(count: usize) -> DatasetConfig {
        DatasetConfig {
            count,
            seed: 3,
            scanner: ScannerConfig {
                scan_width: 64,
                scan_height: 64,
                image_size: 48,
                ..Default::default()
            },
            population: PopulationConfig {
                segments: 32,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn mtimes(root: &Path) -> Vec<(PathBuf, SystemTime)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let t = fs::metadata(&p).unwrap().modified().unwrap();
                    out.push((p, t));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn build_validate_resume() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(4);
        let m = build_dataset(dir.path(), &cfg, 2).unwrap();
        assert_eq!(m.samples.len(), 4);
        m.validate(dir.path()).unwrap();
        assert_eq!(DatasetManifest::load(dir.path()).unwrap(), m);
        let table = MeasurementTable::read_csv(fs::File::open(dir.path().join(MEASUREMENTS_FILE)).unwrap()).unwrap();
        assert_eq!(table.ids, m.ids());
        assert!(m.samples.iter().any(|s| s.gender == Gender::Female));
        assert!(dir.path().join("bodies/male/000000.mesh.ply").is_file() || dir.path().join("bodies/female/000000.mesh.ply").is_file());

        let before = mtimes(dir.path());
        let again = build_dataset(dir.path(), &cfg, 3).unwrap();
        assert_eq!(again, m);
        assert_eq!(mtimes(dir.path()), before, "rerun rewrote files");
    }

    #[test]
    fn jobs_do_not_change_output() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = small(3);
        let ma = build_dataset(a.path(), &cfg, 1).unwrap();
        let mb = build_dataset(b.path(), &cfg, 4).unwrap();
        assert_eq!(ma, mb);
        for s in &ma.samples {
            for f in s.files.all() {
                assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
            }
        }
    }

    #[test]
    fn manifest_version_checked() {
        let m = DatasetManifest {
            format_version: MANIFEST_VERSION,
            config: DatasetConfig::default(),
            measurements: MEASUREMENTS_FILE.into(),
            image_normalization: None,
            samples: vec![],
            failures: vec![],
        };
        let json = m.to_json();
        assert_eq!(DatasetManifest::from_json(&json).unwrap(), m);
        let bumped = json.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(DatasetManifest::from_json(&bumped), Err(DatasetError::UnsupportedVersion(2))));
    }

    #[test]
    fn write_if_changed_skips_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        assert!(write_if_changed(&p, b"x").unwrap());
        assert!(!write_if_changed(&p, b"x").unwrap());
        assert!(write_if_changed(&p, b"y").unwrap());
    }
}
