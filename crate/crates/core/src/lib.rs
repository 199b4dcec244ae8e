//! Synthetic human body dimensions: procedural T-pose bodies, skeleton-guided
//! anthropometric annotation, virtual scanning and rendering, point sampling,
//! dataset assembly and evaluation metrics.

pub mod bodygen;
pub mod dataset;
pub mod measure;
pub mod mesh;
pub mod metrics;
pub mod sampling;
pub mod scanner;
pub mod skeleton;

/// Schema versions of every file the crate writes.
pub const FORMAT_VERSIONS: &[(&str, u32)] = &[
    ("manifest", dataset::MANIFEST_VERSION),
    ("scan", scanner::SCAN_FORMAT_VERSION),
    ("split", dataset::SPLIT_FORMAT_VERSION),
    ("measurements-csv", metrics::CSV_FORMAT_VERSION),
];
