use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use log::warn;
use serde::de::DeserializeOwned;

use bodydims::bodygen::import_body;
use bodydims::dataset::{build_dataset, kfold_split, write_if_changed, DatasetConfig, DatasetManifest, FoldSplit};
use bodydims::measure::{measure_all, MeasurementSet};
use bodydims::mesh::io::load_mesh;
use bodydims::metrics::{evaluate, evaluate_folds, reference, render_csv, render_text, EvalReport, MeasurementTable};
use bodydims::sampling::{farthest_point_sample, normalize_cloud};
use bodydims::scanner::{merge_scans, render_grayscale, render_silhouette, PointCloud};
use bodydims::FORMAT_VERSIONS;

#[derive(Parser)]
#[command(name = "bodydims", about = "Synthetic body datasets with skeleton-guided measurements")]
struct Cli {
    /// Dataset settings file (TOML or JSON). Flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or resume a dataset.
    Generate {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "BODYDIMS_DATA")]
        out: PathBuf,
    },
    /// Print the 16 measurements (mm) of a mesh and skeleton as CSV.
    Annotate {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        skeleton: PathBuf,
        /// Row id; defaults to the mesh file stem.
        #[arg(long)]
        id: Option<String>,
    },
    /// Noisy multi-view depth scans and the merged cloud of a mesh.
    Scan {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Silhouette (PBM) and gray-scale (PGM) images of a mesh.
    Render {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Farthest point subsample of a PLY cloud.
    Sample {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        points: usize,
        /// Also normalize into [-1, 1]^3.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gender-stratified k-fold split of a dataset.
    Split {
        #[arg(long, env = "BODYDIMS_DATA")]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// MAE, AP and mAP of predictions against ground truth.
    Evaluate {
        /// Prediction CSV; with --split, one per fold in fold order.
        #[arg(long, required = true, num_args = 1..)]
        preds: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0])]
        thresholds: Vec<f64>,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

/// Failure reported on stderr as one JSON object.
struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(kind: &'static str, e: impl std::fmt::Display) -> Self {
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

macro_rules! from_err {
    ($($t:ty => $kind:literal),* $(,)?) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new($kind, e)
            }
        })*
    };
}

from_err! {
    io::Error => "io",
    serde_json::Error => "json",
    bodydims::dataset::DatasetError => "dataset",
    bodydims::bodygen::ImportError => "import",
    bodydims::measure::MeasureError => "measure",
    bodydims::mesh::io::FormatError => "format",
    bodydims::scanner::ScanError => "scan",
    bodydims::sampling::SamplingError => "sampling",
    bodydims::metrics::MetricsError => "metrics",
}

type Result<T> = std::result::Result<T, CliError>;

fn load_config(path: Option<&Path>) -> Result<DatasetConfig> {
    let Some(path) = path else {
        return Ok(DatasetConfig::default());
    };
    let text = fs::read_to_string(path)?;
    parse_config(path, &text)
}

fn parse_config<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(text)?)
    } else {
        toml::from_str(text).map_err(|e| CliError::new("config", e))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_if_changed(path, bytes)?;
    Ok(())
}

fn encode(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn read_table(path: &Path) -> Result<MeasurementTable> {
    Ok(MeasurementTable::read_csv(fs::File::open(path)?)?)
}

fn print_report(report: &EvalReport, format: Format) {
    match format {
        Format::Text => print!("{}", render_text(report)),
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => print!("{}", render_csv(report)),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { count, seed, out } => {
            cfg.count = count.unwrap_or(cfg.count);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let m = build_dataset(&out, &cfg, cli.jobs)?;
            eprintln!("{} samples, {} failed", m.samples.len(), m.failures.len());
        }
        Command::Annotate { mesh, skeleton, id } => {
            let (body, warnings) = import_body(&mesh, &skeleton)?;
            for w in warnings {
                warn!("{w:?}");
            }
            let m = measure_all(&body, &cfg.annotation)?;
            let id = id.unwrap_or_else(|| {
                let name = mesh.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                name.split('.').next().unwrap_or("").to_string()
            });
            println!("{}", MeasurementSet::csv_header());
            println!("{}", m.csv_row(&id));
        }
        Command::Scan { mesh, seed, out } => {
            let mesh = load_mesh(&mesh)?;
            let scans = cfg.scanner.scan_views(&mesh, seed.unwrap_or(cfg.seed))?;
            for (k, scan) in scans.iter().enumerate() {
                write_file(&out.join(format!("view{k}.scan")), &encode(|b| scan.write(b))?)?;
            }
            let cameras: Vec<_> = scans.iter().map(|s| &s.camera).collect();
            write_file(&out.join("cameras.json"), serde_json::to_string_pretty(&cameras)?.as_bytes())?;
            let cloud = merge_scans(&scans)?;
            write_file(&out.join("cloud.ply"), &encode(|b| cloud.write_ply(b))?)?;
            eprintln!("{} views, {} points", scans.len(), cloud.len());
        }
        Command::Render { mesh, out } => {
            let mesh = load_mesh(&mesh)?;
            let cam = cfg.scanner.image_camera(&mesh);
            write_file(&out.join("silhouette.pbm"), &encode(|b| render_silhouette(&mesh, &cam).write_pbm(b))?)?;
            write_file(&out.join("gray.pgm"), &encode(|b| render_grayscale(&mesh, &cam).write_pgm(b))?)?;
        }
        Command::Sample {
            cloud,
            points,
            normalize,
            out,
        } => {
            let cloud = PointCloud::read_ply(BufReader::new(fs::File::open(&cloud)?))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs.max(1))
                .build()
                .map_err(|e| CliError::new("pool", e))?;
            let idx = pool.install(|| farthest_point_sample(cloud.points(), points))?;
            let mut picked = cloud.select(&idx)?;
            if normalize {
                let (pts, t) = normalize_cloud(picked.points())?;
                picked = PointCloud::new(pts)?;
                eprintln!("center {:?}, scale {}", t.center.as_slice(), t.scale);
            }
            write_file(&out, &encode(|b| picked.write_ply(b))?)?;
        }
        Command::Split { dataset, k, seed, out } => {
            let m = DatasetManifest::load(&dataset)?;
            let split = kfold_split(&m.ids(), Some(&m.genders()), k, seed.unwrap_or(cfg.seed))?;
            split.validate(&m.ids())?;
            write_file(&out, split.to_json().as_bytes())?;
        }
        Command::Evaluate {
            preds,
            truth,
            thresholds,
            split,
            format,
        } => {
            let truth = read_table(&truth)?;
            match split {
                None => {
                    let [p] = preds.as_slice() else {
                        return Err(CliError::new("usage", "exactly one --preds without --split"));
                    };
                    let pred = read_table(p)?;
                    let gt = truth.subset(&pred.ids)?;
                    print_report(&evaluate(&pred, &gt, &thresholds, None)?, format);
                }
                Some(split) => {
                    let split = FoldSplit::from_json(&fs::read_to_string(split)?)?;
                    if preds.len() != split.k {
                        return Err(CliError::new("usage", format!("{} --preds for {} folds", preds.len(), split.k)));
                    }
                    let tables: BTreeMap<usize, MeasurementTable> =
                        preds.iter().enumerate().map(|(f, p)| Ok((f, read_table(p)?))).collect::<Result<_>>()?;
                    let (folds, all) = evaluate_folds(&truth, &split.folds, &tables, &thresholds)?;
                    for r in &folds {
                        print_report(r, format);
                    }
                    print_report(&all, format);
                }
            }
            if let Format::Text = format {
                println!("\n{}", reference::NOTE);
            }
        }
    }
    Ok(())
}

fn version() -> &'static str {
    let formats: Vec<String> = FORMAT_VERSIONS.iter().map(|(n, v)| format!("{n} v{v}")).collect();
    Box::leak(format!("{} (formats: {})", env!("CARGO_PKG_VERSION"), formats.join(", ")).into_boxed_str())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let json = serde_json::json!({ "error": e.kind, "message": e.message });
            let _ = writeln!(io::stderr(), "{json}");
            ExitCode::FAILURE
        }
    }
}
