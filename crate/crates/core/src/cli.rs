//! Command-line front end.
//!
//! Exit codes: 0 success, 1 pipeline failure (training, evaluation),
//! 2 I/O (missing or unreadable files, corrupt model), 3 input validation,
//! 64 usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::baselines::{run_comparison, write_comparison_csv, ClassifierKind, ComparisonConfig};
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, write_fold_manifest, write_report_csv, write_report_json, Example};
use crate::features::{extract_features, extract_from_patches, read_feature_csv, write_feature_csv, FeatureRow};
use crate::ingest::{load_dataset, load_manifest, read_patches, PatchPrediction};
use crate::netcore::{Optimizer, TrainConfig};
use crate::synth::{generate_dataset, write_dataset, SynthConfig, PATCH_PITCH};
use crate::widedeep::{train_widedeep_with, WideDeepModel, HIDDEN_WIDTH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PIPELINE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "slidescreen",
    version,
    about = "Slide-level prostate cancer screening from patch predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (manifest + per-slide patch CSVs).
    Synth(SynthArgs),
    /// Compute the 18 slide features for every slide of a manifest.
    Extract(ExtractArgs),
    /// Stratified K-fold cross-validation of one classifier.
    Cv(CvArgs),
    /// Cross-validate several classifiers on shared folds.
    Compare(CompareArgs),
    /// Train the wide & deep model on a whole dataset.
    Train(TrainArgs),
    /// Classify one slide with a trained model.
    Predict(PredictArgs),
    /// Export a slide's patch probabilities as a grid.
    Heatmap(HeatmapArgs),
}

fn probability(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive_rate(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and positive"))
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Slides per label.
    #[arg(long, default_value_t = 100)]
    n_slides: usize,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    grid: u32,
    #[arg(long, default_value_t = 1)]
    min_blobs: usize,
    #[arg(long, default_value_t = 3)]
    max_blobs: usize,
    #[arg(long, default_value_t = 2)]
    min_radius: usize,
    #[arg(long, default_value_t = 5)]
    max_radius: usize,
    #[arg(long, default_value_t = 0.02, value_parser = probability)]
    noise_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct Jobs {
    /// Worker threads for slide- and fold-level parallelism.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct DataSource {
    /// Slide manifest; features are extracted on the fly.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Feature CSV written by `extract`.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Training {
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u32).range(1..))]
    epochs: u32,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_rate)]
    lr: f64,
    /// Hidden layer width of the wide & deep model and the ANN.
    #[arg(long, default_value_t = HIDDEN_WIDTH as u32, value_parser = clap::value_parser!(u32).range(1..))]
    hidden: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Training {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs as usize,
            learning_rate: self.lr,
            seed: self.seed,
            optimizer: Optimizer::Adam,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelName {
    Widedeep,
    Ann,
    Svm,
    Rf,
    Knn,
}

impl From<ModelName> for ClassifierKind {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Widedeep => ClassifierKind::WideDeep,
            ModelName::Ann => ClassifierKind::Ann,
            ModelName::Svm => ClassifierKind::Svm,
            ModelName::Rf => ClassifierKind::Rf,
            ModelName::Knn => ClassifierKind::Knn,
        }
    }
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    source: DataSource,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "widedeep")]
    model: ModelName,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    k: u32,
    #[command(flatten)]
    training: Training,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    source: DataSource,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of widedeep,ann,svm,rf,knn.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "widedeep,ann,svm,rf,knn")]
    classifiers: Vec<ModelName>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    k: u32,
    #[command(flatten)]
    training: Training,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    source: DataSource,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    training: Training,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Patch CSV of the slide to classify.
    #[arg(long)]
    slide: PathBuf,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    #[arg(long)]
    slide: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::MissingFile(_) | Error::Io { .. } | Error::ModelFormat { .. } => EXIT_IO,
        Error::MalformedRow { .. } | Error::DuplicateSlideId(_) | Error::ProbabilityOutOfRange { .. } => {
            EXIT_VALIDATION
        }
        Error::InvalidConfig(_) | Error::InvalidTrainConfig(_) => EXIT_USAGE,
        _ => EXIT_PIPELINE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn with_jobs<T: Send>(jobs: &Jobs, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.jobs as usize)
        .build()
        .expect("thread pool");
    pool.install(f)
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingFile(path.to_path_buf()))
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

impl DataSource {
    fn path(&self) -> &Path {
        self.manifest
            .as_deref()
            .or(self.features.as_deref())
            .expect("clap enforces one source")
    }

    fn load(&self) -> Result<Vec<Example>> {
        let rows = match &self.manifest {
            Some(manifest) => extract_manifest(manifest)?,
            None => read_feature_csv(self.features.as_deref().expect("clap enforces one source"))?,
        };
        Ok(rows
            .into_iter()
            .map(|r| Example {
                slide_id: r.slide_id,
                label: r.label,
                features: r.features,
            })
            .collect())
    }
}

fn extract_manifest(manifest: &Path) -> Result<Vec<FeatureRow>> {
    let slides = load_dataset(&load_manifest(manifest)?)?;
    Ok(slides
        .par_iter()
        .map(|s| FeatureRow {
            slide_id: s.slide_id.clone(),
            label: s.label,
            features: extract_features(s),
        })
        .collect())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Cv(a) => cmd_cv(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Heatmap(a) => cmd_heatmap(&a),
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        slides_per_label: a.n_slides,
        grid: a.grid as usize,
        min_blobs: a.min_blobs,
        max_blobs: a.max_blobs,
        min_radius: a.min_radius,
        max_radius: a.max_radius,
        noise_rate: a.noise_rate,
        seed: a.seed,
        ..SynthConfig::default()
    };
    cfg.validate()?;
    prepare_out(&a.out)?;
    let manifest = write_dataset(&a.out, &generate_dataset(&cfg)?)?;
    eprintln!(
        "wrote {} slides, manifest {}",
        2 * cfg.slides_per_label,
        manifest.display()
    );
    Ok(())
}

fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    require_file(&a.manifest)?;
    with_jobs(&a.jobs, || {
        let rows = extract_manifest(&a.manifest)?;
        prepare_out(&a.out)?;
        write_feature_csv(&a.out.join("features.csv"), &rows)?;
        eprintln!("extracted features for {} slides", rows.len());
        Ok(())
    })
}

fn comparison_config(t: &Training) -> ComparisonConfig {
    ComparisonConfig {
        hidden: t.hidden as usize,
        train: t.config(),
        ..ComparisonConfig::default()
    }
}

fn cmd_cv(a: &CvArgs) -> Result<()> {
    require_file(a.source.path())?;
    with_jobs(&a.jobs, || {
        let data = a.source.load()?;
        let cfg = comparison_config(&a.training);
        let kind = ClassifierKind::from(a.model);
        let factory = move || kind.build(&cfg);
        let report = cross_validate(&data, &factory, a.k as usize, a.training.seed)?;
        prepare_out(&a.out)?;
        write_report_csv(&a.out.join(format!("cv_{kind}.csv")), &report)?;
        write_report_json(&a.out.join(format!("cv_{kind}.json")), &report)?;
        write_fold_manifest(&a.out.join("folds.csv"), &report.assignment, &data)?;
        Ok(())
    })
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    require_file(a.source.path())?;
    with_jobs(&a.jobs, || {
        let data = a.source.load()?;
        let kinds: Vec<ClassifierKind> = a.classifiers.iter().map(|&m| m.into()).collect();
        let cfg = comparison_config(&a.training);
        let table = run_comparison(&data, a.k as usize, a.training.seed, &kinds, &cfg)?;
        prepare_out(&a.out)?;
        write_comparison_csv(&a.out.join("comparison.csv"), &table)?;
        let json = serde_json::to_string_pretty(&table).expect("table serialises") + "\n";
        let path = a.out.join("comparison.json");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        if let Some(first) = table.rows.first() {
            write_fold_manifest(&a.out.join("folds.csv"), &first.assignment, &data)?;
        }
        Ok(())
    })
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    require_file(a.source.path())?;
    with_jobs(&a.jobs, || {
        let data = a.source.load()?;
        let pairs: Vec<_> = data.iter().map(|e| (e.features, e.label)).collect();
        let model = train_widedeep_with(a.training.hidden as usize, &pairs, &a.training.config())?;
        prepare_out(&a.out)?;
        let path = a.out.join("model.json");
        model.save(&path)?;
        eprintln!("saved {}", path.display());
        Ok(())
    })
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    require_file(&a.model)?;
    require_file(&a.slide)?;
    let model = WideDeepModel::load(&a.model)?;
    let patches = read_patches(&a.slide)?;
    let pred = model.predict_slide(&extract_from_patches(&patches));
    println!("{}\t{:.6}", pred.label, pred.p_malignant);
    Ok(())
}

/// Grid cell of a patch center: the 100 px tile containing it, which is also
/// the tile whose center is nearest.
fn cell(coord: u32) -> u32 {
    coord / PATCH_PITCH
}

/// Probability grid spanning the occupied cells (rows = y). Where two
/// patches share a cell the larger probability is kept.
pub fn heatmap_grid(patches: &[PatchPrediction]) -> Vec<Vec<Option<f64>>> {
    if patches.is_empty() {
        return Vec::new();
    }
    let (min_c, max_c) = patches
        .iter()
        .map(|p| cell(p.x))
        .fold((u32::MAX, 0), |(lo, hi), c| (lo.min(c), hi.max(c)));
    let (min_r, max_r) = patches
        .iter()
        .map(|p| cell(p.y))
        .fold((u32::MAX, 0), |(lo, hi), c| (lo.min(c), hi.max(c)));
    let mut grid = vec![vec![None; (max_c - min_c + 1) as usize]; (max_r - min_r + 1) as usize];
    for p in patches {
        let slot: &mut Option<f64> = &mut grid[(cell(p.y) - min_r) as usize][(cell(p.x) - min_c) as usize];
        *slot = Some(slot.map_or(p.prob_malignant, |q| q.max(p.prob_malignant)));
    }
    grid
}

fn cmd_heatmap(a: &HeatmapArgs) -> Result<()> {
    require_file(&a.slide)?;
    let grid = heatmap_grid(&read_patches(&a.slide)?);
    prepare_out(&a.out)?;
    let path = a.out.join("heatmap.csv");
    let io = |e| Error::io(&path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io)?);
    for row in grid {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.map(|v| format!("{v:?}")).unwrap_or_default())
            .collect();
        writeln!(out, "{}", cells.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}
