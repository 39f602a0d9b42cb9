//! Command-line front end.
//!
//! Every command is deterministic given its flags, inputs and seed. Numbers
//! are printed with 17 significant digits so written files round-trip `f64`
//! exactly. The thread count can be pinned with `STRAIN_IQA_THREADS`.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 I/O error, 4 decode
//! error, 5 shape error, 6 degenerate data, 7 invariant violation, 8 one or
//! more batch rows failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::connectivity::{self, SweepOptions, SweepResult};
use crate::corpus::{self, DmosConvention, LoadedPair, Manifest, StretchMode};
use crate::error::{Error, Result};
use crate::metric::{self, JacobianScorer, MetricSpec, PairScorer};
use crate::regression::{self, DistanceForm, TrainingConfig};
use crate::stats::{self, Correlation, EvalOptions, Model, ScoreSeries};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DECODE: i32 = 4;
pub const EXIT_SHAPE: i32 = 5;
pub const EXIT_DEGENERATE: i32 = 6;
pub const EXIT_INVARIANT: i32 = 7;
pub const EXIT_BATCH_FAILURES: i32 = 8;

pub const THREADS_ENV: &str = "STRAIN_IQA_THREADS";

/// Shortest-exponent scientific notation with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::InvalidParameter(_) => EXIT_USAGE,
        Error::Io { .. } => EXIT_IO,
        Error::Decode { .. } => EXIT_DECODE,
        Error::Shape(_) => EXIT_SHAPE,
        Error::Degenerate(_) => EXIT_DEGENERATE,
        Error::Invariant(_) => EXIT_INVARIANT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "strain-iqa", version, about = "Full-reference image quality assessment with perceptual strain metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one reference/degraded pair.
    Score(ScoreArgs),
    /// Score every pair of a manifest.
    Batch(BatchArgs),
    /// Fit a 64x64 tile Jacobian to a manifest's ratings.
    Train(TrainArgs),
    /// Cross-validated sweep of connectivity-profile parameters.
    Sweep(SweepArgs),
    /// Correlate several metrics with DMOS and test their differences.
    Compare(CompareArgs),
    /// Export scores against DMOS for plotting.
    Scatter(ScatterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StretchArg {
    None,
    PerImage,
    Paired,
}

impl From<StretchArg> for StretchMode {
    fn from(s: StretchArg) -> Self {
        match s {
            StretchArg::None => StretchMode::None,
            StretchArg::PerImage => StretchMode::PerImage,
            StretchArg::Paired => StretchMode::Paired,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Printed,
    Inverted,
}

impl From<ConventionArg> for DmosConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Printed => DmosConvention::Printed,
            ConventionArg::Inverted => DmosConvention::Inverted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrelationArg {
    Pearson,
    Spearman,
}

impl From<CorrelationArg> for Correlation {
    fn from(c: CorrelationArg) -> Self {
        match c {
            CorrelationArg::Pearson => Correlation::Pearson,
            CorrelationArg::Spearman => Correlation::Spearman,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepFamily {
    Gauss,
    Dog,
}

#[derive(Debug, Args)]
pub struct Normalization {
    /// Luminance stretch applied after decoding.
    #[arg(long, value_enum, default_value = "per-image")]
    pub stretch: StretchArg,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub metric: String,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long = "deg")]
    pub degraded: PathBuf,
    /// Tile only the top-left multiple-of-8 region (tile Jacobians).
    #[arg(long)]
    pub crop: bool,
    #[command(flatten)]
    pub norm: Normalization,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub crop: bool,
    #[command(flatten)]
    pub norm: Normalization,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the accepted-move error trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Proposals between full objective recomputations (0 disables).
    #[arg(long, default_value_t = 500)]
    pub checkpoint_every: usize,
    /// Correlate root distances instead of squared distances.
    #[arg(long)]
    pub root: bool,
    #[arg(long)]
    pub crop: bool,
    #[arg(long, value_enum, default_value = "printed")]
    pub dmos_convention: ConventionArg,
    #[command(flatten)]
    pub norm: Normalization,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub metric: SweepFamily,
    /// Gaussian sigma grid: `start:end:step`, a comma list, or one value.
    #[arg(long)]
    pub grid: Option<String>,
    /// DOG center-width grid.
    #[arg(long)]
    pub center_grid: Option<String>,
    /// DOG surround-width grid.
    #[arg(long)]
    pub surround_grid: Option<String>,
    /// DOG alpha grid.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "pearson")]
    pub correlation: CorrelationArg,
    #[arg(long, default_value_t = connectivity::DEFAULT_TRUNCATION)]
    pub truncation: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "printed")]
    pub dmos_convention: ConventionArg,
    #[command(flatten)]
    pub norm: Normalization,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated metric list, e.g. `gauss:2.0,euclid,ssim`.
    #[arg(long)]
    pub metrics: String,
    /// Fold count; trained metrics then score held-out folds only.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Bonferroni factor applied to comparison p-values.
    #[arg(long)]
    pub bonferroni: Option<usize>,
    /// Model pairs to compare as 1-based indices, e.g. `1-2,1-3`; all pairs by default.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Permutation count for per-cell significance.
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long, value_enum, default_value = "printed")]
    pub dmos_convention: ConventionArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the machine-readable report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub norm: Normalization,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Score files written by `batch` for the same manifest.
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub zscore: bool,
    #[arg(long)]
    pub log: bool,
    #[arg(long, value_enum, default_value = "printed")]
    pub dmos_convention: ConventionArg,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return exit_code(&e);
    }
    let result = match cli.command {
        Command::Score(a) => cmd_score(&a, out, err),
        Command::Batch(a) => cmd_batch(&a, out, err),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Sweep(a) => cmd_sweep(&a, out, err),
        Command::Compare(a) => cmd_compare(&a, out, err),
        Command::Scatter(a) => cmd_scatter(&a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // a global pool may already exist when run more than once in-process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn warn(err: &mut dyn Write, warnings: &[String]) {
    for w in warnings {
        let _ = writeln!(err, "warning: {w}");
    }
}

fn build_scorer(spec: &MetricSpec, crop: bool) -> Result<Arc<dyn PairScorer>> {
    match spec {
        MetricSpec::Jacobian { path } => Ok(Arc::new(JacobianScorer {
            label: spec.to_string(),
            jacobian: regression::load_jacobian(path)?,
            crop,
        })),
        _ => spec.scorer(),
    }
}

fn load_rated(manifest: &Manifest, norm: &Normalization, convention: DmosConvention, err: &mut dyn Write) -> Result<Vec<LoadedPair>> {
    let dataset = corpus::load_dataset(manifest, norm.stretch.into())?;
    warn(err, &dataset.warnings);
    Ok(dataset
        .pairs
        .into_iter()
        .map(|mut p| {
            p.dmos = convention.from_printed(p.dmos);
            p
        })
        .collect())
}

pub fn cmd_score(a: &ScoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let spec: MetricSpec = a.metric.parse()?;
    let scorer = build_scorer(&spec, a.crop)?;
    let (reference, degraded, warnings) = corpus::load_pair(&a.reference, &a.degraded, a.norm.stretch.into())?;
    warn(err, &warnings);
    let score = scorer.score(&reference, &degraded)?;
    emit(out, &format!("{}\n", fmt_num(score)))?;
    Ok(EXIT_OK)
}

pub const BATCH_HEADER: [&str; 7] = ["row", "ref_path", "deg_path", "dmos", "metric", "score", "error"];

pub fn cmd_batch(a: &BatchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let spec: MetricSpec = a.metric.parse()?;
    let scorer = build_scorer(&spec, a.crop)?;
    let manifest = corpus::load_manifest(&a.manifest)?;
    let stretch: StretchMode = a.norm.stretch.into();
    let results: Vec<Result<(f64, Vec<String>)>> = manifest
        .pairs
        .par_iter()
        .map(|p| {
            let (r, d, w) = corpus::load_pair(manifest.resolve(&p.ref_path), manifest.resolve(&p.deg_path), stretch)?;
            Ok((scorer.score(&r, &d)?, w))
        })
        .collect();

    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidParameter(format!("csv output: {e}"));
    writer.write_record(BATCH_HEADER).map_err(csv_err)?;
    let mut failures = Vec::new();
    for (i, (p, r)) in manifest.pairs.iter().zip(&results).enumerate() {
        let (score, message) = match r {
            Ok((s, w)) => {
                warn(err, w);
                (fmt_num(*s), String::new())
            }
            Err(e) => {
                failures.push(format!("line {}: {e}", p.line));
                (String::new(), e.to_string())
            }
        };
        writer
            .write_record([
                (i + 1).to_string(),
                p.ref_path.clone(),
                p.deg_path.clone(),
                fmt_num(p.dmos),
                spec.to_string(),
                score,
                message,
            ])
            .map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidParameter(format!("csv output: {e}")))?;
    std::fs::write(&a.out, bytes).map_err(io_err(&a.out))?;
    emit(out, &format!("scored {} of {} pairs\n", results.len() - failures.len(), results.len()))?;
    if failures.is_empty() {
        return Ok(EXIT_OK);
    }
    for f in &failures {
        let _ = writeln!(err, "error: {f}");
    }
    let _ = writeln!(err, "error: {} of {} rows failed", failures.len(), results.len());
    Ok(EXIT_BATCH_FAILURES)
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let manifest = corpus::load_manifest(&a.manifest)?;
    let pairs = load_rated(&manifest, &a.norm, a.dmos_convention.into(), err)?;
    if pairs.windows(2).all(|w| w[0].dmos == w[1].dmos) {
        return Err(Error::Degenerate("all DMOS values are equal; the training objective is undefined".into()));
    }
    let cfg = TrainingConfig {
        iterations: a.iters,
        step: a.step,
        seed: a.seed,
        checkpoint_every: a.checkpoint_every,
        crop: a.crop,
        form: if a.root { DistanceForm::Root } else { DistanceForm::Squared },
        dataset_id: manifest.dataset_id.clone(),
        ..TrainingConfig::default()
    };
    let (jacobian, trace) = regression::train_jacobian(&pairs, &cfg)?;
    regression::save_jacobian(&jacobian, &a.out)?;
    if let Some(path) = &a.trace {
        write_file(path, &trace.render_table())?;
    }
    emit(
        out,
        &format!(
            "initial_error {}\nfinal_error {}\naccepted {}\nmax_checkpoint_drift {}\n",
            fmt_num(trace.initial_error),
            fmt_num(trace.final_error),
            trace.accepted,
            fmt_num(trace.max_checkpoint_drift())
        ),
    )?;
    Ok(EXIT_OK)
}

/// `start:end:step`, a comma list, or a single value.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidParameter(format!("grid value `{t}` is not a finite number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts[..] {
        [start, end, step] => connectivity::grid(num(start)?, num(end)?, num(step)?),
        [_] => text.split(',').map(num).collect(),
        _ => Err(Error::InvalidParameter(format!("grid `{text}` must be start:end:step or a comma list"))),
    }
}

fn render_sweep_summary(result: &SweepResult) -> String {
    let mut s = String::new();
    for fold in 0..result.best.len() {
        let point = result.best[fold];
        let params: Vec<String> = result
            .param_names
            .iter()
            .zip(&result.grid[point])
            .map(|(n, v)| format!("{n}={}", fmt_num(*v)))
            .collect();
        s.push_str(&format!(
            "fold {fold}: best {} train_error={} test_error={}\n",
            params.join(" "),
            fmt_num(result.train_error[fold][point]),
            fmt_num(result.test_error[fold][point])
        ));
    }
    s
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let manifest = corpus::load_manifest(&a.manifest)?;
    let pairs = load_rated(&manifest, &a.norm, a.dmos_convention.into(), err)?;
    let opts = SweepOptions {
        truncation_threshold: a.truncation,
        correlation: a.correlation.into(),
    };
    let result = match a.metric {
        SweepFamily::Gauss => {
            let grid = a.grid.as_deref().map(parse_grid).transpose()?.unwrap_or_else(connectivity::default_gaussian_grid);
            connectivity::sweep_gaussian(&pairs, &grid, a.folds, a.seed, &opts)?
        }
        SweepFamily::Dog => {
            let (dc, ds, da) = connectivity::default_dog_grids();
            let pick = |g: &Option<String>, d: Vec<f64>| g.as_deref().map(parse_grid).transpose().map(|g| g.unwrap_or(d));
            let (c, s, al) = (pick(&a.center_grid, dc)?, pick(&a.surround_grid, ds)?, pick(&a.alpha_grid, da)?);
            connectivity::sweep_dog(&pairs, &c, &s, &al, a.folds, a.seed, &opts)?
        }
    };
    warn(err, &result.folds.warnings);
    write_file(&a.out, &result.render_table())?;
    emit(out, &render_sweep_summary(&result))?;
    Ok(EXIT_OK)
}

fn parse_pairs(text: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|t| {
            let bad = || Error::InvalidParameter(format!("comparison `{t}` must be two 1-based model indices like 1-2"));
            let (x, y) = t.trim().split_once('-').ok_or_else(bad)?;
            let (x, y): (usize, usize) = (x.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?);
            if x == 0 || y == 0 || x > n || y > n || x == y {
                return Err(Error::InvalidParameter(format!("comparison `{t}` is out of range for {n} metrics")));
            }
            Ok((x - 1, y - 1))
        })
        .collect()
}

pub fn cmd_compare(a: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let specs = metric::parse_metric_list(&a.metrics)?;
    let models: Vec<Model> = specs.iter().map(Model::from_spec).collect::<Result<_>>()?;
    let comparisons = match &a.pairs {
        Some(p) => parse_pairs(p, models.len())?,
        None => (0..models.len()).flat_map(|i| (i + 1..models.len()).map(move |j| (i, j))).collect(),
    };
    let manifest = corpus::load_manifest(&a.manifest)?;
    let convention: DmosConvention = a.dmos_convention.into();
    let pairs = load_rated(&manifest, &a.norm, convention, err)?;
    let folds = a
        .folds
        .map(|k| corpus::stratified_folds_for(corpus::references_of(&pairs), k, a.seed))
        .transpose()?;
    let opts = EvalOptions {
        dataset_id: manifest.dataset_id.clone(),
        folds,
        comparisons,
        bonferroni: a.bonferroni,
        alpha: a.alpha,
        permutations: a.permutations,
        seed: a.seed,
        dmos_convention: convention,
    };
    let report = stats::evaluate_models(&pairs, &models, &opts)?;
    let text = report.render_text();
    match &a.out {
        Some(path) => write_file(path, &text)?,
        None => emit(out, &text)?,
    }
    if let Some(path) = &a.csv {
        write_file(path, &report.render_csv())?;
    }
    let failed: Vec<&str> = report.models.iter().filter(|m| m.error.is_some()).map(|m| m.label.as_str()).collect();
    if !failed.is_empty() {
        let _ = writeln!(err, "error: metrics failed: {}", failed.join(", "));
        return Ok(EXIT_BATCH_FAILURES);
    }
    Ok(EXIT_OK)
}

/// Reads a `batch` output file, checking it lines up with the manifest.
pub fn read_scores(path: &Path, manifest: &Manifest) -> Result<ScoreSeries> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != BATCH_HEADER {
        return Err(Error::parse(path, 1, format!("expected header `{}`", BATCH_HEADER.join(","))));
    }
    let mut label = None;
    let mut scores = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let Some(pair) = manifest.pairs.get(i) else {
            return Err(Error::Shape(format!("{} has more rows than the manifest", path.display())));
        };
        if rec[1] != pair.ref_path || rec[2] != pair.deg_path {
            return Err(Error::Shape(format!(
                "{} row {} is ({}, {}) but manifest row {} is ({}, {})",
                path.display(),
                i + 1,
                &rec[1],
                &rec[2],
                i + 1,
                pair.ref_path,
                pair.deg_path
            )));
        }
        if !rec[6].is_empty() || rec[5].is_empty() {
            return Err(Error::InvalidParameter(format!("{} row {} has no score", path.display(), i + 1)));
        }
        let v: f64 = rec[5]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("score `{}` is not a number", &rec[5])))?;
        label.get_or_insert_with(|| rec[4].to_string());
        scores.push(v);
    }
    if scores.len() != manifest.pairs.len() {
        return Err(Error::Shape(format!(
            "{} has {} rows but the manifest has {}",
            path.display(),
            scores.len(),
            manifest.pairs.len()
        )));
    }
    Ok(ScoreSeries {
        label: label.unwrap_or_default(),
        scores,
    })
}

pub fn cmd_scatter(a: &ScatterArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32> {
    let manifest = corpus::load_manifest(&a.manifest)?;
    let convention: DmosConvention = a.dmos_convention.into();
    let mut series: Vec<ScoreSeries> = a.scores.iter().map(|p| read_scores(p, &manifest)).collect::<Result<_>>()?;
    for i in 0..series.len() {
        if series[..i].iter().any(|s| s.label == series[i].label) {
            series[i].label = format!("{}#{}", series[i].label, i + 1);
        }
    }
    let dmos: Vec<f64> = manifest.pairs.iter().map(|p| convention.from_printed(p.dmos)).collect();
    let summary = stats::export_scatter(&series, &dmos, a.zscore, a.log, &a.out)?;
    let mut text = String::new();
    for f in &summary.fits {
        text.push_str(&format!(
            "{}: slope={} intercept={} used={} excluded={}\n",
            f.label,
            f.slope.map(fmt_num).unwrap_or_else(|| "-".into()),
            f.intercept.map(fmt_num).unwrap_or_else(|| "-".into()),
            f.used,
            f.excluded
        ));
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}
