//! The eight pipeline subcommands. Each command resolves its settings
//! (flags over config file over defaults), does its work through the
//! core library, and writes a run manifest alongside its outputs.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};

use chrseg_core::baselines::{fit_threshold, run_geometric, run_threshold, DEFAULT_APPROX_EPSILON};
use chrseg_core::baselines::score_merged;
use chrseg_core::datagen::{
    generate_dataset, generate_dataset_parallel, read_dataset, write_dataset, GenConfig, GenSource,
};
use chrseg_core::evaluation::{
    evaluate_set, intensity_histogram, merge_chromosome_classes, render_overlay,
};
use chrseg_core::network::{
    init_params, inverse_frequency_weights, load_checkpoint, predict_dataset, save_checkpoint,
    train, NetConfig, OptimizerKind, TrainConfig,
};
use chrseg_core::preprocess::{clean_dataset, crop_dataset, split, SplitSpec};
use chrseg_core::rng::seeded_rng;
use chrseg_core::{Dataset, LabelMap};

use crate::config::Settings;
use crate::error::{bad_file, CliError};
use crate::manifest::RunManifest;

/// State shared by every subcommand: the resolved global options plus
/// the settings ledger that feeds the run manifest.
pub struct Ctx {
    pub seed: u64,
    pub threads: Option<usize>,
    pub command_line: Vec<String>,
    pub settings: Settings,
}

impl Ctx {
    fn manifest(&self) -> RunManifest {
        RunManifest::new(self.command_line.clone(), self.seed, self.settings.resolved())
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    Ok(())
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, body)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn read_input_dataset(path: &Path) -> Result<Dataset, CliError> {
    read_dataset(path).map_err(bad_file(path))
}

// ---------------------------------------------------------------- gen

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of overlap samples to generate [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Output dataset file
    #[arg(long)]
    pub out: PathBuf,
    /// Number of procedural sources to synthesize [default: 12]
    #[arg(long)]
    pub sources: Option<usize>,
    /// Directory of `<id>_gray.pgm` / `<id>_mask.pgm` source pairs;
    /// overrides the procedural sources
    #[arg(long)]
    pub source_dir: Option<PathBuf>,
    /// Block-average imported sources 2x before composing
    #[arg(long)]
    pub downscale: bool,
    /// Minimum overlap pixels per kept sample [default: 1]
    #[arg(long)]
    pub min_overlap: Option<usize>,
    /// Translation cap on the second chromosome, pixels [default: 20]
    #[arg(long)]
    pub max_translation: Option<i32>,
}

pub fn gen(ctx: &mut Ctx, args: &GenArgs) -> Result<(), CliError> {
    let n = ctx.settings.get("n", args.n, 200)?;
    let sources = ctx.settings.get("sources", args.sources, 12)?;
    let min_overlap = ctx.settings.get("min_overlap", args.min_overlap, 1)?;
    let max_translation = ctx.settings.get("max_translation", args.max_translation, 20)?;
    let source_dir = ctx
        .settings
        .get_opt("source_dir", args.source_dir.as_ref().map(|p| p.display().to_string()))?
        .map(PathBuf::from);
    let downscale = ctx.settings.get_switch("downscale", args.downscale)?;

    let mut config = GenConfig::new(n, ctx.seed);
    config.min_overlap = min_overlap;
    config.max_translation = max_translation;
    let mut source_files = Vec::new();
    if let Some(dir) = &source_dir {
        if !dir.is_dir() {
            return Err(CliError::Io {
                path: dir.display().to_string(),
                source: io::Error::new(io::ErrorKind::NotFound, "no such directory"),
            });
        }
        let entries = fs::read_dir(dir)
            .map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        for entry in entries {
            let path = entry
                .map_err(|source| CliError::Io { path: dir.display().to_string(), source })?
                .path();
            if path.extension().is_some_and(|e| e == "pgm") {
                source_files.push(path);
            }
        }
        config.source = GenSource::Files { dir: dir.clone(), downscale };
    } else if let GenSource::Phantoms { count, .. } = &mut config.source {
        *count = sources;
    }

    let parallel = ctx.threads.is_some_and(|t| t != 1);
    let dataset =
        if parallel { generate_dataset_parallel(&config)? } else { generate_dataset(&config)? };

    ensure_parent(&args.out)?;
    write_dataset(&dataset, &args.out)?;

    let mut manifest = ctx.manifest();
    source_files.sort();
    for f in &source_files {
        manifest.add_input(f)?;
    }
    manifest.add_output(&args.out)?;
    manifest.write_alongside(&args.out)?;
    println!(
        "wrote {} samples ({}x{}) to {}",
        dataset.len(),
        dataset.h,
        dataset.w,
        args.out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- clean

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Input dataset file
    #[arg(long)]
    pub input: PathBuf,
    /// Output dataset file
    #[arg(long)]
    pub out: PathBuf,
    /// Center-crop height [default: 88]
    #[arg(long)]
    pub crop_h: Option<usize>,
    /// Center-crop width [default: 88]
    #[arg(long)]
    pub crop_w: Option<usize>,
}

pub fn clean(ctx: &mut Ctx, args: &CleanArgs) -> Result<(), CliError> {
    let crop_h = ctx.settings.get("crop_h", args.crop_h, 88)?;
    let crop_w = ctx.settings.get("crop_w", args.crop_w, 88)?;

    let dataset = read_input_dataset(&args.input)?;
    let cleaned = clean_dataset(&dataset);
    let cropped = crop_dataset(&cleaned, crop_h, crop_w)?;
    ensure_parent(&args.out)?;
    write_dataset(&cropped, &args.out)?;

    let mut manifest = ctx.manifest();
    manifest.add_input(&args.input)?;
    manifest.add_output(&args.out)?;
    manifest.write_alongside(&args.out)?;
    println!(
        "cleaned {} samples, cropped to {}x{}, wrote {}",
        cropped.len(),
        crop_h,
        crop_w,
        args.out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- split

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Input dataset file
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for train.chrseg / val.chrseg / test.chrseg
    #[arg(long)]
    pub out: PathBuf,
}

pub fn split_cmd(ctx: &mut Ctx, args: &SplitArgs) -> Result<(), CliError> {
    let dataset = read_input_dataset(&args.input)?;
    let spec = SplitSpec::new(ctx.seed);
    let (train_set, val_set, test_set) = split(&dataset, &spec)?;

    fs::create_dir_all(&args.out)
        .map_err(|source| CliError::Io { path: args.out.display().to_string(), source })?;
    let mut manifest = ctx.manifest();
    manifest.add_input(&args.input)?;
    for (name, part) in
        [("train.chrseg", &train_set), ("val.chrseg", &val_set), ("test.chrseg", &test_set)]
    {
        let path = args.out.join(name);
        write_dataset(part, &path)?;
        manifest.add_output(&path)?;
    }
    manifest.write_alongside(&args.out)?;
    println!(
        "split {} -> {} train / {} val / {} test in {}",
        dataset.len(),
        train_set.len(),
        val_set.len(),
        test_set.len(),
        args.out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- train

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerChoice {
    Adam,
    Sgd,
}

impl std::fmt::Display for OptimizerChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerChoice::Adam => "adam",
            OptimizerChoice::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerChoice::Adam),
            "sgd" => Ok(OptimizerChoice::Sgd),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightChoice {
    /// Inverse-frequency class weights fit on the training set
    Auto,
    /// Unweighted cross-entropy
    None,
}

impl std::fmt::Display for WeightChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightChoice::Auto => "auto",
            WeightChoice::None => "none",
        })
    }
}

impl FromStr for WeightChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(WeightChoice::Auto),
            "none" => Ok(WeightChoice::None),
            other => Err(format!("unknown class-weights mode `{other}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset file
    #[arg(long)]
    pub train: PathBuf,
    /// Validation dataset file (omitted: model selection on train loss)
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Output checkpoint file
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch history CSV [default: <out>.history.csv]
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Training epochs [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate [default: 1e-3]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Encoder depth (pooling steps) [default: 2]
    #[arg(long)]
    pub depth: Option<usize>,
    /// Filters at the first level [default: 16]
    #[arg(long)]
    pub base_filters: Option<usize>,
    /// Optimizer [default: adam]
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerChoice>,
    /// Class weighting [default: auto]
    #[arg(long, value_enum)]
    pub class_weights: Option<WeightChoice>,
}

fn history_csv(history: &[chrseg_core::network::EpochStats]) -> String {
    let mut out =
        String::from("epoch,train_loss,val_loss,val_iou_bg,val_iou_a,val_iou_b,val_iou_overlap\n");
    let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    for e in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.epoch,
            e.train_loss,
            fmt_opt(e.val_loss),
            fmt_opt(e.val_iou[0]),
            fmt_opt(e.val_iou[1]),
            fmt_opt(e.val_iou[2]),
            fmt_opt(e.val_iou[3]),
        ));
    }
    out
}

pub fn train_cmd(ctx: &mut Ctx, args: &TrainArgs) -> Result<(), CliError> {
    let epochs = ctx.settings.get("epochs", args.epochs, 10)?;
    let batch_size = ctx.settings.get("batch_size", args.batch_size, 8)?;
    let lr = ctx.settings.get("lr", args.lr, 1e-3)?;
    let depth = ctx.settings.get("depth", args.depth, 2)?;
    let base_filters = ctx.settings.get("base_filters", args.base_filters, 16)?;
    let optimizer = ctx.settings.get("optimizer", args.optimizer, OptimizerChoice::Adam)?;
    let class_weights =
        ctx.settings.get("class_weights", args.class_weights, WeightChoice::Auto)?;

    let train_set = read_input_dataset(&args.train)?;
    let val_set = match &args.val {
        Some(p) => read_input_dataset(p)?,
        None => Dataset::new(train_set.h, train_set.w),
    };

    let net = NetConfig { depth, base_filters, ..NetConfig::default() };
    let params = init_params::<f32>(&net, &mut seeded_rng(ctx.seed))?;
    let tcfg = TrainConfig {
        epochs,
        batch_size,
        learning_rate: lr,
        optimizer: match optimizer {
            OptimizerChoice::Adam => OptimizerKind::default(),
            OptimizerChoice::Sgd => OptimizerKind::Sgd,
        },
        class_weights: match class_weights {
            WeightChoice::Auto => Some(inverse_frequency_weights(&train_set)),
            WeightChoice::None => None,
        },
        seed: ctx.seed,
    };
    let (params, history) = train(params, &train_set, &val_set, &tcfg)?;

    ensure_parent(&args.out)?;
    save_checkpoint(&params, None, &args.out).map_err(CliError::from)?;
    let history_path =
        args.history.clone().unwrap_or_else(|| args.out.with_extension("history.csv"));
    write_text(&history_path, &history_csv(&history))?;

    let mut manifest = ctx.manifest();
    manifest.add_input(&args.train)?;
    if let Some(p) = &args.val {
        manifest.add_input(p)?;
    }
    manifest.add_output(&args.out)?;
    manifest.add_output(&history_path)?;
    manifest.write_alongside(&args.out)?;

    if let Some(last) = history.last() {
        let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        println!(
            "trained {} epochs: train_loss {:.4}, val_loss {}, val_iou overlap {}",
            history.len(),
            last.train_loss,
            fmt_opt(last.val_loss),
            fmt_opt(last.val_iou[3]),
        );
    }
    println!("checkpoint {}", args.out.display());
    Ok(())
}

// --------------------------------------------------------------- eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset with ground-truth labels
    #[arg(long)]
    pub data: PathBuf,
    /// Model checkpoint
    #[arg(long)]
    pub model: PathBuf,
    /// Output report JSON
    #[arg(long)]
    pub out: PathBuf,
    /// Merge the two chromosome classes before scoring
    #[arg(long)]
    pub merge: bool,
    /// Prediction batch size [default: 8]
    #[arg(long)]
    pub batch: Option<usize>,
}

pub fn eval(ctx: &mut Ctx, args: &EvalArgs) -> Result<(), CliError> {
    let batch = ctx.settings.get("batch", args.batch, 8)?;
    let merge = ctx.settings.get_switch("merge", args.merge)?;

    let dataset = read_input_dataset(&args.data)?;
    let (params, _) = load_checkpoint(&args.model).map_err(bad_file(&args.model))?;
    let preds = predict_dataset(&params, &dataset, batch)?;

    let (body, text) = if merge {
        let merged: Vec<LabelMap> = preds.iter().map(merge_chromosome_classes).collect();
        let report = score_merged(&merged, &dataset, None)?;
        (report.to_json(), report.to_text())
    } else {
        let truths: Vec<LabelMap> = dataset.samples.iter().map(|s| s.label.clone()).collect();
        let report = evaluate_set(&preds, &truths)?;
        (report.to_json(), report.to_text())
    };
    write_text(&args.out, &body)?;

    let mut manifest = ctx.manifest();
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.model)?;
    manifest.add_output(&args.out)?;
    manifest.write_alongside(&args.out)?;
    print!("{text}");
    Ok(())
}

// ----------------------------------------------------------- baseline

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    /// Two-level intensity thresholding
    Threshold,
    /// Contour geometry: crossing-domain extraction with threshold fallback
    Geometric,
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineMethod::Threshold => "threshold",
            BaselineMethod::Geometric => "geometric",
        })
    }
}

impl FromStr for BaselineMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "threshold" => Ok(BaselineMethod::Threshold),
            "geometric" => Ok(BaselineMethod::Geometric),
            other => Err(format!("unknown baseline method `{other}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Baseline method [default: threshold]
    #[arg(long, value_enum)]
    pub method: Option<BaselineMethod>,
    /// Training dataset (fits the threshold model)
    #[arg(long)]
    pub train: PathBuf,
    /// Evaluation dataset
    #[arg(long)]
    pub test: PathBuf,
    /// Polygonal approximation tolerance, pixels [default: 2]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Output report JSON
    #[arg(long)]
    pub out: PathBuf,
}

pub fn baseline(ctx: &mut Ctx, args: &BaselineArgs) -> Result<(), CliError> {
    let method = ctx.settings.get("method", args.method, BaselineMethod::Threshold)?;
    let epsilon = ctx.settings.get("epsilon", args.epsilon, DEFAULT_APPROX_EPSILON)?;

    let train_set = read_input_dataset(&args.train)?;
    let test_set = read_input_dataset(&args.test)?;
    let model = fit_threshold(&train_set)?;
    let report = match method {
        BaselineMethod::Threshold => {
            let preds = run_threshold(&model, &test_set);
            score_merged(&preds, &test_set, None)?
        }
        BaselineMethod::Geometric => {
            let (preds, fraction) = run_geometric(&model, &test_set, epsilon);
            score_merged(&preds, &test_set, Some(fraction))?
        }
    };
    write_text(&args.out, &report.to_json())?;

    let mut manifest = ctx.manifest();
    manifest.add_input(&args.train)?;
    manifest.add_input(&args.test)?;
    manifest.add_output(&args.out)?;
    manifest.write_alongside(&args.out)?;
    print!("{}", report.to_text());
    Ok(())
}

// ---------------------------------------------------------------- hist

#[derive(Debug, Args)]
pub struct HistArgs {
    /// Input dataset file
    #[arg(long)]
    pub input: PathBuf,
    /// Output histogram CSV
    #[arg(long)]
    pub out: PathBuf,
}

pub fn hist(ctx: &mut Ctx, args: &HistArgs) -> Result<(), CliError> {
    let dataset = read_input_dataset(&args.input)?;
    let histogram = intensity_histogram(&dataset);
    write_text(&args.out, &histogram.to_csv())?;

    let mut manifest = ctx.manifest();
    manifest.add_input(&args.input)?;
    manifest.add_output(&args.out)?;
    manifest.write_alongside(&args.out)?;
    println!(
        "overlap mass inside single-class support: {:.4}",
        histogram.overlap_mass_in_single_support()
    );
    Ok(())
}

// -------------------------------------------------------------- render

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Input dataset file
    #[arg(long)]
    pub data: PathBuf,
    /// Optional checkpoint; adds prediction renderings
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Samples to render [default: 4]
    #[arg(long)]
    pub count: Option<usize>,
    /// First sample index [default: 0]
    #[arg(long)]
    pub start: Option<usize>,
}

pub fn render(ctx: &mut Ctx, args: &RenderArgs) -> Result<(), CliError> {
    let count = ctx.settings.get("count", args.count, 4)?;
    let start = ctx.settings.get("start", args.start, 0)?;

    let dataset = read_input_dataset(&args.data)?;
    if start >= dataset.len() {
        return Err(CliError::invalid(
            "--start",
            format!("index {start} is out of range for {} samples", dataset.len()),
        ));
    }
    let end = (start + count).min(dataset.len());
    let preds = match &args.model {
        Some(p) => {
            let (params, _) = load_checkpoint(p).map_err(bad_file(p))?;
            let subset = dataset.select(&(start..end).collect::<Vec<_>>());
            Some(predict_dataset(&params, &subset, 8)?)
        }
        None => None,
    };

    fs::create_dir_all(&args.out)
        .map_err(|source| CliError::Io { path: args.out.display().to_string(), source })?;
    let mut manifest = ctx.manifest();
    manifest.add_input(&args.data)?;
    if let Some(p) = &args.model {
        manifest.add_input(p)?;
    }
    let blank = LabelMap::zeros(dataset.h, dataset.w);
    for i in start..end {
        let sample = &dataset.samples[i];
        let input_path = args.out.join(format!("sample_{i}_input.ppm"));
        let truth_path = args.out.join(format!("sample_{i}_truth.ppm"));
        render_overlay(&sample.image, &blank, &input_path)?;
        render_overlay(&sample.image, &sample.label, &truth_path)?;
        manifest.add_output(&input_path)?;
        manifest.add_output(&truth_path)?;
        if let Some(preds) = &preds {
            let pred_path = args.out.join(format!("sample_{i}_pred.ppm"));
            render_overlay(&sample.image, &preds[i - start], &pred_path)?;
            manifest.add_output(&pred_path)?;
        }
    }
    manifest.write_alongside(&args.out)?;
    println!("rendered samples {}..{} into {}", start, end, args.out.display());
    Ok(())
}
