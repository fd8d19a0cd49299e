//! Command-line front end: segment, slice, evaluate, batch, roc.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use mrfseg::ensemble::{self, EnsembleConfig, Optimizer, Polarity};
use mrfseg::harness::{self, RunConfig};
use mrfseg::metrics::{self, MetricReport};
use mrfseg::mrf::Neighborhood;
use mrfseg::{bitplane, imageio};

#[derive(Parser, Debug)]
#[command(
    name = "mrfseg",
    version,
    about = "Unsupervised MRF-ensemble segmentation of microscope cell images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Args, Debug, Default)]
struct GlobalOpts {
    /// Potts coupling strength, in (0, 10]
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Neighborhood system: 4 or 8
    #[arg(long, global = true)]
    neighborhood: Option<u8>,
    /// Optimizer: icm or sa
    #[arg(long, global = true)]
    optimizer: Option<String>,
    /// Maximum ICM sweeps
    #[arg(long, global = true)]
    max_sweeps: Option<usize>,
    /// Simulated annealing initial temperature
    #[arg(long = "sa-t0", global = true)]
    sa_t0: Option<f64>,
    /// Simulated annealing geometric cooling factor, in (0, 1)
    #[arg(long = "sa-cooling", global = true)]
    sa_cooling: Option<f64>,
    /// Simulated annealing stopping temperature
    #[arg(long = "sa-tmin", global = true)]
    sa_tmin: Option<f64>,
    /// Base RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Refit class parameters after each sweep
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    reestimate: Option<bool>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Confidence level for thresholded masks, 0..=7
    #[arg(long, global = true)]
    level: Option<u8>,
    /// Mask file suffix: masks are named <stem><suffix>.png
    #[arg(long, global = true)]
    mask_suffix: Option<String>,
    /// Gray threshold binarizing mask files, 1..=255
    #[arg(long, global = true)]
    mask_threshold: Option<u8>,
    /// Glob selecting dataset images
    #[arg(long, global = true)]
    image_glob: Option<String>,
    /// Comma-separated confidence levels for batch tables
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Worker threads for ensemble members and batch images
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value config file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment one image: probability map plus thresholded mask
    Segment {
        image: PathBuf,
        /// Also write the eight member labellings
        #[arg(long)]
        dump_members: bool,
    },
    /// Write the eight bit planes of an image
    Slice { image: PathBuf },
    /// Compare a segmentation mask against a ground-truth mask
    Evaluate { seg: PathBuf, gt: PathBuf },
    /// Segment and evaluate every paired image in a directory
    Batch { dataset_dir: PathBuf },
    /// Emit per-image and pooled ROC curves for a directory
    Roc { dataset_dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OptimizerKind {
    Icm,
    Sa,
}

/// Fully resolved settings: defaults, then config file, then flags.
#[derive(Debug, Clone)]
struct Settings {
    beta: f64,
    neighborhood: Neighborhood,
    optimizer: OptimizerKind,
    max_sweeps: usize,
    sa_t0: f64,
    sa_cooling: f64,
    sa_tmin: f64,
    seed: u64,
    reestimate: bool,
    out: PathBuf,
    level: u8,
    mask_suffix: String,
    mask_threshold: u8,
    image_glob: String,
    levels: Vec<u8>,
    threads: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            beta: 1.0,
            neighborhood: Neighborhood::Four,
            optimizer: OptimizerKind::Icm,
            max_sweeps: 10,
            sa_t0: 4.0,
            sa_cooling: 0.95,
            sa_tmin: 0.05,
            seed: 0,
            reestimate: false,
            out: PathBuf::from("."),
            level: 3,
            mask_suffix: "_mask".into(),
            mask_threshold: 1,
            image_glob: "*.png".into(),
            levels: (0..8).collect(),
            threads: None,
        }
    }
}

#[derive(Debug)]
struct UsageError(String);

type UsageResult<T> = Result<T, UsageError>;

fn usage<T>(msg: impl Into<String>) -> UsageResult<T> {
    Err(UsageError(msg.into()))
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> UsageResult<T> {
    value
        .parse()
        .map_err(|_| UsageError(format!("invalid value {value:?} for {key}")))
}

fn parse_neighborhood(value: u8) -> UsageResult<Neighborhood> {
    match value {
        4 => Ok(Neighborhood::Four),
        8 => Ok(Neighborhood::Eight),
        other => usage(format!("neighborhood must be 4 or 8, got {other}")),
    }
}

fn parse_optimizer(value: &str) -> UsageResult<OptimizerKind> {
    match value {
        "icm" => Ok(OptimizerKind::Icm),
        "sa" => Ok(OptimizerKind::Sa),
        other => usage(format!("optimizer must be icm or sa, got {other:?}")),
    }
}

fn parse_levels(value: &str) -> UsageResult<Vec<u8>> {
    let levels: Vec<u8> = value
        .split(',')
        .map(|s| parse_as::<u8>("levels", s.trim()))
        .collect::<UsageResult<_>>()?;
    if levels.is_empty() {
        return usage("levels must be a nonempty comma-separated list");
    }
    Ok(levels)
}

impl Settings {
    fn resolve(opts: &GlobalOpts) -> UsageResult<Self> {
        let mut s = Settings::default();
        if let Some(path) = &opts.config {
            let pairs = harness::parse_config_file(path)
                .map_err(|e| UsageError(format!("config file: {e}")))?;
            for (key, value) in pairs {
                s.apply(&key, &value)?;
            }
        }
        if let Some(v) = opts.beta {
            s.beta = v;
        }
        if let Some(v) = opts.neighborhood {
            s.neighborhood = parse_neighborhood(v)?;
        }
        if let Some(v) = &opts.optimizer {
            s.optimizer = parse_optimizer(v)?;
        }
        if let Some(v) = opts.max_sweeps {
            s.max_sweeps = v;
        }
        if let Some(v) = opts.sa_t0 {
            s.sa_t0 = v;
        }
        if let Some(v) = opts.sa_cooling {
            s.sa_cooling = v;
        }
        if let Some(v) = opts.sa_tmin {
            s.sa_tmin = v;
        }
        if let Some(v) = opts.seed {
            s.seed = v;
        }
        if let Some(v) = opts.reestimate {
            s.reestimate = v;
        }
        if let Some(v) = &opts.out {
            s.out = v.clone();
        }
        if let Some(v) = opts.level {
            s.level = v;
        }
        if let Some(v) = &opts.mask_suffix {
            s.mask_suffix = v.clone();
        }
        if let Some(v) = opts.mask_threshold {
            s.mask_threshold = v;
        }
        if let Some(v) = &opts.image_glob {
            s.image_glob = v.clone();
        }
        if let Some(v) = &opts.levels {
            s.levels = parse_levels(v)?;
        }
        if let Some(v) = opts.threads {
            s.threads = Some(v);
        }
        s.validate()?;
        Ok(s)
    }

    fn apply(&mut self, key: &str, value: &str) -> UsageResult<()> {
        match key {
            "beta" => self.beta = parse_as(key, value)?,
            "neighborhood" => self.neighborhood = parse_neighborhood(parse_as(key, value)?)?,
            "optimizer" => self.optimizer = parse_optimizer(value)?,
            "max-sweeps" => self.max_sweeps = parse_as(key, value)?,
            "sa-t0" => self.sa_t0 = parse_as(key, value)?,
            "sa-cooling" => self.sa_cooling = parse_as(key, value)?,
            "sa-tmin" => self.sa_tmin = parse_as(key, value)?,
            "seed" => self.seed = parse_as(key, value)?,
            "reestimate" => self.reestimate = parse_as(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "level" => self.level = parse_as(key, value)?,
            "mask-suffix" => self.mask_suffix = value.to_string(),
            "mask-threshold" => self.mask_threshold = parse_as(key, value)?,
            "image-glob" => self.image_glob = value.to_string(),
            "levels" => self.levels = parse_levels(value)?,
            "threads" => self.threads = Some(parse_as(key, value)?),
            other => return usage(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    fn validate(&self) -> UsageResult<()> {
        if !(self.beta > 0.0 && self.beta <= 10.0) {
            return usage(format!("beta must lie in (0, 10], got {}", self.beta));
        }
        if self.max_sweeps == 0 {
            return usage("max-sweeps must be at least 1");
        }
        if !(self.sa_cooling > 0.0 && self.sa_cooling < 1.0) {
            return usage(format!(
                "sa-cooling must lie in (0, 1), got {}",
                self.sa_cooling
            ));
        }
        if !(self.sa_t0 > self.sa_tmin && self.sa_tmin > 0.0) {
            return usage(format!(
                "require sa-t0 > sa-tmin > 0, got t0={} tmin={}",
                self.sa_t0, self.sa_tmin
            ));
        }
        if self.level > 7 {
            return usage(format!("level must lie in 0..=7, got {}", self.level));
        }
        if self.levels.iter().any(|&l| l > 7) {
            return usage("every level must lie in 0..=7");
        }
        if self.mask_threshold == 0 {
            return usage("mask-threshold must lie in 1..=255");
        }
        Ok(())
    }

    fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            beta: self.beta,
            neighborhood: self.neighborhood,
            optimizer: match self.optimizer {
                OptimizerKind::Icm => Optimizer::Icm {
                    max_sweeps: self.max_sweeps,
                },
                OptimizerKind::Sa => Optimizer::Sa {
                    t0: self.sa_t0,
                    cooling: self.sa_cooling,
                    t_min: self.sa_tmin,
                },
            },
            seed: self.seed,
            reestimate: self.reestimate,
            polarity: Polarity::BrightIsObject,
        }
    }

    fn run_config(&self, dataset_dir: &Path) -> RunConfig {
        RunConfig {
            dataset_dir: dataset_dir.to_path_buf(),
            image_glob: self.image_glob.clone(),
            mask_suffix: self.mask_suffix.clone(),
            mask_threshold: self.mask_threshold,
            ensemble: self.ensemble_config(),
            levels: self.levels.clone(),
        }
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn ensure_out_dir(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn cmd_segment(image_path: &Path, dump_members: bool, s: &Settings) -> anyhow::Result<()> {
    let image = imageio::load_gray(image_path)?;
    let result = ensemble::segment_ensemble(&image, &s.ensemble_config())?;
    ensure_out_dir(&s.out)?;
    let stem = stem_of(image_path);

    let prob = ensemble::confidence_to_image(&result.confidence);
    let prob_path = s.out.join(format!("{stem}_prob.png"));
    imageio::save_gray(&prob, &prob_path)?;

    let mask = ensemble::threshold_confidence(&result.confidence, s.level)?;
    let mask_path = s.out.join(format!("{stem}_mask.png"));
    imageio::save_mask(&mask, &mask_path)?;

    if dump_members {
        for (j, member) in result.members.iter().enumerate() {
            imageio::save_mask(
                &member.to_mask(),
                s.out.join(format!("{stem}_member_{j}.png")),
            )?;
        }
    }
    for (j, report) in result.reports.iter().enumerate() {
        println!(
            "member {j}: energy {:.3}, sweeps {}, converged {}",
            report.final_energy, report.sweeps, report.converged
        );
    }
    println!("wrote {}", prob_path.display());
    println!("wrote {} (level {})", mask_path.display(), s.level);
    Ok(())
}

fn cmd_slice(image_path: &Path, s: &Settings) -> anyhow::Result<()> {
    let image = imageio::load_gray(image_path)?;
    let planes = bitplane::slice(&image);
    ensure_out_dir(&s.out)?;
    let stem = stem_of(image_path);
    for j in 0..8 {
        let path = s.out.join(format!("{stem}_plane_{j}.png"));
        imageio::save_mask(planes.plane(j), &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "undefined".into(),
    }
}

fn fmt_csv(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "nan".into(),
    }
}

fn cmd_evaluate(seg_path: &Path, gt_path: &Path, s: &Settings) -> anyhow::Result<()> {
    let seg = imageio::load_mask(seg_path, s.mask_threshold)?;
    let gt = imageio::load_mask(gt_path, s.mask_threshold)?;
    let counts = metrics::confusion(&seg, &gt)?;
    let r = MetricReport::from_confusion(&counts)?;
    println!(
        "counts   n00 {} n01 {} n10 {} n11 {}",
        counts.n00, counts.n01, counts.n10, counts.n11
    );
    println!("SD_norm  {:.6}", r.sd_normalized);
    println!("SD_raw   {}", r.sd_raw);
    println!("SEN      {}", fmt_metric(r.sen));
    println!("SPE      {}", fmt_metric(r.spe));
    println!("PPV      {}", fmt_metric(r.ppv));
    println!("FSCORE   {}", fmt_metric(r.fscore));
    println!("RI       {:.6}", r.rand_index);
    println!("SD_norm,SD_raw,SEN,SPE,PPV,FSCORE,RI");
    println!(
        "{:.6},{},{},{},{},{},{:.6}",
        r.sd_normalized,
        r.sd_raw,
        fmt_csv(r.sen),
        fmt_csv(r.spe),
        fmt_csv(r.ppv),
        fmt_csv(r.fscore),
        r.rand_index
    );
    Ok(())
}

fn cmd_batch(dataset_dir: &Path, s: &Settings) -> anyhow::Result<()> {
    let report = harness::run_batch(&s.run_config(dataset_dir))?;
    ensure_out_dir(&s.out)?;
    harness::write_batch_csvs(&report, &s.out)?;
    println!(
        "evaluated {} image(s), skipped {} unpaired",
        report.per_image.len(),
        report.skipped.len()
    );
    println!("mean-of-metrics aggregate:");
    println!("level  SD_norm  SEN     SPE     PPV     FSCORE  RI");
    for row in &report.mean_rows {
        println!(
            "{:<6} {:<8} {:<7} {:<7} {:<7} {:<7} {}",
            row.level,
            fmt_metric(row.sd_norm),
            fmt_metric(row.sen),
            fmt_metric(row.spe),
            fmt_metric(row.ppv),
            fmt_metric(row.fscore),
            fmt_metric(row.rand_index),
        );
    }
    for name in [
        "per_image.csv",
        "aggregate_mean.csv",
        "aggregate_pooled.csv",
    ] {
        println!("wrote {}", s.out.join(name).display());
    }
    Ok(())
}

fn cmd_roc(dataset_dir: &Path, s: &Settings) -> anyhow::Result<()> {
    let report = harness::emit_roc(&s.run_config(dataset_dir))?;
    ensure_out_dir(&s.out)?;
    harness::write_roc_csvs(&report, &s.out)?;
    for (stem, curve) in &report.per_image {
        println!("{stem}: auc {:.6}", curve.auc);
    }
    match &report.pooled {
        Some(curve) => println!("pooled: auc {:.6}", curve.auc),
        None => println!("pooled: undefined (single-class ground truth)"),
    }
    println!("wrote ROC CSVs to {}", s.out.display());
    Ok(())
}

fn run(command: &Command, s: &Settings) -> anyhow::Result<()> {
    if let Some(n) = s.threads {
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing thread pool")?;
        #[cfg(not(feature = "parallel"))]
        {
            let _ = n;
            eprintln!("warning: built without the parallel feature; --threads ignored");
        }
    }
    match command {
        Command::Segment {
            image,
            dump_members,
        } => cmd_segment(image, *dump_members, s),
        Command::Slice { image } => cmd_slice(image, s),
        Command::Evaluate { seg, gt } => cmd_evaluate(seg, gt, s),
        Command::Batch { dataset_dir } => cmd_batch(dataset_dir, s),
        Command::Roc { dataset_dir } => cmd_roc(dataset_dir, s),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let settings = match Settings::resolve(&cli.opts) {
        Ok(s) => s,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command, &settings) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
