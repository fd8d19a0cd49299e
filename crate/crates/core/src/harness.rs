//! Batch evaluation over a dataset directory.
//!
//! Segments every paired image, evaluates each confidence level against the
//! ground truth, and aggregates per level in two ways: the unweighted mean
//! of per-image metrics, and metrics of the pooled confusion counts (sum
//! counts first, divide once). The two differ whenever image sizes or
//! difficulty vary; both tables are emitted because the source material
//! does not say which convention its results table used.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::ensemble::{segment_ensemble, threshold_confidence, ConfidenceMap, EnsembleConfig};
use crate::imageio::{self, BinaryMask};
use crate::metrics::{self, ConfusionCounts, MetricReport, RocCurve};
use crate::{Error, Result};

/// Everything a batch run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub image_glob: String,
    pub mask_suffix: String,
    pub mask_threshold: u8,
    pub ensemble: EnsembleConfig,
    /// Confidence levels to report, each in 0..=7.
    pub levels: Vec<u8>,
}

impl RunConfig {
    pub fn new(dataset_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset_dir: dataset_dir.into(),
            image_glob: "*.png".into(),
            mask_suffix: "_mask".into(),
            mask_threshold: 1,
            ensemble: EnsembleConfig::default(),
            levels: (0..8).collect(),
        }
    }
}

/// Per-level aggregate over the dataset. `None` marks a metric that was
/// undefined for every image (or for the pooled counts).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub level: u8,
    pub image_count: usize,
    pub sd_norm: Option<f64>,
    pub sd_raw: Option<f64>,
    pub sen: Option<f64>,
    pub spe: Option<f64>,
    pub ppv: Option<f64>,
    pub fscore: Option<f64>,
    pub rand_index: Option<f64>,
}

/// Metrics of one image at every requested level.
#[derive(Debug, Clone)]
pub struct ImageEval {
    pub stem: String,
    pub rows: Vec<(u8, MetricReport)>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub per_image: Vec<ImageEval>,
    pub mean_rows: Vec<AggregateRow>,
    pub pooled_rows: Vec<AggregateRow>,
    pub skipped: Vec<PathBuf>,
}

/// Per-image ROC plus the pooled curve over summed confusion counts.
#[derive(Debug, Clone)]
pub struct RocReport {
    pub per_image: Vec<(String, RocCurve)>,
    pub pooled: Option<RocCurve>,
    pub skipped: Vec<PathBuf>,
}

struct EvaluatedImage {
    stem: String,
    confidence: ConfidenceMap,
    gt: BinaryMask,
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn segment_pair(image_path: &Path, mask_path: &Path, config: &RunConfig) -> Result<EvaluatedImage> {
    let image = imageio::load_gray(image_path)?;
    let gt = imageio::load_mask(mask_path, config.mask_threshold)?;
    if image.width() != gt.width() || image.height() != gt.height() {
        return Err(Error::DimensionMismatch(
            image.width(),
            image.height(),
            gt.width(),
            gt.height(),
        ));
    }
    let result = segment_ensemble(&image, &config.ensemble)?;
    Ok(EvaluatedImage {
        stem: stem_of(image_path),
        confidence: result.confidence,
        gt,
    })
}

/// Segments every paired image in dataset order. Unpaired images are
/// skipped and reported; an empty or fully unpaired dataset is an error.
fn evaluate_dataset(config: &RunConfig) -> Result<(Vec<EvaluatedImage>, Vec<PathBuf>)> {
    let entries =
        imageio::list_dataset(&config.dataset_dir, &config.image_glob, &config.mask_suffix)?;
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (image, mask) in entries {
        match mask {
            Some(mask) => pairs.push((image, mask)),
            None => skipped.push(image),
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset(config.dataset_dir.clone()));
    }
    for path in &skipped {
        eprintln!("warning: no mask for {}, skipping", path.display());
    }

    #[cfg(feature = "parallel")]
    let evaluated: Result<Vec<_>> = pairs
        .par_iter()
        .map(|(img, mask)| segment_pair(img, mask, config))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let evaluated: Result<Vec<_>> = pairs
        .iter()
        .map(|(img, mask)| segment_pair(img, mask, config))
        .collect();
    Ok((evaluated?, skipped))
}

fn validate_levels(levels: &[u8]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParam("no confidence levels requested".into()));
    }
    if let Some(&bad) = levels.iter().find(|&&l| l > 7) {
        return Err(Error::LevelOutOfRange(bad));
    }
    Ok(())
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values.flatten() {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

fn mean_aggregate(level: u8, evals: &[ImageEval]) -> AggregateRow {
    let reports: Vec<&MetricReport> = evals
        .iter()
        .flat_map(|e| e.rows.iter().filter(|(l, _)| *l == level).map(|(_, r)| r))
        .collect();
    AggregateRow {
        level,
        image_count: reports.len(),
        sd_norm: mean_of(reports.iter().map(|r| Some(r.sd_normalized))),
        sd_raw: mean_of(reports.iter().map(|r| Some(r.sd_raw as f64))),
        sen: mean_of(reports.iter().map(|r| r.sen)),
        spe: mean_of(reports.iter().map(|r| r.spe)),
        ppv: mean_of(reports.iter().map(|r| r.ppv)),
        fscore: mean_of(reports.iter().map(|r| r.fscore)),
        rand_index: mean_of(reports.iter().map(|r| Some(r.rand_index))),
    }
}

fn pooled_aggregate(
    level: u8,
    pooled: &ConfusionCounts,
    image_count: usize,
) -> Result<AggregateRow> {
    let report = MetricReport::from_confusion(pooled)?;
    Ok(AggregateRow {
        level,
        image_count,
        sd_norm: Some(report.sd_normalized),
        sd_raw: Some(report.sd_raw as f64),
        sen: report.sen,
        spe: report.spe,
        ppv: report.ppv,
        fscore: report.fscore,
        rand_index: Some(report.rand_index),
    })
}

/// Runs the full pipeline over the dataset and aggregates per level.
pub fn run_batch(config: &RunConfig) -> Result<BatchReport> {
    validate_levels(&config.levels)?;
    let (evaluated, skipped) = evaluate_dataset(config)?;

    let mut per_image = Vec::with_capacity(evaluated.len());
    let mut pooled: Vec<(u8, ConfusionCounts)> = config
        .levels
        .iter()
        .map(|&l| (l, ConfusionCounts::default()))
        .collect();
    for eval in &evaluated {
        let mut rows = Vec::with_capacity(config.levels.len());
        for (slot, &level) in pooled.iter_mut().zip(&config.levels) {
            let seg = threshold_confidence(&eval.confidence, level)?;
            let counts = metrics::confusion(&seg, &eval.gt)?;
            slot.1.add(&counts);
            rows.push((level, MetricReport::from_confusion(&counts)?));
        }
        per_image.push(ImageEval {
            stem: eval.stem.clone(),
            rows,
        });
    }

    let mean_rows = config
        .levels
        .iter()
        .map(|&l| mean_aggregate(l, &per_image))
        .collect();
    let pooled_rows = pooled
        .iter()
        .map(|(l, c)| pooled_aggregate(*l, c, evaluated.len()))
        .collect::<Result<_>>()?;
    Ok(BatchReport {
        per_image,
        mean_rows,
        pooled_rows,
        skipped,
    })
}

/// Computes per-image ROC curves and the pooled curve from summed
/// per-level confusion counts. Images whose ground truth holds a single
/// class have no ROC of their own but still pool.
pub fn emit_roc(config: &RunConfig) -> Result<RocReport> {
    let (evaluated, skipped) = evaluate_dataset(config)?;
    let mut per_image = Vec::new();
    let mut pooled = [ConfusionCounts::default(); 8];
    for eval in &evaluated {
        let mut counts = [ConfusionCounts::default(); 8];
        for (level, slot) in counts.iter_mut().enumerate() {
            let seg = threshold_confidence(&eval.confidence, level as u8)?;
            *slot = metrics::confusion(&seg, &eval.gt)?;
            pooled[level].add(slot);
        }
        match metrics::roc_from_level_counts(&counts) {
            Ok(curve) => per_image.push((eval.stem.clone(), curve)),
            Err(Error::SingleClassGroundTruth) => {
                eprintln!(
                    "warning: single-class ground truth for {}, no per-image ROC",
                    eval.stem
                );
            }
            Err(e) => return Err(e),
        }
    }
    let pooled = match metrics::roc_from_level_counts(&pooled) {
        Ok(curve) => Some(curve),
        Err(Error::SingleClassGroundTruth) => None,
        Err(e) => return Err(e),
    };
    Ok(RocReport {
        per_image,
        pooled,
        skipped,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "nan".into(),
    }
}

const METRIC_HEADER: &str = "level,SD_norm,SD_raw,SEN,SPE,PPV,FSCORE,RI";

fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(METRIC_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.level,
            fmt_opt(r.sd_norm),
            fmt_opt(r.sd_raw),
            fmt_opt(r.sen),
            fmt_opt(r.spe),
            fmt_opt(r.ppv),
            fmt_opt(r.fscore),
            fmt_opt(r.rand_index),
        ));
    }
    out
}

fn per_image_csv(evals: &[ImageEval]) -> String {
    let mut out = String::from("image,");
    out.push_str(METRIC_HEADER);
    out.push('\n');
    for e in evals {
        for (level, r) in &e.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                e.stem,
                level,
                fmt_opt(Some(r.sd_normalized)),
                r.sd_raw,
                fmt_opt(r.sen),
                fmt_opt(r.spe),
                fmt_opt(r.ppv),
                fmt_opt(r.fscore),
                fmt_opt(Some(r.rand_index)),
            ));
        }
    }
    out
}

fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("level,fpr,tpr\n");
    for p in &curve.level_points {
        out.push_str(&format!("{},{:.6},{:.6}\n", p.level, p.fpr, p.tpr));
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(contents.as_bytes())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `per_image.csv`, `aggregate_mean.csv`, and `aggregate_pooled.csv`.
pub fn write_batch_csvs(report: &BatchReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_file(
        &out_dir.join("per_image.csv"),
        &per_image_csv(&report.per_image),
    )?;
    write_file(
        &out_dir.join("aggregate_mean.csv"),
        &aggregate_csv(&report.mean_rows),
    )?;
    write_file(
        &out_dir.join("aggregate_pooled.csv"),
        &aggregate_csv(&report.pooled_rows),
    )
}

/// Writes `roc_<stem>.csv` per image, `roc_pooled.csv`, and `auc.csv`.
pub fn write_roc_csvs(report: &RocReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut auc = String::from("image,auc\n");
    for (stem, curve) in &report.per_image {
        write_file(&out_dir.join(format!("roc_{stem}.csv")), &roc_csv(curve))?;
        auc.push_str(&format!("{stem},{:.6}\n", curve.auc));
    }
    if let Some(pooled) = &report.pooled {
        write_file(&out_dir.join("roc_pooled.csv"), &roc_csv(pooled))?;
        auc.push_str(&format!("pooled,{:.6}\n", pooled.auc));
    }
    write_file(&out_dir.join("auc.csv"), &auc)
}

/// Parses a `key=value` config file: one pair per line, `#` comments and
/// blank lines ignored. Later occurrences of a key win.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => out.push((key.trim().to_string(), value.trim().to_string())),
            None => {
                return Err(Error::InvalidParam(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(out)
}
