//! Pixelwise evaluation measures and the empirical ROC.
//!
//! All measures derive from the four confusion counts between a
//! segmentation S and a ground truth G:
//! n11 (in both), n00 (in neither), n01 (G only), n10 (S only).
//!
//! Division-by-zero cases are reported as undefined (`None`) rather than
//! silently zeroed; the one conventional exception is F-score(0, 0) = 0.

use crate::ensemble::{threshold_confidence, ConfidenceMap};
use crate::imageio::BinaryMask;
use crate::{Error, Result};

/// The four pixel counts underlying every metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    /// Pools counts from another comparison (e.g. across images).
    pub fn add(&mut self, other: &ConfusionCounts) {
        self.n00 += other.n00;
        self.n01 += other.n01;
        self.n10 += other.n10;
        self.n11 += other.n11;
    }
}

/// Counts agreement between a segmentation and a ground truth mask.
pub fn confusion(seg: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    if seg.width() != gt.width() || seg.height() != gt.height() {
        return Err(Error::DimensionMismatch(
            seg.width(),
            seg.height(),
            gt.width(),
            gt.height(),
        ));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &g) in seg.values().iter().zip(gt.values()) {
        match (s, g) {
            (0, 0) => c.n00 += 1,
            (0, _) => c.n01 += 1,
            (_, 0) => c.n10 += 1,
            _ => c.n11 += 1,
        }
    }
    Ok(c)
}

/// Normalized symmetric difference `(n01 + n10) / n`: the fraction of
/// pixels in exactly one of the two masks.
pub fn symmetric_difference(c: &ConfusionCounts) -> Result<f64> {
    let n = c.total();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((c.n01 + c.n10) as f64 / n as f64)
}

/// Raw symmetric difference `n01 + n10` in pixels.
pub fn symmetric_difference_raw(c: &ConfusionCounts) -> u64 {
    c.n01 + c.n10
}

/// `n11 / (n11 + n01)`; `None` when the ground truth has no positives.
pub fn sensitivity(c: &ConfusionCounts) -> Option<f64> {
    let denom = c.n11 + c.n01;
    (denom > 0).then(|| c.n11 as f64 / denom as f64)
}

/// `n00 / (n00 + n10)`; `None` when the ground truth has no negatives.
pub fn specificity(c: &ConfusionCounts) -> Option<f64> {
    let denom = c.n00 + c.n10;
    (denom > 0).then(|| c.n00 as f64 / denom as f64)
}

/// `n11 / (n11 + n10)`; `None` when the segmentation marks nothing.
pub fn ppv(c: &ConfusionCounts) -> Option<f64> {
    let denom = c.n11 + c.n10;
    (denom > 0).then(|| c.n11 as f64 / denom as f64)
}

/// Harmonic mean `2 * sen * ppv / (sen + ppv)`, with F(0, 0) = 0 by
/// convention.
pub fn fscore(sen: f64, ppv: f64) -> f64 {
    if sen + ppv == 0.0 {
        return 0.0;
    }
    2.0 * sen * ppv / (sen + ppv)
}

/// Pixelwise agreement `(n11 + n00) / n`.
///
/// Computed as the complement of the normalized symmetric difference so
/// that `RI + SD == 1` holds exactly in floating point; the two partition
/// the same pixel count.
pub fn rand_index(c: &ConfusionCounts) -> Result<f64> {
    Ok(1.0 - symmetric_difference(c)?)
}

/// Every scalar measure for one (segmentation, ground truth) comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub sd_normalized: f64,
    pub sd_raw: u64,
    pub sen: Option<f64>,
    pub spe: Option<f64>,
    pub ppv: Option<f64>,
    pub fscore: Option<f64>,
    pub rand_index: f64,
}

impl MetricReport {
    pub fn from_confusion(c: &ConfusionCounts) -> Result<Self> {
        let sen = sensitivity(c);
        let p = ppv(c);
        Ok(Self {
            sd_normalized: symmetric_difference(c)?,
            sd_raw: symmetric_difference_raw(c),
            sen,
            spe: specificity(c),
            ppv: p,
            fscore: match (sen, p) {
                (Some(s), Some(p)) => Some(fscore(s, p)),
                _ => None,
            },
            rand_index: rand_index(c)?,
        })
    }
}

/// One ROC operating point, from thresholding at a confidence level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub level: u8,
    pub fpr: f64,
    pub tpr: f64,
}

/// Empirical ROC over the eight confidence levels plus the (0,0) and (1,1)
/// anchors, with trapezoidal area.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Operating points in level order (0..=7).
    pub level_points: Vec<RocPoint>,
    /// Level points plus anchors, sorted by (fpr, tpr) for integration.
    pub curve: Vec<(f64, f64)>,
    pub auc: f64,
}

fn trapezoid_area(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Builds the ROC from per-level confusion counts (index = level).
///
/// Errors with [`Error::SingleClassGroundTruth`] unless the pooled ground
/// truth contains both classes.
pub fn roc_from_level_counts(counts: &[ConfusionCounts; 8]) -> Result<RocCurve> {
    let mut level_points = Vec::with_capacity(8);
    for (level, c) in counts.iter().enumerate() {
        let tpr = sensitivity(c).ok_or(Error::SingleClassGroundTruth)?;
        let spe = specificity(c).ok_or(Error::SingleClassGroundTruth)?;
        level_points.push(RocPoint {
            level: level as u8,
            fpr: 1.0 - spe,
            tpr,
        });
    }
    let mut curve: Vec<(f64, f64)> = level_points.iter().map(|p| (p.fpr, p.tpr)).collect();
    curve.push((0.0, 0.0));
    curve.push((1.0, 1.0));
    curve.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let auc = trapezoid_area(&curve);
    Ok(RocCurve {
        level_points,
        curve,
        auc,
    })
}

/// ROC of a confidence map against a ground truth with both classes.
pub fn roc_from_confidence(map: &ConfidenceMap, gt: &BinaryMask) -> Result<RocCurve> {
    if map.width() != gt.width() || map.height() != gt.height() {
        return Err(Error::DimensionMismatch(
            map.width(),
            map.height(),
            gt.width(),
            gt.height(),
        ));
    }
    let mut counts = [ConfusionCounts::default(); 8];
    for (level, slot) in counts.iter_mut().enumerate() {
        let seg = threshold_confidence(map, level as u8)?;
        *slot = confusion(&seg, gt)?;
    }
    roc_from_level_counts(&counts)
}
