//! The 8-member MRF ensemble and pixelwise voting.
//!
//! Each bit plane seeds one optimization run: class parameters are
//! estimated from the plane, the optimizer starts from the plane as its
//! initial configuration, and the result is oriented so that label 1 marks
//! the brighter class. The vote count per pixel (0..=8) forms the
//! confidence map; thresholding it at a confidence level yields a mask.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::bitplane;
use crate::imageio::{BinaryMask, GrayImage};
use crate::mrf::{self, LabelField, MrfModel, Neighborhood, OptimizeReport, SaSchedule};
use crate::{Error, Result};

/// 2-D field of vote counts in 0..=8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfidenceMap {
    width: usize,
    height: usize,
    votes: Vec<u8>,
}

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, votes: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroSized);
        }
        if votes.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "vote buffer length {} does not match {}x{}",
                votes.len(),
                width,
                height
            )));
        }
        if votes.iter().any(|&v| v > 8) {
            return Err(Error::InvalidParam("vote counts must lie in 0..=8".into()));
        }
        Ok(Self {
            width,
            height,
            votes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn votes(&self) -> &[u8] {
        &self.votes
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.votes[y * self.width + x]
    }
}

/// Optimizer choice for the ensemble members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Icm { max_sweeps: usize },
    Sa { t0: f64, cooling: f64, t_min: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Icm { max_sweeps: 10 }
    }
}

/// How each member decides which of its two labels means "object".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    /// Flip so that label 1 marks the class of higher mean intensity.
    #[default]
    BrightIsObject,
    /// Keep whatever labels the optimizer produced.
    KeepAsIs,
}

/// Shared settings for all eight ensemble members.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub beta: f64,
    pub neighborhood: Neighborhood,
    pub optimizer: Optimizer,
    /// Base RNG seed; member `j` runs with a seed mixed from this and `j`.
    pub seed: u64,
    /// Refit class parameters from the current labelling after each sweep.
    pub reestimate: bool,
    /// Object-polarity rule applied to every member before voting.
    pub polarity: Polarity,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            neighborhood: Neighborhood::Four,
            optimizer: Optimizer::default(),
            seed: 0,
            reestimate: false,
            polarity: Polarity::BrightIsObject,
        }
    }
}

/// Everything one ensemble run produces.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub confidence: ConfidenceMap,
    /// Oriented member labellings, indexed by bit plane.
    pub members: Vec<LabelField>,
    pub reports: Vec<OptimizeReport>,
}

/// splitmix64-style mixer for deriving per-member seeds.
pub(crate) fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn class_mean(image: &GrayImage, labels: &LabelField, class: u8) -> Option<f64> {
    let mut sum = 0u64;
    let mut count = 0u64;
    for (&v, &l) in image.pixels().iter().zip(labels.labels()) {
        if l == class {
            sum += v as u64;
            count += 1;
        }
    }
    (count > 0).then(|| sum as f64 / count as f64)
}

/// Flips the labelling globally, if needed, so that label 1 marks the class
/// of higher mean image intensity (cells are bright in fluorescence
/// imagery). Equal means leave the input unchanged; an empty class takes
/// the mirrored mean `255 - other`, the same degeneracy convention as
/// parameter estimation.
pub fn orient_object_label(image: &GrayImage, labels: &LabelField) -> Result<LabelField> {
    if image.width() != labels.width() || image.height() != labels.height() {
        return Err(Error::DimensionMismatch(
            image.width(),
            image.height(),
            labels.width(),
            labels.height(),
        ));
    }
    let m0 = class_mean(image, labels, 0);
    let m1 = class_mean(image, labels, 1);
    let (m0, m1) = match (m0, m1) {
        (Some(a), Some(b)) => (a, b),
        (Some(a), None) => (a, 255.0 - a),
        (None, Some(b)) => (255.0 - b, b),
        (None, None) => unreachable!("a labelling has at least one pixel"),
    };
    let mut out = labels.clone();
    if m0 > m1 {
        out.invert();
    }
    Ok(out)
}

fn run_member(
    image: &GrayImage,
    plane: &BinaryMask,
    config: &EnsembleConfig,
    member: usize,
) -> Result<(LabelField, OptimizeReport)> {
    let init = LabelField::from_mask(plane);
    let params = mrf::estimate_params(image, &init)?;
    let model = MrfModel {
        params,
        beta: config.beta,
        neighborhood: config.neighborhood,
    };
    let (optimized, report) = match config.optimizer {
        Optimizer::Icm { max_sweeps } => {
            mrf::icm(image, &init, &model, max_sweeps, config.reestimate)?
        }
        Optimizer::Sa { t0, cooling, t_min } => {
            let schedule = SaSchedule {
                t0,
                cooling,
                t_min,
                seed: mix_seed(config.seed, member as u64),
            };
            mrf::simulated_annealing(image, &init, &model, &schedule, config.reestimate)?
        }
    };
    let oriented = match config.polarity {
        Polarity::BrightIsObject => orient_object_label(image, &optimized)?,
        Polarity::KeepAsIs => optimized,
    };
    Ok((oriented, report))
}

/// Runs the optimizer from each of the 8 bit planes and votes pixelwise.
///
/// Member runs are independent; with the `parallel` feature they execute on
/// the rayon pool. Voting is an ordered reduction, so the result is
/// deterministic either way.
pub fn segment_ensemble(image: &GrayImage, config: &EnsembleConfig) -> Result<EnsembleResult> {
    if config.beta <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "beta must be positive, got {}",
            config.beta
        )));
    }
    let planes = bitplane::slice(image);

    #[cfg(feature = "parallel")]
    let outcomes: Result<Vec<_>> = (0..8usize)
        .into_par_iter()
        .map(|j| run_member(image, planes.plane(j), config, j))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Result<Vec<_>> = (0..8usize)
        .map(|j| run_member(image, planes.plane(j), config, j))
        .collect();
    let outcomes = outcomes?;

    let (w, h) = (image.width(), image.height());
    let mut votes = vec![0u8; w * h];
    for (member, _) in &outcomes {
        for (acc, &l) in votes.iter_mut().zip(member.labels()) {
            *acc += l;
        }
    }
    let (members, reports) = outcomes.into_iter().unzip();
    Ok(EnsembleResult {
        confidence: ConfidenceMap::new(w, h, votes)?,
        members,
        reports,
    })
}

/// Thresholds the confidence map: mask = 1 where `votes > level`.
///
/// Level 0 admits any pixel with at least one vote; level 7 requires
/// unanimity. Masks are nested: a higher level never adds pixels.
pub fn threshold_confidence(map: &ConfidenceMap, level: u8) -> Result<BinaryMask> {
    if level > 7 {
        return Err(Error::LevelOutOfRange(level));
    }
    let data = map.votes.iter().map(|&v| u8::from(v > level)).collect();
    BinaryMask::new(map.width, map.height, data)
}

/// Renders the confidence map as a grayscale image, `votes * 255 / 8`
/// rounded half up (the probability-map visualization).
pub fn confidence_to_image(map: &ConfidenceMap) -> GrayImage {
    let data = map
        .votes
        .iter()
        .map(|&v| (v as f64 * 255.0 / 8.0).round() as u8)
        .collect();
    GrayImage::new(map.width, map.height, data).expect("map dimensions are valid")
}
