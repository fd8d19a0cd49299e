//! Binary Markov Random Field energy model and its optimizers.
//!
//! The energy of a labelling is the sum of a per-pixel data term (Gaussian
//! negative log-likelihood of the intensity under the label's class
//! parameters) and a Potts smoothness term on neighboring pixels (`-beta`
//! for equal labels, `+beta` otherwise). Two minimizers are provided:
//! iterated conditional modes (greedy coordinate descent) and simulated
//! annealing (Metropolis flips under a geometric cooling schedule).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imageio::{BinaryMask, GrayImage};
use crate::{Error, Result};

/// sqrt(2*pi), for the Gaussian normalization constant.
const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Lower bound on class standard deviations. Bit-plane initial labellings
/// can produce zero-variance classes (constant regions); the floor keeps
/// every singleton energy finite.
pub const STD_FLOOR: f64 = 0.5;

/// Per-label Gaussian parameters (gray levels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassParams {
    pub mean: f64,
    pub std: f64,
}

/// Pixel neighborhood system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighborhood {
    #[default]
    Four,
    Eight,
}

impl Neighborhood {
    /// All neighbor offsets.
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Neighborhood::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }

    /// Offsets that enumerate each unordered neighbor pair exactly once
    /// when scanned in raster order.
    fn forward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Four => &[(1, 0), (0, 1)],
            Neighborhood::Eight => &[(1, 0), (0, 1), (1, 1), (-1, 1)],
        }
    }
}

/// The two-class MRF model: Gaussian class parameters, coupling strength,
/// and neighborhood system.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfModel {
    pub params: [ClassParams; 2],
    pub beta: f64,
    pub neighborhood: Neighborhood,
}

/// 2-D field of binary labels, one MRF configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelField {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroSized);
        }
        if labels.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "label buffer length {} does not match {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        if labels.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParam("labels must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            labels: mask.values().to_vec(),
        }
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::new(self.width, self.height, self.labels.clone())
            .expect("labels are already binary")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Flips every label in place.
    pub fn invert(&mut self) {
        for l in &mut self.labels {
            *l = 1 - *l;
        }
    }
}

/// Geometric cooling schedule for simulated annealing.
///
/// One full raster sweep runs per temperature step; the temperature is then
/// multiplied by `cooling` until it drops below `t_min`. The defaults suit
/// couplings around the default beta; hotter landscapes need a larger `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaSchedule {
    pub t0: f64,
    pub cooling: f64,
    pub t_min: f64,
    pub seed: u64,
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self {
            t0: 4.0,
            cooling: 0.95,
            t_min: 0.05,
            seed: 0,
        }
    }
}

impl SaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > self.t_min && self.t_min > 0.0) {
            return Err(Error::InvalidParam(format!(
                "require t0 > t_min > 0, got t0={} t_min={}",
                self.t0, self.t_min
            )));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidParam(format!(
                "cooling factor must lie in (0,1), got {}",
                self.cooling
            )));
        }
        Ok(())
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeReport {
    pub final_energy: f64,
    pub sweeps: usize,
    pub converged: bool,
}

fn check_dims(image: &GrayImage, labels: &LabelField) -> Result<()> {
    if image.width() != labels.width() || image.height() != labels.height() {
        return Err(Error::DimensionMismatch(
            image.width(),
            image.height(),
            labels.width(),
            labels.height(),
        ));
    }
    Ok(())
}

/// Estimates per-class Gaussian parameters from a labelling.
///
/// Means use exact integer sums; the standard deviation is the population
/// form (divide by the class size), floored at [`STD_FLOOR`]. An empty
/// class receives `mean = 255 - other.mean` and `std = STD_FLOOR`, so it
/// still competes for intensity-extreme pixels.
pub fn estimate_params(image: &GrayImage, labels: &LabelField) -> Result<[ClassParams; 2]> {
    check_dims(image, labels)?;
    let mut sum = [0u64; 2];
    let mut count = [0u64; 2];
    for (&v, &l) in image.pixels().iter().zip(labels.labels()) {
        sum[l as usize] += v as u64;
        count[l as usize] += 1;
    }
    let mut mean = [0.0f64; 2];
    for c in 0..2 {
        if count[c] > 0 {
            mean[c] = sum[c] as f64 / count[c] as f64;
        }
    }
    let mut sq_dev = [0.0f64; 2];
    for (&v, &l) in image.pixels().iter().zip(labels.labels()) {
        let d = v as f64 - mean[l as usize];
        sq_dev[l as usize] += d * d;
    }
    let mut out = [ClassParams {
        mean: 0.0,
        std: STD_FLOOR,
    }; 2];
    for c in 0..2 {
        if count[c] > 0 {
            out[c] = ClassParams {
                mean: mean[c],
                std: (sq_dev[c] / count[c] as f64).sqrt().max(STD_FLOOR),
            };
        }
    }
    for c in 0..2 {
        if count[c] == 0 {
            out[c] = ClassParams {
                mean: 255.0 - out[1 - c].mean,
                std: STD_FLOOR,
            };
        }
    }
    Ok(out)
}

/// Gaussian negative log-likelihood of `intensity` under `label`'s class:
/// `ln(sqrt(2*pi) * std) + (intensity - mean)^2 / (2 * std^2)`.
#[inline]
pub fn singleton_energy(intensity: u8, label: u8, model: &MrfModel) -> f64 {
    let p = model.params[label as usize];
    let d = intensity as f64 - p.mean;
    (SQRT_2PI * p.std).ln() + (d * d) / (2.0 * p.std * p.std)
}

/// Potts pair term: `-beta` when the labels agree, `+beta` otherwise.
#[inline]
pub fn doubleton_energy(label_a: u8, label_b: u8, beta: f64) -> f64 {
    if label_a == label_b {
        -beta
    } else {
        beta
    }
}

/// Energy contribution of assigning `candidate` at `(x, y)`: its singleton
/// term plus the pair terms to every in-bounds neighbor.
///
/// Panics if `(x, y)` lies outside the field.
pub fn local_energy(
    image: &GrayImage,
    labels: &LabelField,
    x: usize,
    y: usize,
    candidate: u8,
    model: &MrfModel,
) -> f64 {
    let (w, h) = (labels.width, labels.height);
    assert!(x < w && y < h, "pixel ({x},{y}) out of bounds {w}x{h}");
    let mut e = singleton_energy(image.get(x, y), candidate, model);
    for &(dx, dy) in model.neighborhood.offsets() {
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
            let neighbor = labels.labels[ny as usize * w + nx as usize];
            e += doubleton_energy(candidate, neighbor, model.beta);
        }
    }
    e
}

/// Global energy: all singleton terms plus one doubleton term per distinct
/// neighbor pair.
pub fn global_energy(image: &GrayImage, labels: &LabelField, model: &MrfModel) -> Result<f64> {
    check_dims(image, labels)?;
    let (w, h) = (labels.width, labels.height);
    let mut energy = 0.0;
    for y in 0..h {
        for x in 0..w {
            energy += singleton_energy(image.get(x, y), labels.get(x, y), model);
        }
    }
    for y in 0..h {
        for x in 0..w {
            let here = labels.get(x, y);
            for &(dx, dy) in model.neighborhood.forward_offsets() {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    energy += doubleton_energy(
                        here,
                        labels.labels[ny as usize * w + nx as usize],
                        model.beta,
                    );
                }
            }
        }
    }
    Ok(energy)
}

/// Iterated conditional modes: raster-order sweeps assigning each pixel the
/// label of lower local energy, keeping the current label on exact ties.
///
/// Stops after a sweep that changes no pixel (`converged = true`) or after
/// `max_sweeps`. With `reestimate` the class parameters are refit from the
/// current labelling after every sweep; the monotone-descent guarantee only
/// holds with `reestimate = false`.
pub fn icm(
    image: &GrayImage,
    initial: &LabelField,
    model: &MrfModel,
    max_sweeps: usize,
    reestimate: bool,
) -> Result<(LabelField, OptimizeReport)> {
    check_dims(image, initial)?;
    if max_sweeps == 0 {
        return Err(Error::InvalidParam("max_sweeps must be at least 1".into()));
    }
    let mut labels = initial.clone();
    let mut model = model.clone();
    let (w, h) = (labels.width, labels.height);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        let mut changed = 0usize;
        for y in 0..h {
            for x in 0..w {
                let current = labels.labels[y * w + x];
                let flipped = 1 - current;
                let e_keep = local_energy(image, &labels, x, y, current, &model);
                let e_flip = local_energy(image, &labels, x, y, flipped, &model);
                if e_flip < e_keep {
                    labels.labels[y * w + x] = flipped;
                    changed += 1;
                }
            }
        }
        sweeps += 1;
        if reestimate {
            model.params = estimate_params(image, &labels)?;
        }
        if changed == 0 {
            converged = true;
            break;
        }
    }
    let final_energy = global_energy(image, &labels, &model)?;
    Ok((
        labels,
        OptimizeReport {
            final_energy,
            sweeps,
            converged,
        },
    ))
}

/// Simulated annealing with single-pixel Metropolis flips.
///
/// At temperature `T`, a proposed flip with local-energy change `dE` is
/// accepted when `dE <= 0`, otherwise with probability `exp(-dE / T)`. One
/// full raster sweep runs per temperature step. The best labelling seen
/// after any accepted flip is returned; the run is deterministic given the
/// seed.
pub fn simulated_annealing(
    image: &GrayImage,
    initial: &LabelField,
    model: &MrfModel,
    schedule: &SaSchedule,
    reestimate: bool,
) -> Result<(LabelField, OptimizeReport)> {
    check_dims(image, initial)?;
    schedule.validate()?;
    let mut labels = initial.clone();
    let mut model = model.clone();
    let (w, h) = (labels.width, labels.height);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);

    let mut best = labels.clone();
    let mut best_energy = global_energy(image, &labels, &model)?;
    let mut scratch = labels.clone();
    // accepted flips of the current sweep, for rebuilding the mid-sweep best
    let mut journal: Vec<(usize, u8)> = Vec::new();
    let mut current_energy = best_energy;
    let mut sweeps = 0;
    let mut t = schedule.t0;
    loop {
        journal.clear();
        let mut sweep_best = current_energy;
        let mut sweep_best_len = 0;
        for y in 0..h {
            for x in 0..w {
                let current = labels.labels[y * w + x];
                let flipped = 1 - current;
                let de = local_energy(image, &labels, x, y, flipped, &model)
                    - local_energy(image, &labels, x, y, current, &model);
                let accept = de <= 0.0 || rng.gen::<f64>() < (-de / t).exp();
                if accept {
                    labels.labels[y * w + x] = flipped;
                    journal.push((y * w + x, current));
                    // the local delta equals the global delta, so the
                    // running energy stays exact up to rounding drift
                    current_energy += de;
                    if current_energy < sweep_best {
                        sweep_best = current_energy;
                        sweep_best_len = journal.len();
                    }
                }
            }
        }
        sweeps += 1;
        if sweep_best < best_energy {
            // roll the sweep back to its best point, then accept the
            // snapshot only if its exact energy really improves
            scratch.labels.copy_from_slice(&labels.labels);
            for &(idx, old) in journal[sweep_best_len..].iter().rev() {
                scratch.labels[idx] = old;
            }
            let exact = global_energy(image, &scratch, &model)?;
            if exact < best_energy {
                best_energy = exact;
                std::mem::swap(&mut best, &mut scratch);
            }
        }
        if reestimate {
            model.params = estimate_params(image, &labels)?;
            best_energy = global_energy(image, &best, &model)?;
        }
        // resync the running sum; incremental updates drift a few ulps
        current_energy = global_energy(image, &labels, &model)?;
        t *= schedule.cooling;
        if t < schedule.t_min {
            break;
        }
    }
    Ok((
        best,
        OptimizeReport {
            final_energy: best_energy,
            sweeps,
            converged: true,
        },
    ))
}
