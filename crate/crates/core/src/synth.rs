//! Synthetic disk phantoms with known ground truth.
//!
//! Bright disks (~200 +/- 15 gray levels) on a dark background (~20 +/- 15),
//! loosely imitating fluorescence nuclei imagery. Used by the test suites
//! and the browser demo; the returned mask is the exact ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imageio::{BinaryMask, GrayImage};

pub const FG_MEAN: f64 = 200.0;
pub const BG_MEAN: f64 = 20.0;
pub const NOISE_STD: f64 = 15.0;

fn gaussian(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    // Box-Muller; clamp u1 away from zero so ln stays finite
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    mean + std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates one phantom and its ground truth.
pub fn disk_image(width: usize, height: usize, seed: u64) -> (GrayImage, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_dim = width.min(height) as f64;
    let n_disks = rng.gen_range(5..=10);
    let mut gt = vec![0u8; width * height];
    for _ in 0..n_disks {
        let r = rng.gen_range(0.05..0.11) * min_dim;
        let r = r.max(3.0);
        let cx = rng.gen_range(r..(width as f64 - r).max(r + 1.0));
        let cy = rng.gen_range(r..(height as f64 - r).max(r + 1.0));
        let r2 = r * r;
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(width - 1);
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r2 {
                    gt[y * width + x] = 1;
                }
            }
        }
    }
    let data: Vec<u8> = gt
        .iter()
        .map(|&m| {
            let base = if m == 1 { FG_MEAN } else { BG_MEAN };
            gaussian(&mut rng, base, NOISE_STD)
                .round()
                .clamp(0.0, 255.0) as u8
        })
        .collect();
    (
        GrayImage::new(width, height, data).expect("generator dimensions are valid"),
        BinaryMask::new(width, height, gt).expect("ground truth is binary"),
    )
}

/// Generates `n` phantoms with seeds derived from `seed`.
pub fn disk_dataset(
    n: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Vec<(GrayImage, BinaryMask)> {
    (0..n)
        .map(|i| disk_image(width, height, seed.wrapping_add(i as u64)))
        .collect()
}
