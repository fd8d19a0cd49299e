//! Browser demo: bit-plane slicing, MRF-ensemble segmentation, and
//! confidence thresholding on PNG bytes, compiled to WebAssembly.
//!
//! The exported functions wrap plain-Rust internals (host-testable) and
//! surface failures as JS exceptions. See `www/index.html` for the page
//! that drives them.

use wasm_bindgen::prelude::*;

use mrfseg::bitplane;
use mrfseg::ensemble::{self, ConfidenceMap, EnsembleConfig, Optimizer};
use mrfseg::imageio::{decode_gray, encode_gray_png, encode_mask_png};
use mrfseg::mrf::Neighborhood;
use mrfseg::synth;

fn demo_image_impl(width: u32, height: u32, seed: u32) -> Result<Vec<u8>, String> {
    if width == 0 || height == 0 || width > 2048 || height > 2048 {
        return Err("image side must lie in 1..=2048".into());
    }
    let (img, _) = synth::disk_image(width as usize, height as usize, seed as u64);
    encode_gray_png(&img).map_err(|e| e.to_string())
}

fn slice_planes_impl(png: &[u8]) -> Result<Vec<Vec<u8>>, String> {
    let img = decode_gray(png).map_err(|e| e.to_string())?;
    let planes = bitplane::slice(&img);
    planes
        .planes()
        .iter()
        .map(|p| encode_mask_png(p).map_err(|e| e.to_string()))
        .collect()
}

fn segment_impl(
    png: &[u8],
    beta: f64,
    optimizer: &str,
    neighborhood: u8,
    seed: u32,
) -> Result<Segmentation, String> {
    if !(beta > 0.0 && beta <= 10.0) {
        return Err(format!("beta must lie in (0, 10], got {beta}"));
    }
    let optimizer = match optimizer {
        "icm" => Optimizer::Icm { max_sweeps: 10 },
        "sa" => Optimizer::Sa {
            t0: 4.0,
            cooling: 0.95,
            t_min: 0.05,
        },
        other => return Err(format!("optimizer must be icm or sa, got {other:?}")),
    };
    let neighborhood = match neighborhood {
        4 => Neighborhood::Four,
        8 => Neighborhood::Eight,
        other => return Err(format!("neighborhood must be 4 or 8, got {other}")),
    };
    let img = decode_gray(png).map_err(|e| e.to_string())?;
    let config = EnsembleConfig {
        beta,
        neighborhood,
        optimizer,
        seed: seed as u64,
        reestimate: false,
        polarity: ensemble::Polarity::BrightIsObject,
    };
    let result = ensemble::segment_ensemble(&img, &config).map_err(|e| e.to_string())?;
    let probability_png = encode_gray_png(&ensemble::confidence_to_image(&result.confidence))
        .map_err(|e| e.to_string())?;
    Ok(Segmentation {
        confidence: result.confidence,
        probability_png,
    })
}

/// The eight bit planes of an image, each as PNG bytes.
#[wasm_bindgen]
pub struct PlaneSet {
    pngs: Vec<Vec<u8>>,
}

impl PlaneSet {
    fn plane_impl(&self, bit: usize) -> Result<Vec<u8>, String> {
        self.pngs
            .get(bit)
            .cloned()
            .ok_or_else(|| "bit must lie in 0..=7".into())
    }
}

#[wasm_bindgen]
impl PlaneSet {
    /// PNG bytes of plane `bit` (0 = least significant).
    pub fn plane(&self, bit: usize) -> Result<Vec<u8>, JsError> {
        self.plane_impl(bit).map_err(|e| JsError::new(&e))
    }
}

/// Segmentation result held on the wasm side; the page pulls PNGs out of it
/// as the confidence slider moves.
#[wasm_bindgen]
pub struct Segmentation {
    confidence: ConfidenceMap,
    probability_png: Vec<u8>,
}

impl Segmentation {
    fn mask_png_impl(&self, level: u8) -> Result<Vec<u8>, String> {
        let mask =
            ensemble::threshold_confidence(&self.confidence, level).map_err(|e| e.to_string())?;
        encode_mask_png(&mask).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen]
impl Segmentation {
    pub fn width(&self) -> u32 {
        self.confidence.width() as u32
    }

    pub fn height(&self) -> u32 {
        self.confidence.height() as u32
    }

    /// Vote counts in 0..=8, row-major.
    pub fn votes(&self) -> Vec<u8> {
        self.confidence.votes().to_vec()
    }

    /// The probability-map visualization as PNG bytes.
    pub fn probability_png(&self) -> Vec<u8> {
        self.probability_png.clone()
    }

    /// The mask thresholded at `level` (0..=7) as PNG bytes.
    pub fn mask_png(&self, level: u8) -> Result<Vec<u8>, JsError> {
        self.mask_png_impl(level).map_err(|e| JsError::new(&e))
    }
}

/// Generates a synthetic phantom (bright disks on a dark background) as
/// PNG bytes, so the page works without an upload.
#[wasm_bindgen]
pub fn demo_image(width: u32, height: u32, seed: u32) -> Result<Vec<u8>, JsError> {
    demo_image_impl(width, height, seed).map_err(|e| JsError::new(&e))
}

/// Decomposes a PNG into its eight bit planes.
#[wasm_bindgen]
pub fn slice_planes(png: &[u8]) -> Result<PlaneSet, JsError> {
    slice_planes_impl(png)
        .map(|pngs| PlaneSet { pngs })
        .map_err(|e| JsError::new(&e))
}

/// Runs the 8-member ensemble on a PNG and returns the voting result.
#[wasm_bindgen]
pub fn segment(
    png: &[u8],
    beta: f64,
    optimizer: &str,
    neighborhood: u8,
    seed: u32,
) -> Result<Segmentation, JsError> {
    segment_impl(png, beta, optimizer, neighborhood, seed).map_err(|e| JsError::new(&e))
}
