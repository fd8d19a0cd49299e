//! Bit-plane slicing: an 8-bit image as eight binary planes.
//!
//! Plane `j` holds bit `j` of every intensity (j = 0 is the least
//! significant). Each plane serves as one initial labelling for the MRF
//! ensemble; the low planes look like noise, the high planes carry the
//! image structure.

use crate::imageio::{BinaryMask, GrayImage};
use crate::{Error, Result};

/// The eight bit planes of a grayscale image, indexed by bit position.
#[derive(Debug, Clone)]
pub struct BitPlaneSet {
    planes: [BinaryMask; 8],
}

impl BitPlaneSet {
    pub fn planes(&self) -> &[BinaryMask; 8] {
        &self.planes
    }

    pub fn plane(&self, bit: usize) -> &BinaryMask {
        &self.planes[bit]
    }
}

/// Decomposes an image into its eight bit planes.
pub fn slice(image: &GrayImage) -> BitPlaneSet {
    let (w, h) = (image.width(), image.height());
    let planes = std::array::from_fn(|bit| {
        let data = image.pixels().iter().map(|&v| (v >> bit) & 1).collect();
        BinaryMask::new(w, h, data).expect("plane inherits valid image dimensions")
    });
    BitPlaneSet { planes }
}

/// Rebuilds the image from its planes; inverse of [`slice`].
pub fn reconstruct(planes: &BitPlaneSet) -> Result<GrayImage> {
    let first = &planes.planes[0];
    let (w, h) = (first.width(), first.height());
    for p in &planes.planes[1..] {
        if p.width() != w || p.height() != h {
            return Err(Error::DimensionMismatch(w, h, p.width(), p.height()));
        }
    }
    let mut data = vec![0u8; w * h];
    for (bit, plane) in planes.planes.iter().enumerate() {
        for (acc, &v) in data.iter_mut().zip(plane.values()) {
            *acc |= v << bit;
        }
    }
    GrayImage::new(w, h, data)
}
