//! Image and mask loading, saving, and dataset enumeration.
//!
//! PNG is the canonical format; PGM is accepted as a convenience on input.
//! Multi-channel inputs are converted to 8-bit gray with the integer luma
//! formula `round(0.299 R + 0.587 G + 0.114 B)` (round half up).

use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// 2-D field of 8-bit intensities, the segmentation input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    /// Builds an image, checking `data.len() == width * height` and
    /// `width, height >= 1`.
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroSized);
        }
        if data.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "pixel buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// 2-D field of values in {0,1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    /// Builds a mask, checking dimensions and that every value is 0 or 1.
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroSized);
        }
        if data.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "mask buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParam(format!("mask value {v} is not 0 or 1")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Integer luma: `(299 R + 587 G + 114 B + 500) / 1000`, i.e. round half up.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

fn dynamic_to_gray(img: image::DynamicImage) -> Result<GrayImage> {
    if img.color().bits_per_pixel() / img.color().channel_count() as u16 > 8 {
        return Err(Error::InvalidParam(
            "inputs deeper than 8 bits per channel are not supported".into(),
        ));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ZeroSized);
    }
    let data = match img {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        other => {
            let rgb = other.to_rgb8();
            rgb.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
    };
    GrayImage::new(w, h, data)
}

/// Decodes PNG or PGM bytes into a [`GrayImage`].
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory(bytes).map_err(|source| Error::Decode {
        path: PathBuf::from("<memory>"),
        source,
    })?;
    dynamic_to_gray(img)
}

/// Loads an 8-bit grayscale image from a PNG or PGM file.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let img = image::load_from_memory(&bytes).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    dynamic_to_gray(img)
}

/// Loads a ground-truth mask: pixel = 1 iff its gray value >= `threshold`.
///
/// The default threshold 1 treats any nonzero pixel as foreground, which
/// suits ground-truth images that encode one integer label per cell.
pub fn load_mask(path: impl AsRef<Path>, threshold: u8) -> Result<BinaryMask> {
    if threshold == 0 {
        return Err(Error::InvalidParam(
            "mask threshold must be in 1..=255".into(),
        ));
    }
    let gray = load_gray(path)?;
    let data = gray
        .data
        .iter()
        .map(|&v| u8::from(v >= threshold))
        .collect();
    BinaryMask::new(gray.width, gray.height, data)
}

fn encode_png(width: usize, height: usize, data: Vec<u8>) -> Result<Vec<u8>> {
    let buf: image::ImageBuffer<image::Luma<u8>, Vec<u8>> =
        image::ImageBuffer::from_raw(width as u32, height as u32, data)
            .expect("buffer length matches dimensions");
    let mut bytes = Vec::new();
    buf.write_to(
        &mut std::io::Cursor::new(&mut bytes),
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Encode {
        path: PathBuf::from("<memory>"),
        source,
    })?;
    Ok(bytes)
}

/// Encodes a grayscale image as PNG bytes.
pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    encode_png(img.width, img.height, img.data.clone())
}

/// Encodes a mask as PNG bytes with 0 -> 0 and 1 -> 255.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    encode_png(
        mask.width,
        mask.height,
        mask.data.iter().map(|&v| v * 255).collect(),
    )
}

fn write_png(path: &Path, width: usize, height: usize, data: Vec<u8>) -> Result<()> {
    let bytes = encode_png(width, height, data)?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a mask as an 8-bit grayscale PNG with 0 -> 0 and 1 -> 255.
///
/// Round-trips through [`load_mask`] with threshold 1.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let data = mask.data.iter().map(|&v| v * 255).collect();
    write_png(path.as_ref(), mask.width, mask.height, data)
}

/// Writes a grayscale image as an 8-bit PNG; inverse of [`load_gray`].
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_png(path.as_ref(), img.width, img.height, img.data.clone())
}

/// Shell-style match supporting `*` and `?`, anchored at both ends.
fn glob_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let n: Vec<char> = name.chars().collect();
    // dp[i][j]: pattern[..i] matches name[..j]
    let mut dp = vec![vec![false; n.len() + 1]; p.len() + 1];
    dp[0][0] = true;
    for i in 1..=p.len() {
        if p[i - 1] == '*' {
            dp[i][0] = dp[i - 1][0];
        }
        for j in 1..=n.len() {
            dp[i][j] = match p[i - 1] {
                '*' => dp[i - 1][j] || dp[i][j - 1],
                '?' => dp[i - 1][j - 1],
                c => dp[i - 1][j - 1] && c == n[j - 1],
            };
        }
    }
    dp[p.len()][n.len()]
}

/// One dataset entry: an image path and its mask path, when the mask exists.
pub type DatasetEntry = (PathBuf, Option<PathBuf>);

/// Enumerates images under `dir` matching `image_glob`, paired with masks by
/// the `<stem><mask_suffix>.png` convention.
///
/// Files whose stem ends with `mask_suffix` are treated as masks and never
/// listed as images. The result is sorted by file name, so the order is
/// stable across runs.
pub fn list_dataset(
    dir: impl AsRef<Path>,
    image_glob: &str,
    mask_suffix: &str,
) -> Result<Vec<DatasetEntry>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|_| Error::DirectoryNotFound(dir.to_path_buf()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort_unstable();

    let mut out = Vec::new();
    for name in &names {
        if !glob_match(image_glob, name) {
            continue;
        }
        let stem = match name.rsplit_once('.') {
            Some((s, _)) => s,
            None => name.as_str(),
        };
        if !mask_suffix.is_empty() && stem.ends_with(mask_suffix) {
            continue;
        }
        let mask_path = dir.join(format!("{stem}{mask_suffix}.png"));
        let mask = mask_path.is_file().then_some(mask_path);
        out.push((dir.join(name), mask));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn png_bytes(width: u32, height: u32, data: Vec<u8>) -> Vec<u8> {
        let buf: image::ImageBuffer<image::Luma<u8>, Vec<u8>> =
            image::ImageBuffer::from_raw(width, height, data).unwrap();
        let mut bytes = Vec::new();
        buf.write_to(
            &mut std::io::Cursor::new(&mut bytes),
            image::ImageFormat::Png,
        )
        .unwrap();
        bytes
    }

    fn encode_rgb_png(width: u32, height: u32, data: Vec<u8>) -> Vec<u8> {
        let buf: image::ImageBuffer<image::Rgb<u8>, Vec<u8>> =
            image::ImageBuffer::from_raw(width, height, data).unwrap();
        let mut bytes = Vec::new();
        buf.write_to(
            &mut std::io::Cursor::new(&mut bytes),
            image::ImageFormat::Png,
        )
        .unwrap();
        bytes
    }

    #[test]
    fn grayscale_png_decodes_identically() {
        let bytes = png_bytes(2, 2, vec![0, 128, 255, 5]);
        let img = decode_gray(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 128, 255, 5]);
    }

    #[test]
    fn pgm_is_accepted() {
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 10, 20, 30, 40, 250]);
        let img = decode_gray(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.pixels(), &[0, 10, 20, 30, 40, 250]);
    }

    #[test]
    fn luma_of_white_is_255() {
        assert_eq!(luma(255, 255, 255), 255);
    }

    #[test]
    fn luma_rounds_half_up() {
        // round(0.299*100 + 0.587*200 + 0.114*50) = round(153.0) = 153,
        // computed by hand from the integer formula before implementation.
        assert_eq!(luma(100, 200, 50), 153);
        // a true .5 case: 299*50 + 587*150 + 114*250 = 131500 -> 131.5 -> 132
        assert_eq!(luma(50, 150, 250), 132);
    }

    #[test]
    fn luma_preserves_gray_pixels() {
        for v in 0..=255u8 {
            assert_eq!(luma(v, v, v), v);
        }
    }

    #[test]
    fn rgb_png_goes_through_luma() {
        let bytes = encode_rgb_png(1, 2, vec![255, 255, 255, 100, 200, 50]);
        let img = decode_gray(&bytes).unwrap();
        assert_eq!(img.pixels(), &[255, 153]);
    }

    #[test]
    fn mask_threshold_boundaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.png");
        // 0 stays background, 1 and a cell id like 7 become foreground.
        std::fs::write(&path, png_bytes(3, 1, vec![0, 1, 7])).unwrap();
        let mask = load_mask(&path, 1).unwrap();
        assert_eq!(mask.values(), &[0, 1, 1]);
    }

    #[test]
    fn mask_threshold_zero_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.png");
        std::fs::write(&path, png_bytes(1, 1, vec![0])).unwrap();
        assert!(load_mask(&path, 0).is_err());
    }

    #[test]
    fn save_mask_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = BinaryMask::new(3, 2, vec![1, 0, 1, 1, 0, 0]).unwrap();
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path, 1).unwrap(), mask);
        // byte values on disk are 0 / 255
        let img = load_gray(&path).unwrap();
        assert_eq!(img.pixels(), &[255, 0, 255, 255, 0, 0]);
    }

    #[test]
    fn save_gray_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let img = GrayImage::new(2, 2, vec![3, 250, 0, 77]).unwrap();
        save_gray(&img, &path).unwrap();
        assert_eq!(load_gray(&path).unwrap(), img);
    }

    #[test]
    fn missing_file_is_io_error() {
        match load_gray("/nonexistent/nope.png") {
            Err(Error::Io { .. }) => {}
            other => panic!("expected Io error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_bytes_are_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        std::fs::write(&path, b"not a png").unwrap();
        match load_gray(&path) {
            Err(Error::Decode { .. }) => {}
            other => panic!("expected Decode error, got {other:?}"),
        }
    }

    #[test]
    fn list_dataset_pairs_and_orders() {
        let dir = tempfile::tempdir().unwrap();
        let png = |name: &str| {
            std::fs::write(dir.path().join(name), png_bytes(1, 1, vec![0])).unwrap();
        };
        png("dna-1.png");
        png("dna-0.png");
        png("dna-0_mask.png");
        png("dna-1_mask.png");
        png("dna-2.png"); // no mask
        png("notes.txt.png"); // matches glob, no mask

        let list = list_dataset(dir.path(), "dna-*.png", "_mask").unwrap();
        let names: Vec<_> = list
            .iter()
            .map(|(img, mask)| {
                (
                    img.file_name().unwrap().to_str().unwrap().to_string(),
                    mask.is_some(),
                )
            })
            .collect();
        assert_eq!(
            names,
            vec![
                ("dna-0.png".to_string(), true),
                ("dna-1.png".to_string(), true),
                ("dna-2.png".to_string(), false),
            ]
        );
    }

    #[test]
    fn list_dataset_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(list_dataset(dir.path(), "*.png", "_mask")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn list_dataset_missing_dir() {
        assert!(matches!(
            list_dataset("/nonexistent/dir", "*.png", "_mask"),
            Err(Error::DirectoryNotFound(_))
        ));
    }

    #[test]
    fn glob_match_basics() {
        assert!(glob_match("*.png", "a.png"));
        assert!(glob_match("dna-?.png", "dna-0.png"));
        assert!(!glob_match("dna-?.png", "dna-10.png"));
        assert!(glob_match("*", "anything"));
        assert!(!glob_match("*.png", "a.pgm"));
    }

    #[test]
    fn load_mask_is_always_binary() {
        // fuzz over random images: output values must stay in {0,1}
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let dir = tempfile::tempdir().unwrap();
        for case in 0..25 {
            let w = rng.gen_range(1..12u32);
            let h = rng.gen_range(1..12u32);
            let data: Vec<u8> = (0..w * h).map(|_| rng.gen()).collect();
            let path = dir.path().join(format!("f{case}.png"));
            std::fs::write(&path, png_bytes(w, h, data)).unwrap();
            let threshold = rng.gen_range(1..=255u8);
            let mask = load_mask(&path, threshold).unwrap();
            assert!(mask.values().iter().all(|&v| v <= 1));
        }
    }
}
