//! Grayscale image operations for spectrogram processing: contrast
//! enhancement, bilinear resizing, peak detection, HOG descriptors, and
//! seeded geometric augmentation.

mod augment;
mod hog;
mod pgm;

pub use augment::{
    augment, flip_horizontal, rotate_about_center, scale_about_center, translate, AugTransform,
    AugmentationSpec,
};
pub use hog::{hog, HogParams};
pub use pgm::{pgm_from_bytes, pgm_to_bytes, read_pgm, write_pgm};

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("image dimensions must be at least 1x1".to_string()));
        }
        if pixels.len() != width * height {
            return Err(Error::argument(format!(
                "pixel buffer holds {} values, expected {}x{} = {}",
                pixels.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Applies a per-intensity lookup table.
    pub fn map_levels(&self, lut: &[u8; 256]) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| lut[p as usize]).collect(),
        }
    }
}

/// A strict local maximum found by [`detect_peaks`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Peak {
    pub row: usize,
    pub column: usize,
    pub intensity: u8,
}

/// Rounds half-up into the 8-bit range; `value` must be non-negative.
#[inline]
pub(crate) fn round_u8(value: f64) -> u8 {
    (value + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// ITU-R BT.601 luma conversion from planar RGB channels.
pub fn to_grayscale(
    red: &[u8],
    green: &[u8],
    blue: &[u8],
    width: usize,
    height: usize,
) -> Result<GrayImage> {
    let expected = width * height;
    if red.len() != expected || green.len() != expected || blue.len() != expected {
        return Err(Error::argument(format!(
            "channel sizes {}/{}/{} do not all match {}x{}",
            red.len(),
            green.len(),
            blue.len(),
            width,
            height
        )));
    }
    let pixels = red
        .iter()
        .zip(green)
        .zip(blue)
        .map(|((&r, &g), &b)| {
            let luma = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            luma.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, pixels)
}

/// Global histogram equalization.
///
/// Each level maps to `floor(cdf(level) * 255)`; a constant image has a
/// degenerate histogram and is returned unchanged.
pub fn enhance_contrast(img: &GrayImage) -> GrayImage {
    let mut histogram = [0usize; 256];
    for &p in img.pixels() {
        histogram[p as usize] += 1;
    }
    if histogram.iter().filter(|&&c| c > 0).count() <= 1 {
        return img.clone();
    }
    let total = img.pixels().len() as f64;
    let mut lut = [0u8; 256];
    let mut cumulative = 0usize;
    for (level, slot) in lut.iter_mut().enumerate() {
        cumulative += histogram[level];
        *slot = (cumulative as f64 / total * 255.0).floor() as u8;
    }
    img.map_levels(&lut)
}

/// Bilinear resize with half-pixel-center source coordinates
/// `src = (dst + 0.5) * (src_size / dst_size) - 0.5`, clamped to the image
/// borders. A same-size resize is exactly the identity.
pub fn resize_bilinear(img: &GrayImage, new_width: usize, new_height: usize) -> Result<GrayImage> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::argument("resize target must be at least 1x1".to_string()));
    }
    let (w, h) = (img.width(), img.height());
    let x_scale = w as f64 / new_width as f64;
    let y_scale = h as f64 / new_height as f64;
    let mut pixels = Vec::with_capacity(new_width * new_height);
    for dy in 0..new_height {
        let sy = ((dy as f64 + 0.5) * y_scale - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for dx in 0..new_width {
            let sx = ((dx as f64 + 0.5) * x_scale - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            let top = f64::from(img.get(x0, y0)) * (1.0 - fx) + f64::from(img.get(x1, y0)) * fx;
            let bottom = f64::from(img.get(x0, y1)) * (1.0 - fx) + f64::from(img.get(x1, y1)) * fx;
            pixels.push(round_u8(top * (1.0 - fy) + bottom * fy));
        }
    }
    GrayImage::new(new_width, new_height, pixels)
}

/// Finds pixels that are strict maxima of their `neighborhood x neighborhood`
/// window and at least `min_intensity`, sorted by descending intensity and
/// then row-major position. Plateau pixels (tied with a neighbor) never
/// qualify.
pub fn detect_peaks(
    img: &GrayImage,
    min_intensity: u8,
    neighborhood: usize,
) -> Result<Vec<Peak>> {
    if neighborhood < 3 || neighborhood % 2 == 0 {
        return Err(Error::argument(format!(
            "neighborhood must be odd and >= 3, got {neighborhood}"
        )));
    }
    let radius = neighborhood / 2;
    let (w, h) = (img.width(), img.height());
    let mut peaks = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let value = img.get(x, y);
            if value < min_intensity {
                continue;
            }
            let y_lo = y.saturating_sub(radius);
            let y_hi = (y + radius).min(h - 1);
            let x_lo = x.saturating_sub(radius);
            let x_hi = (x + radius).min(w - 1);
            let mut is_peak = true;
            'window: for yy in y_lo..=y_hi {
                for xx in x_lo..=x_hi {
                    if (yy, xx) != (y, x) && img.get(xx, yy) >= value {
                        is_peak = false;
                        break 'window;
                    }
                }
            }
            if is_peak {
                peaks.push(Peak { row: y, column: x, intensity: value });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.intensity
            .cmp(&a.intensity)
            .then(a.row.cmp(&b.row))
            .then(a.column.cmp(&b.column))
    });
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grayscale_fixed_point_and_primaries() {
        for v in [0u8, 1, 77, 128, 254, 255] {
            let img = to_grayscale(&[v], &[v], &[v], 1, 1).unwrap();
            assert_eq!(img.pixels()[0], v, "gray input {v} must be a fixed point");
        }
        assert_eq!(to_grayscale(&[255], &[0], &[0], 1, 1).unwrap().pixels()[0], 76);
        assert_eq!(to_grayscale(&[0], &[0], &[255], 1, 1).unwrap().pixels()[0], 29);
        assert!(to_grayscale(&[0, 0], &[0], &[0], 1, 1).is_err());
    }

    #[test]
    fn equalization_of_constant_image_is_identity() {
        let img = GrayImage::filled(16, 16, 42).unwrap();
        assert_eq!(enhance_contrast(&img), img);
    }

    #[test]
    fn equalization_of_two_level_image() {
        let mut pixels = vec![100u8; 32];
        pixels.extend(vec![200u8; 32]);
        let img = GrayImage::new(8, 8, pixels).unwrap();
        let out = enhance_contrast(&img);
        let mut levels: Vec<u8> = out.pixels().to_vec();
        levels.sort_unstable();
        levels.dedup();
        assert_eq!(levels, vec![127, 255]);
    }

    #[test]
    fn equalization_of_full_ramp_is_identity() {
        // 256 columns, each column one level: a perfectly uniform histogram.
        let mut pixels = Vec::with_capacity(256 * 4);
        for _ in 0..4 {
            pixels.extend(0u8..=255);
        }
        let img = GrayImage::new(256, 4, pixels).unwrap();
        let out = enhance_contrast(&img);
        assert_eq!(out.pixels(), img.pixels());
    }

    #[test]
    fn same_size_resize_is_identity() {
        let pixels: Vec<u8> = (0..64).map(|i| (i * 3 % 256) as u8).collect();
        let img = GrayImage::new(8, 8, pixels).unwrap();
        assert_eq!(resize_bilinear(&img, 8, 8).unwrap(), img);
    }

    #[test]
    fn constant_image_resizes_to_constant() {
        let img = GrayImage::filled(5, 7, 99).unwrap();
        for (w, h) in [(1, 1), (3, 11), (16, 2), (9, 9)] {
            let out = resize_bilinear(&img, w, h).unwrap();
            assert!(out.pixels().iter().all(|&p| p == 99));
        }
    }

    #[test]
    fn width_doubling_replicates_rows() {
        let img = GrayImage::new(2, 2, vec![0, 0, 255, 255]).unwrap();
        let out = resize_bilinear(&img, 4, 2).unwrap();
        assert_eq!(out.pixels(), &[0, 0, 0, 0, 255, 255, 255, 255]);
    }

    proptest! {
        #[test]
        fn resize_respects_input_range(
            pixels in proptest::collection::vec(0u8..=255, 36),
            w in 1usize..12,
            h in 1usize..12,
        ) {
            let img = GrayImage::new(6, 6, pixels).unwrap();
            let lo = *img.pixels().iter().min().unwrap();
            let hi = *img.pixels().iter().max().unwrap();
            let out = resize_bilinear(&img, w, h).unwrap();
            for &p in out.pixels() {
                prop_assert!(p >= lo && p <= hi);
            }
        }
    }

    #[test]
    fn constant_image_has_no_peaks() {
        let img = GrayImage::filled(10, 10, 200).unwrap();
        assert!(detect_peaks(&img, 0, 3).unwrap().is_empty());
    }

    #[test]
    fn isolated_bright_pixel_is_the_only_peak() {
        let mut img = GrayImage::filled(9, 9, 0).unwrap();
        img.set(4, 6, 200);
        let peaks = detect_peaks(&img, 100, 3).unwrap();
        assert_eq!(peaks, vec![Peak { row: 6, column: 4, intensity: 200 }]);
    }

    #[test]
    fn peaks_sorted_by_intensity_then_position() {
        let mut img = GrayImage::filled(16, 16, 0).unwrap();
        img.set(12, 2, 150);
        img.set(3, 9, 250);
        img.set(9, 9, 150);
        let peaks = detect_peaks(&img, 10, 3).unwrap();
        assert_eq!(
            peaks,
            vec![
                Peak { row: 9, column: 3, intensity: 250 },
                Peak { row: 2, column: 12, intensity: 150 },
                Peak { row: 9, column: 9, intensity: 150 },
            ]
        );
    }

    #[test]
    fn plateau_yields_no_peak() {
        let mut img = GrayImage::filled(9, 9, 0).unwrap();
        img.set(4, 4, 200);
        img.set(5, 4, 200);
        assert!(detect_peaks(&img, 100, 3).unwrap().is_empty());
    }

    #[test]
    fn peaks_invariant_under_strictly_monotone_remap() {
        let mut img = GrayImage::filled(12, 12, 30).unwrap();
        img.set(2, 3, 90);
        img.set(8, 8, 120);
        img.set(5, 10, 75);
        // Strictly increasing on the occupied levels.
        let mut lut = [0u8; 256];
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = (i / 2 + 100) as u8;
        }
        let remapped = img.map_levels(&lut);
        let original: Vec<(usize, usize)> = detect_peaks(&img, 0, 3)
            .unwrap()
            .iter()
            .map(|p| (p.row, p.column))
            .collect();
        let transformed: Vec<(usize, usize)> = detect_peaks(&remapped, 0, 3)
            .unwrap()
            .iter()
            .map(|p| (p.row, p.column))
            .collect();
        assert_eq!(original, transformed);
    }

    #[test]
    fn neighborhood_must_be_odd() {
        let img = GrayImage::filled(4, 4, 0).unwrap();
        assert!(detect_peaks(&img, 0, 4).is_err());
        assert!(detect_peaks(&img, 0, 1).is_err());
    }
}
