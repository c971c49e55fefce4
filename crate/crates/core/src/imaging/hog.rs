//! Histogram-of-oriented-gradients descriptor.
//!
//! Gradients come from centered differences with replicated borders; each
//! cell accumulates a magnitude-weighted orientation histogram with linear
//! interpolation between adjacent bins, and overlapping blocks of cells are
//! L2-Hys normalized (L2 normalize, clip at 0.2, renormalize).

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

const HYS_CLIP: f64 = 0.2;
const NORM_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogParams {
    /// Cell side in pixels.
    pub cell_size: usize,
    /// Block side in cells.
    pub block_size: usize,
    /// Block step in cells.
    pub block_stride: usize,
    /// Orientation bins.
    pub bin_count: usize,
    /// `false` folds orientations into 0-180 degrees.
    pub signed: bool,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 8,
            block_size: 2,
            block_stride: 1,
            bin_count: 9,
            signed: false,
        }
    }
}

impl HogParams {
    fn validate(&self) -> Result<()> {
        if self.cell_size < 2 {
            return Err(Error::argument("cell_size must be at least 2".to_string()));
        }
        if self.block_size < 1 {
            return Err(Error::argument("block_size must be at least 1".to_string()));
        }
        if self.block_stride < 1 || self.block_stride > self.block_size {
            return Err(Error::argument(
                "block_stride must lie in [1, block_size]".to_string(),
            ));
        }
        if self.bin_count < 2 {
            return Err(Error::argument("bin_count must be at least 2".to_string()));
        }
        Ok(())
    }

    /// Descriptor length for a `width x height` image.
    pub fn descriptor_len(&self, width: usize, height: usize) -> Result<usize> {
        let (blocks_x, blocks_y) = self.block_grid(width, height)?;
        Ok(blocks_x * blocks_y * self.block_size * self.block_size * self.bin_count)
    }

    fn block_grid(&self, width: usize, height: usize) -> Result<(usize, usize)> {
        self.validate()?;
        if width % self.cell_size != 0 || height % self.cell_size != 0 {
            return Err(Error::argument(format!(
                "image {width}x{height} not divisible by cell size {}",
                self.cell_size
            )));
        }
        let cells_x = width / self.cell_size;
        let cells_y = height / self.cell_size;
        if cells_x < self.block_size || cells_y < self.block_size {
            return Err(Error::argument(format!(
                "cell grid {cells_x}x{cells_y} smaller than block size {}",
                self.block_size
            )));
        }
        Ok((
            (cells_x - self.block_size) / self.block_stride + 1,
            (cells_y - self.block_size) / self.block_stride + 1,
        ))
    }
}

fn l2_hys_normalize(block: &mut [f64]) {
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + NORM_EPSILON * NORM_EPSILON).sqrt();
    for v in block.iter_mut() {
        *v = (*v / norm).min(HYS_CLIP);
    }
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + NORM_EPSILON * NORM_EPSILON).sqrt();
    for v in block.iter_mut() {
        *v /= norm;
    }
}

/// Computes the HOG descriptor of `img`; its width and height must be
/// divisible by the cell size.
pub fn hog(img: &GrayImage, params: &HogParams) -> Result<Vec<f64>> {
    let (w, h) = (img.width(), img.height());
    let (blocks_x, blocks_y) = params.block_grid(w, h)?;
    let cells_x = w / params.cell_size;
    let cells_y = h / params.cell_size;
    let bins = params.bin_count;
    let range = if params.signed {
        2.0 * std::f64::consts::PI
    } else {
        std::f64::consts::PI
    };
    let bin_width = range / bins as f64;

    let mut cell_hist = vec![0.0f64; cells_x * cells_y * bins];
    for y in 0..h {
        let y_prev = y.saturating_sub(1);
        let y_next = (y + 1).min(h - 1);
        for x in 0..w {
            let x_prev = x.saturating_sub(1);
            let x_next = (x + 1).min(w - 1);
            let gx = f64::from(img.get(x_next, y)) - f64::from(img.get(x_prev, y));
            let gy = f64::from(img.get(x, y_next)) - f64::from(img.get(x, y_prev));
            let magnitude = (gx * gx + gy * gy).sqrt();
            if magnitude == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += 2.0 * std::f64::consts::PI;
            }
            if !params.signed && angle >= std::f64::consts::PI {
                angle -= std::f64::consts::PI;
            }
            // atan2 returns at most pi, so angle < range holds; guard the
            // boundary against rounding anyway.
            let position = (angle / bin_width).min(bins as f64 - f64::EPSILON);
            let lower = position.floor() as usize % bins;
            let upper = (lower + 1) % bins;
            let fraction = position - position.floor();
            let cell = (y / params.cell_size) * cells_x + x / params.cell_size;
            cell_hist[cell * bins + lower] += magnitude * (1.0 - fraction);
            cell_hist[cell * bins + upper] += magnitude * fraction;
        }
    }

    let block_len = params.block_size * params.block_size * bins;
    let mut descriptor = Vec::with_capacity(blocks_x * blocks_y * block_len);
    let mut block = vec![0.0f64; block_len];
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            block.clear();
            for cy in 0..params.block_size {
                for cx in 0..params.block_size {
                    let cell = (by * params.block_stride + cy) * cells_x
                        + bx * params.block_stride
                        + cx;
                    block.extend_from_slice(&cell_hist[cell * bins..(cell + 1) * bins]);
                }
            }
            l2_hys_normalize(&mut block);
            descriptor.extend_from_slice(&block);
        }
    }
    Ok(descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_gives_zero_descriptor() {
        let img = GrayImage::filled(32, 32, 77).unwrap();
        let descriptor = hog(&img, &HogParams::default()).unwrap();
        assert!(!descriptor.is_empty());
        assert!(descriptor.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_descriptor_length_on_64x64() {
        let img = GrayImage::filled(64, 64, 0).unwrap();
        let descriptor = hog(&img, &HogParams::default()).unwrap();
        assert_eq!(descriptor.len(), 1764);
        assert_eq!(HogParams::default().descriptor_len(64, 64).unwrap(), 1764);
    }

    #[test]
    fn vertical_step_edge_concentrates_in_horizontal_bin() {
        // Left half 0, right half 255: gradients point along +x (angle 0).
        let mut img = GrayImage::filled(16, 16, 0).unwrap();
        for y in 0..16 {
            for x in 8..16 {
                img.set(x, y, 255);
            }
        }
        let params = HogParams::default();
        let descriptor = hog(&img, &params).unwrap();
        let mass: f64 = descriptor.iter().sum();
        assert!(mass > 0.0);
        for (i, &v) in descriptor.iter().enumerate() {
            if v != 0.0 {
                assert_eq!(i % params.bin_count, 0, "mass outside bin 0 at index {i}");
            }
        }
    }

    #[test]
    fn block_vectors_are_normalized() {
        let pixels: Vec<u8> = (0..64 * 64).map(|i| (i * 31 % 251) as u8).collect();
        let img = GrayImage::new(64, 64, pixels).unwrap();
        let params = HogParams::default();
        let descriptor = hog(&img, &params).unwrap();
        let block_len = params.block_size * params.block_size * params.bin_count;
        for chunk in descriptor.chunks(block_len) {
            let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1.0 + 1e-6, "block norm {norm}");
            assert!(chunk.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn indivisible_dimensions_are_rejected() {
        let img = GrayImage::filled(60, 64, 0).unwrap();
        assert!(hog(&img, &HogParams::default()).is_err());
    }
}
