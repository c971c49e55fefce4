//! Seeded geometric augmentation.
//!
//! Each variant applies one transform drawn from the pool — small rotation,
//! horizontal flip, integer translation, or scaling about the center — with
//! zero (background) border fill, then resizes to the next entry of the
//! output resolution cycle. Parameters come from a generator seeded by
//! `(spec.seed, image index, variant index)`, so results are independent of
//! processing order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, round_u8, GrayImage};
use crate::seed::{derive_seed, tags};

/// One family of label-preserving spatial transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugTransform {
    /// Rotation about the image center by up to `max_degrees` either way.
    Rotate { max_degrees: f64 },
    FlipHorizontal,
    /// Integer shift of up to `max_dx`/`max_dy` pixels either way.
    Translate { max_dx: i32, max_dy: i32 },
    /// Scaling about the center by a factor drawn from `[min, max]`.
    Scale { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSpec {
    /// Variants generated per original image.
    pub per_original: usize,
    pub pool: Vec<AugTransform>,
    /// Square output sizes the variants cycle through.
    pub output_resolutions: Vec<usize>,
    pub seed: u64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            per_original: 10,
            pool: vec![
                AugTransform::Rotate { max_degrees: 10.0 },
                AugTransform::FlipHorizontal,
                AugTransform::Translate { max_dx: 8, max_dy: 8 },
                AugTransform::Scale { min: 0.9, max: 1.1 },
            ],
            output_resolutions: vec![64, 96, 128, 256],
            seed: 0,
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.per_original < 1 {
            return Err(Error::argument("per_original must be at least 1".to_string()));
        }
        if self.output_resolutions.is_empty() || self.output_resolutions.iter().any(|&r| r < 8) {
            return Err(Error::argument(
                "output_resolutions must be nonempty with every size >= 8".to_string(),
            ));
        }
        if self.pool.is_empty() {
            return Err(Error::argument("transform pool must be nonempty".to_string()));
        }
        for t in &self.pool {
            match *t {
                AugTransform::Rotate { max_degrees } if max_degrees < 0.0 => {
                    return Err(Error::argument("rotation range must be >= 0".to_string()))
                }
                AugTransform::Translate { max_dx, max_dy } if max_dx < 0 || max_dy < 0 => {
                    return Err(Error::argument("translation range must be >= 0".to_string()))
                }
                AugTransform::Scale { min, max } if !(min > 0.0 && min <= max) => {
                    return Err(Error::argument(
                        "scale range must satisfy 0 < min <= max".to_string(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Bilinear sample with zero fill outside the image.
fn sample_zero(img: &GrayImage, x: f64, y: f64) -> f64 {
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let fetch = |xx: i64, yy: i64| -> f64 {
        if xx < 0 || yy < 0 || xx >= img.width() as i64 || yy >= img.height() as i64 {
            0.0
        } else {
            f64::from(img.get(xx as usize, yy as usize))
        }
    };
    fetch(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + fetch(x0 + 1, y0) * fx * (1.0 - fy)
        + fetch(x0, y0 + 1) * (1.0 - fx) * fy
        + fetch(x0 + 1, y0 + 1) * fx * fy
}

pub fn flip_horizontal(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut out = GrayImage::filled(w, h, 0).expect("dimensions already valid");
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, img.get(w - 1 - x, y));
        }
    }
    out
}

pub fn rotate_about_center(img: &GrayImage, degrees: f64) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let theta = degrees.to_radians();
    let (sin, cos) = (theta.sin(), theta.cos());
    let mut out = GrayImage::filled(w, h, 0).expect("dimensions already valid");
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            out.set(x, y, round_u8(sample_zero(img, sx, sy)));
        }
    }
    out
}

pub fn translate(img: &GrayImage, dx: i32, dy: i32) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut out = GrayImage::filled(w, h, 0).expect("dimensions already valid");
    for y in 0..h {
        for x in 0..w {
            let sx = x as i64 - i64::from(dx);
            let sy = y as i64 - i64::from(dy);
            if sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 {
                out.set(x, y, img.get(sx as usize, sy as usize));
            }
        }
    }
    out
}

pub fn scale_about_center(img: &GrayImage, factor: f64) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = GrayImage::filled(w, h, 0).expect("dimensions already valid");
    for y in 0..h {
        for x in 0..w {
            let sx = (x as f64 - cx) / factor + cx;
            let sy = (y as f64 - cy) / factor + cy;
            out.set(x, y, round_u8(sample_zero(img, sx, sy)));
        }
    }
    out
}

/// Generates `spec.per_original` transformed copies of `img`; the original
/// is not included. `image_index` keys the per-image random stream.
pub fn augment(img: &GrayImage, spec: &AugmentationSpec, image_index: u64) -> Result<Vec<GrayImage>> {
    spec.validate()?;
    let mut variants = Vec::with_capacity(spec.per_original);
    for variant in 0..spec.per_original {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            spec.seed,
            tags::AUGMENT,
            &[image_index, variant as u64],
        ));
        let transform = spec.pool[rng.random_range(0..spec.pool.len())];
        let transformed = match transform {
            AugTransform::Rotate { max_degrees } => {
                let angle = if max_degrees > 0.0 {
                    rng.random_range(-max_degrees..=max_degrees)
                } else {
                    0.0
                };
                rotate_about_center(img, angle)
            }
            AugTransform::FlipHorizontal => flip_horizontal(img),
            AugTransform::Translate { max_dx, max_dy } => {
                let dx = rng.random_range(-max_dx..=max_dx);
                let dy = rng.random_range(-max_dy..=max_dy);
                translate(img, dx, dy)
            }
            AugTransform::Scale { min, max } => {
                let factor = if min < max { rng.random_range(min..=max) } else { min };
                scale_about_center(img, factor)
            }
        };
        let resolution = spec.output_resolutions[variant % spec.output_resolutions.len()];
        variants.push(resize_bilinear(&transformed, resolution, resolution)?);
    }
    Ok(variants)
}
