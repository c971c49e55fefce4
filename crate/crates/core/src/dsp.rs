//! Short-time Fourier analysis of IQ signals.
//!
//! The STFT slices the signal into hopped, windowed frames, zero-pads each
//! to the FFT length, and keeps the magnitude spectrum. Rows are rotated so
//! that 0 Hz sits at row `fft_length / 2` with negative frequencies above
//! it, which centers the micro-Doppler sidebands about the carrier line in
//! the rendered image.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, round_u8, GrayImage};
use crate::synth::IQSignal;

pub const DEFAULT_WINDOW_LENGTH: usize = 512;
pub const DEFAULT_HOP: usize = 128;
pub const DEFAULT_FFT_LENGTH: usize = 512;
pub const DEFAULT_FLOOR_DB: f64 = -80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Rectangular,
    Hann,
    Hamming,
}

impl WindowKind {
    pub fn coefficients(self, length: usize) -> Vec<f64> {
        if length == 1 {
            return vec![1.0];
        }
        let denom = (length - 1) as f64;
        (0..length)
            .map(|n| {
                let phase = 2.0 * std::f64::consts::PI * n as f64 / denom;
                match self {
                    WindowKind::Rectangular => 1.0,
                    WindowKind::Hann => 0.5 * (1.0 - phase.cos()),
                    WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                }
            })
            .collect()
    }

    pub fn parse(name: &str) -> Result<WindowKind> {
        match name.to_ascii_lowercase().as_str() {
            "rectangular" => Ok(WindowKind::Rectangular),
            "hann" => Ok(WindowKind::Hann),
            "hamming" => Ok(WindowKind::Hamming),
            other => Err(Error::argument(format!("unknown window kind '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Rectangular => "rectangular",
            WindowKind::Hann => "hann",
            WindowKind::Hamming => "hamming",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub fft_length: usize,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_length: DEFAULT_WINDOW_LENGTH,
            hop: DEFAULT_HOP,
            fft_length: DEFAULT_FFT_LENGTH,
            window_kind: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_length {
            return Err(Error::argument(format!(
                "hop {} must lie in [1, window_length {}]",
                self.hop, self.window_length
            )));
        }
        if self.window_length > self.fft_length {
            return Err(Error::argument(format!(
                "window_length {} exceeds fft_length {}",
                self.window_length, self.fft_length
            )));
        }
        if !self.fft_length.is_power_of_two() {
            return Err(Error::argument(format!(
                "fft_length {} is not a power of two",
                self.fft_length
            )));
        }
        Ok(())
    }
}

/// Unnormalized radix-2 DFT: `X[k] = sum_n x[n] * exp(-j*2*pi*k*n/N)`.
///
/// The input length must be a power of two.
pub fn fft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = input.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::argument(format!(
            "fft length {n} is not a power of two"
        )));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); n];
    let shift = usize::BITS - n.trailing_zeros();
    for (i, &x) in input.iter().enumerate() {
        let j = if n == 1 { 0 } else { i.reverse_bits() >> shift };
        data[j] = x;
    }

    // One table of exp(-j*2*pi*k/N); stage `len` strides it by N/len.
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let u = data[start + k];
                let t = w * data[start + k + half];
                data[start + k] = u + t;
                data[start + k + half] = u - t;
            }
        }
        len *= 2;
    }
    Ok(data)
}

/// Centered magnitude spectrogram, `frequency bins x time frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<f64>,
    bins: usize,
    frames: usize,
    bin_spacing_hz: f64,
    frame_spacing_s: f64,
    zero_bin_index: usize,
}

impl Spectrogram {
    pub fn from_parts(
        values: Vec<f64>,
        bins: usize,
        frames: usize,
        bin_spacing_hz: f64,
        frame_spacing_s: f64,
        zero_bin_index: usize,
    ) -> Result<Self> {
        if values.len() != bins * frames || zero_bin_index >= bins {
            return Err(Error::argument("inconsistent spectrogram dimensions".to_string()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::argument(
                "spectrogram values must be finite and non-negative".to_string(),
            ));
        }
        Ok(Spectrogram {
            values,
            bins,
            frames,
            bin_spacing_hz,
            frame_spacing_s,
            zero_bin_index,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bin_spacing_hz(&self) -> f64 {
        self.bin_spacing_hz
    }

    pub fn frame_spacing_s(&self) -> f64 {
        self.frame_spacing_s
    }

    pub fn zero_bin_index(&self) -> usize {
        self.zero_bin_index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.frames + frame]
    }

    /// Center frequency of a row, negative above the zero row.
    pub fn frequency_of_row(&self, row: usize) -> f64 {
        (row as f64 - self.zero_bin_index as f64) * self.bin_spacing_hz
    }

    /// Row holding the line at `frequency_hz`, if it falls on the grid.
    pub fn row_of_frequency(&self, frequency_hz: f64) -> usize {
        let row = self.zero_bin_index as f64 + frequency_hz / self.bin_spacing_hz;
        row.round().clamp(0.0, (self.bins - 1) as f64) as usize
    }

    /// Mean magnitude over time for each frequency row.
    pub fn time_averaged_profile(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|bin| {
                self.values[bin * self.frames..(bin + 1) * self.frames]
                    .iter()
                    .sum::<f64>()
                    / self.frames as f64
            })
            .collect()
    }
}

/// Short-time Fourier transform of `signal`.
///
/// Frame `t` covers samples `[t*hop, t*hop + window_length)`; the frame
/// count is `floor((len - window_length)/hop) + 1`. Frames are computed in
/// parallel; the result does not depend on the schedule.
pub fn stft(signal: &IQSignal, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let n = signal.samples.len();
    if n < cfg.window_length {
        return Err(Error::argument(format!(
            "signal length {n} shorter than window {}",
            cfg.window_length
        )));
    }
    let frames = (n - cfg.window_length) / cfg.hop + 1;
    let bins = cfg.fft_length;
    let window = cfg.window_kind.coefficients(cfg.window_length);

    let frame_rows: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|frame| {
            let start = frame * cfg.hop;
            let mut buffer = vec![Complex64::new(0.0, 0.0); bins];
            for (i, w) in window.iter().enumerate() {
                buffer[i] = signal.samples[start + i] * w;
            }
            let spectrum = fft(&buffer).expect("fft_length validated as power of two");
            // Rotate so 0 Hz lands at row bins/2.
            (0..bins)
                .map(|row| spectrum[(row + bins / 2) % bins].norm())
                .collect()
        })
        .collect();

    let mut values = vec![0.0f64; bins * frames];
    for (frame, rows) in frame_rows.iter().enumerate() {
        for (bin, &magnitude) in rows.iter().enumerate() {
            values[bin * frames + frame] = magnitude;
        }
    }

    Spectrogram::from_parts(
        values,
        bins,
        frames,
        signal.sample_rate_hz / bins as f64,
        cfg.hop as f64 / signal.sample_rate_hz,
        bins / 2,
    )
}

/// Dense matrix of dB values produced by [`to_db`].
#[derive(Debug, Clone, PartialEq)]
pub struct DbMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Amplitude dB scaling `20*log10(v / v_max)`, clamped below at `floor_db`.
///
/// The maximum element maps to exactly 0 dB; an all-zero spectrogram maps
/// every element to `floor_db`.
pub fn to_db(spec: &Spectrogram, floor_db: f64) -> Result<DbMatrix> {
    if !(floor_db < 0.0) {
        return Err(Error::argument(format!(
            "floor_db must be negative, got {floor_db}"
        )));
    }
    let peak = spec.values().iter().cloned().fold(0.0f64, f64::max);
    let values = spec
        .values()
        .iter()
        .map(|&v| {
            if peak <= 0.0 || v <= 0.0 {
                floor_db
            } else {
                (20.0 * (v / peak).log10()).max(floor_db)
            }
        })
        .collect();
    Ok(DbMatrix {
        rows: spec.bins(),
        cols: spec.frames(),
        values,
    })
}

/// Renders a dB matrix to an 8-bit image: `floor_db` maps to 0, 0 dB to 255
/// (rounded half-up), then the image is bilinearly resampled to
/// `width x height`. Frequency runs vertically with the 0 Hz row of a
/// centered spectrogram landing mid-image; time runs horizontally.
pub fn render_spectrogram(
    db: &DbMatrix,
    width: usize,
    height: usize,
    floor_db: f64,
) -> Result<GrayImage> {
    if !(floor_db < 0.0) {
        return Err(Error::argument(format!(
            "floor_db must be negative, got {floor_db}"
        )));
    }
    const TOL: f64 = 1e-9;
    let mut pixels = Vec::with_capacity(db.values.len());
    for &v in &db.values {
        if v < floor_db - TOL || v > TOL {
            return Err(Error::argument(format!(
                "dB value {v} outside [{floor_db}, 0]"
            )));
        }
        pixels.push(round_u8((v - floor_db) / (-floor_db) * 255.0));
    }
    let native = GrayImage::new(db.cols, db.rows, pixels)?;
    resize_bilinear(&native, width, height)
}
