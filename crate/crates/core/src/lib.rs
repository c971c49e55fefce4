//! mdforge: micro-Doppler metal classification on synthetic radar data.
//!
//! The pipeline runs end to end from physics to metrics:
//!
//! ```text
//! synth    vibrating-sheet phase modulation -> IQ returns (MDIQv001 files)
//! dsp      windowed STFT -> centered dB spectrogram -> grayscale image
//! imaging  contrast enhancement, bilinear resize, peaks, HOG, augmentation
//! nn       small CNN (conv/batchnorm/pool/dropout/dense) with Adam or SGD
//! metrics  confusion matrix, precision / recall / F1, accuracy
//! pipeline subcommand orchestration, config parsing, manifests, plots
//! ```
//!
//! Every stage is a pure function of its inputs and a 64-bit seed, so any
//! run is reproducible byte for byte.

pub mod dsp;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
