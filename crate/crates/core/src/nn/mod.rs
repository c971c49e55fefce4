//! A small dependency-free convolutional network: declarative layer stacks,
//! forward/backward passes, Adam/SGD training, checkpointing, and a
//! finite-difference gradient checker.

mod checkpoint;
mod gradcheck;
mod layers;
mod network;
mod tensor;
mod train;

pub use checkpoint::{
    checkpoint_to_bytes, load_checkpoint, network_from_bytes, save_checkpoint, CHECKPOINT_MAGIC,
};
pub use gradcheck::gradient_check;
pub use layers::{conv_output_extent, softmax_forward, LayerGrads};
pub use network::{cross_entropy_loss, Gradients, Network};
pub use tensor::Tensor;
pub use train::{
    evaluate, predict, train, EpochRecord, LabeledSet, OptimizerKind, TrainConfig, TrainHistory,
};

use crate::error::{Error, Result};

/// One layer of a declarative model description.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize, stride: usize, padding: usize },
    BatchNorm,
    ReLU,
    MaxPool { window: usize, stride: usize },
    Dropout { rate: f64 },
    Flatten,
    Dense { units: usize },
    Softmax,
}

/// Activation shape flowing between layers during validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Spatial { channels: usize, height: usize, width: usize },
    Flat { features: usize },
}

/// A model: square single-channel input plus an ordered layer stack ending
/// in `Dense` + `Softmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input_size: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Checks the shape chain and returns each layer's output shape.
    pub fn validate(&self) -> Result<Vec<Shape>> {
        if self.input_size == 0 {
            return Err(Error::argument("input_size must be positive".to_string()));
        }
        if self.layers.is_empty() {
            return Err(Error::argument("model has no layers".to_string()));
        }
        let mut shape = Shape::Spatial {
            channels: 1,
            height: self.input_size,
            width: self.input_size,
        };
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let last = i == self.layers.len() - 1;
            shape = match (layer, shape) {
                (
                    &LayerSpec::Conv { filters, kernel, stride, padding },
                    Shape::Spatial { height, width, .. },
                ) => {
                    if filters == 0 || kernel == 0 || stride == 0 {
                        return Err(Error::argument(format!(
                            "layer {i}: conv parameters must be positive"
                        )));
                    }
                    if height + 2 * padding < kernel || width + 2 * padding < kernel {
                        return Err(Error::argument(format!(
                            "layer {i}: kernel {kernel} exceeds padded input {height}x{width}"
                        )));
                    }
                    Shape::Spatial {
                        channels: filters,
                        height: conv_output_extent(height, kernel, stride, padding),
                        width: conv_output_extent(width, kernel, stride, padding),
                    }
                }
                (&LayerSpec::BatchNorm, s @ Shape::Spatial { .. }) => s,
                (&LayerSpec::ReLU, s) => s,
                (
                    &LayerSpec::MaxPool { window, stride },
                    Shape::Spatial { channels, height, width },
                ) => {
                    if window == 0 || stride == 0 || window > height || window > width {
                        return Err(Error::argument(format!(
                            "layer {i}: maxpool window {window} incompatible with {height}x{width}"
                        )));
                    }
                    Shape::Spatial {
                        channels,
                        height: (height - window) / stride + 1,
                        width: (width - window) / stride + 1,
                    }
                }
                (&LayerSpec::Dropout { rate }, s) => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::argument(format!(
                            "layer {i}: dropout rate {rate} outside [0, 1)"
                        )));
                    }
                    s
                }
                (&LayerSpec::Flatten, Shape::Spatial { channels, height, width }) => {
                    Shape::Flat { features: channels * height * width }
                }
                (&LayerSpec::Dense { units }, Shape::Flat { .. }) => {
                    if units == 0 {
                        return Err(Error::argument(format!("layer {i}: dense needs units > 0")));
                    }
                    Shape::Flat { features: units }
                }
                (&LayerSpec::Softmax, s @ Shape::Flat { .. }) => {
                    if !last {
                        return Err(Error::argument(
                            "softmax must be the final layer".to_string(),
                        ));
                    }
                    s
                }
                (layer, shape) => {
                    return Err(Error::argument(format!(
                        "layer {i}: {layer:?} cannot follow activation shape {shape:?}"
                    )))
                }
            };
            shapes.push(shape);
        }
        match (
            self.layers.last(),
            self.layers.len().checked_sub(2).map(|i| &self.layers[i]),
        ) {
            (Some(LayerSpec::Softmax), Some(LayerSpec::Dense { .. })) => {}
            _ => {
                return Err(Error::argument(
                    "model must end with Dense followed by Softmax".to_string(),
                ))
            }
        }
        Ok(shapes)
    }

    /// Output class count (units of the final dense layer).
    pub fn num_classes(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|layer| match layer {
                LayerSpec::Dense { units } => Some(*units),
                _ => None,
            })
            .unwrap_or(0)
    }

    /// One line per layer, preceded by the input size.
    pub fn to_descriptor(&self) -> String {
        let mut out = format!("input {}\n", self.input_size);
        for layer in &self.layers {
            let line = match layer {
                LayerSpec::Conv { filters, kernel, stride, padding } => {
                    format!("conv {filters} {kernel} {stride} {padding}")
                }
                LayerSpec::BatchNorm => "batchnorm".to_string(),
                LayerSpec::ReLU => "relu".to_string(),
                LayerSpec::MaxPool { window, stride } => format!("maxpool {window} {stride}"),
                LayerSpec::Dropout { rate } => format!("dropout {rate}"),
                LayerSpec::Flatten => "flatten".to_string(),
                LayerSpec::Dense { units } => format!("dense {units}"),
                LayerSpec::Softmax => "softmax".to_string(),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_descriptor(text: &str) -> Result<ModelSpec> {
        let mut input_size = None;
        let mut layers = Vec::new();
        for (index, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let kind = tokens.next().unwrap();
            let mut numbers = Vec::new();
            for token in tokens {
                numbers.push(token.parse::<f64>().map_err(|_| Error::Parse {
                    line: index + 1,
                    message: format!("bad number '{token}' in model descriptor"),
                })?);
            }
            let bad = |msg: &str| Error::Parse { line: index + 1, message: msg.to_string() };
            let int = |v: f64| v as usize;
            match (kind, numbers.as_slice()) {
                ("input", [size]) => input_size = Some(int(*size)),
                ("conv", [f, k, s, p]) => layers.push(LayerSpec::Conv {
                    filters: int(*f),
                    kernel: int(*k),
                    stride: int(*s),
                    padding: int(*p),
                }),
                ("batchnorm", []) => layers.push(LayerSpec::BatchNorm),
                ("relu", []) => layers.push(LayerSpec::ReLU),
                ("maxpool", [w, s]) => {
                    layers.push(LayerSpec::MaxPool { window: int(*w), stride: int(*s) })
                }
                ("dropout", [r]) => layers.push(LayerSpec::Dropout { rate: *r }),
                ("flatten", []) => layers.push(LayerSpec::Flatten),
                ("dense", [u]) => layers.push(LayerSpec::Dense { units: int(*u) }),
                ("softmax", []) => layers.push(LayerSpec::Softmax),
                _ => return Err(bad(&format!("unknown model descriptor line '{line}'"))),
            }
        }
        let spec = ModelSpec {
            input_size: input_size
                .ok_or_else(|| Error::format("model descriptor missing input line".to_string()))?,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// The reference classifier: two conv/BN/ReLU/pool stages, dropout, and a
/// dense head over three classes.
pub fn reference_model_spec(input_size: usize) -> ModelSpec {
    ModelSpec {
        input_size,
        layers: vec![
            LayerSpec::Conv { filters: 16, kernel: 3, stride: 1, padding: 1 },
            LayerSpec::BatchNorm,
            LayerSpec::ReLU,
            LayerSpec::MaxPool { window: 2, stride: 2 },
            LayerSpec::Conv { filters: 32, kernel: 3, stride: 1, padding: 1 },
            LayerSpec::BatchNorm,
            LayerSpec::ReLU,
            LayerSpec::MaxPool { window: 2, stride: 2 },
            LayerSpec::Dropout { rate: 0.25 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 64 },
            LayerSpec::ReLU,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense { units: 3 },
            LayerSpec::Softmax,
        ],
    }
}
