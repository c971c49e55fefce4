//! Instantiated networks: parameter storage, initialization, and the full
//! forward/backward chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::layers::{BatchNormLayer, Cache, ConvLayer, DenseLayer, Layer, LayerGrads};
use crate::nn::tensor::Tensor;
use crate::nn::{LayerSpec, ModelSpec, Shape};

/// Parameter gradients aligned with the network's layer list.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub per_layer: Vec<LayerGrads>,
}

impl Gradients {
    /// Gradient vectors in canonical order (weights before biases, gamma
    /// before beta), matching [`Network::trainable_mut`].
    pub fn flat(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for grads in &self.per_layer {
            match grads {
                LayerGrads::Conv { dw, db } | LayerGrads::Dense { dw, db } => {
                    out.push(dw);
                    out.push(db);
                }
                LayerGrads::BatchNorm { dgamma, dbeta } => {
                    out.push(dgamma);
                    out.push(dbeta);
                }
                LayerGrads::None => {}
            }
        }
        out
    }
}

/// A built model holding its parameters and the spec it came from.
#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) layers: Vec<Layer>,
    spec: ModelSpec,
}

impl Network {
    /// Instantiates `spec` with He-uniform weights (`U(-L, L)` with
    /// `L = sqrt(6 / fan_in)`), zero biases, and identity batch-norm,
    /// drawing from a generator seeded with `seed` in layer order.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Network> {
        let shapes = spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut in_shape = Shape::Spatial {
            channels: 1,
            height: spec.input_size,
            width: spec.input_size,
        };
        for (layer_spec, out_shape) in spec.layers.iter().zip(&shapes) {
            let layer = match (layer_spec, in_shape) {
                (
                    &LayerSpec::Conv { filters, kernel, stride, padding },
                    Shape::Spatial { channels, .. },
                ) => {
                    let fan_in = channels * kernel * kernel;
                    let limit = (6.0 / fan_in as f64).sqrt();
                    let weights = (0..filters * fan_in)
                        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
                        .collect();
                    Layer::Conv(ConvLayer {
                        weights,
                        bias: vec![0.0; filters],
                        filters,
                        in_channels: channels,
                        kernel,
                        stride,
                        padding,
                    })
                }
                (&LayerSpec::BatchNorm, Shape::Spatial { channels, .. }) => {
                    Layer::BatchNorm(BatchNormLayer {
                        gamma: vec![1.0; channels],
                        beta: vec![0.0; channels],
                        running_mean: vec![0.0; channels],
                        running_var: vec![1.0; channels],
                        channels,
                    })
                }
                (&LayerSpec::ReLU, _) => Layer::ReLU,
                (&LayerSpec::MaxPool { window, stride }, _) => Layer::MaxPool { window, stride },
                (&LayerSpec::Dropout { rate }, _) => Layer::Dropout { rate },
                (&LayerSpec::Flatten, _) => Layer::Flatten,
                (&LayerSpec::Dense { units }, Shape::Flat { features }) => {
                    let limit = (6.0 / features as f64).sqrt();
                    let weights = (0..units * features)
                        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
                        .collect();
                    Layer::Dense(DenseLayer {
                        weights,
                        bias: vec![0.0; units],
                        in_dim: features,
                        out_dim: units,
                    })
                }
                (&LayerSpec::Softmax, _) => Layer::Softmax,
                (spec, shape) => {
                    return Err(Error::argument(format!(
                        "cannot build {spec:?} from shape {shape:?}"
                    )))
                }
            };
            layers.push(layer);
            in_shape = *out_shape;
        }
        Ok(Network { layers, spec: spec.clone() })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn input_size(&self) -> usize {
        self.spec.input_size
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    pub fn param_count(&self) -> usize {
        let mut count = 0;
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => count += c.weights.len() + c.bias.len(),
                Layer::BatchNorm(bn) => count += bn.gamma.len() + bn.beta.len(),
                Layer::Dense(d) => count += d.weights.len() + d.bias.len(),
                _ => {}
            }
        }
        count
    }

    /// Trainable parameter vectors in canonical order; aligned with
    /// [`Gradients::flat`].
    pub(crate) fn trainable_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Conv(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                Layer::BatchNorm(bn) => {
                    out.push(&mut bn.gamma);
                    out.push(&mut bn.beta);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    out.push(&mut d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub(crate) fn trainable_ref(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&c.weights);
                    out.push(&c.bias);
                }
                Layer::BatchNorm(bn) => {
                    out.push(&bn.gamma);
                    out.push(&bn.beta);
                }
                Layer::Dense(d) => {
                    out.push(&d.weights);
                    out.push(&d.bias);
                }
                _ => {}
            }
        }
        out
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let s = self.spec.input_size;
        match *batch.shape() {
            [_, 1, h, w] if h == s && w == s => Ok(()),
            ref shape => Err(Error::argument(format!(
                "batch shape {shape:?} does not match model input [B, 1, {s}, {s}]"
            ))),
        }
    }

    /// Training-mode forward pass: dropout active (drawing masks from
    /// `rng`), batch-norm using batch statistics and updating its running
    /// averages. Returns class probabilities and the cache for backward.
    pub fn forward_train(
        &mut self,
        batch: &Tensor,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Tensor, Vec<Cache>)> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in self.layers.iter_mut() {
            let (next, cache) = layer.forward_train(&x, rng)?;
            caches.push(cache);
            x = next;
        }
        Ok((x, caches))
    }

    /// Inference-mode forward pass: dropout is the identity and batch-norm
    /// uses its running statistics.
    pub fn forward_eval(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.forward_eval(&x)?;
        }
        Ok(x)
    }

    /// Backpropagates the mean cross-entropy loss through a cached
    /// training-mode forward pass. The softmax/cross-entropy pair reduces
    /// to `dlogits = (p - onehot) / B`.
    pub fn backward(&self, caches: &[Cache], labels: &[usize]) -> Result<Gradients> {
        let Some(Cache::Softmax { probs }) = caches.last() else {
            return Err(Error::argument(
                "backward requires a cache ending at softmax".to_string(),
            ));
        };
        let [batch, classes] = match *probs.shape() {
            [b, k] => [b, k],
            _ => return Err(Error::argument("softmax cache is not 2-D".to_string())),
        };
        if labels.len() != batch {
            return Err(Error::argument(format!(
                "{} labels for a batch of {batch}",
                labels.len()
            )));
        }
        let mut dcur = probs.clone();
        let scale = 1.0 / batch as f64;
        for (bi, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(Error::argument(format!("label {label} out of range")));
            }
            let row = &mut dcur.data_mut()[bi * classes..(bi + 1) * classes];
            row[label] -= 1.0;
            for v in row.iter_mut() {
                *v *= scale;
            }
        }

        let mut per_layer = vec![LayerGrads::None; self.layers.len()];
        for index in (0..self.layers.len() - 1).rev() {
            let (dx, grads) = self.layers[index].backward(&caches[index], &dcur)?;
            per_layer[index] = grads;
            dcur = dx;
        }
        Ok(Gradients { per_layer })
    }
}

/// Mean cross-entropy `-(1/B) * sum_b ln p[b][label_b]` over a probability
/// batch.
pub fn cross_entropy_loss(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let [batch, classes] = match *probs.shape() {
        [b, k] => [b, k],
        _ => return Err(Error::argument("probabilities must be 2-D".to_string())),
    };
    if labels.len() != batch {
        return Err(Error::argument(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (bi, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::argument(format!("label {label} out of range")));
        }
        total -= probs.data()[bi * classes + label].max(1e-300).ln();
    }
    Ok(total / batch as f64)
}
