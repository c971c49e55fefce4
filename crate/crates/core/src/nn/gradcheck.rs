//! Finite-difference verification of the backward pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::layers::Layer;
use crate::nn::network::{cross_entropy_loss, Network};
use crate::nn::tensor::Tensor;
use crate::nn::{LayerSpec, ModelSpec};

// Central differences carry O(h^2) truncation error (they are exact only
// for quadratic objectives); 1e-4 keeps that near 1e-8 relative while f64
// rounding noise stays around 1e-11.
const STEP: f64 = 1e-4;
const PARAM_LIMIT: usize = 10_000;

/// Compares every analytic parameter gradient against a central finite
/// difference of the loss and returns the worst relative error
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// Dropout layers are forced to the identity (rate 0) so the loss is a
/// deterministic function of the parameters; batch norm runs in training
/// mode on both paths. The model must stay under 10k parameters.
pub fn gradient_check(
    spec: &ModelSpec,
    batch: &Tensor,
    labels: &[usize],
    seed: u64,
) -> Result<f64> {
    let frozen = ModelSpec {
        input_size: spec.input_size,
        layers: spec
            .layers
            .iter()
            .map(|layer| match layer {
                LayerSpec::Dropout { .. } => LayerSpec::Dropout { rate: 0.0 },
                other => other.clone(),
            })
            .collect(),
    };
    let mut net = Network::build(&frozen, seed)?;
    if net.param_count() >= PARAM_LIMIT {
        return Err(Error::argument(format!(
            "gradient check limited to {PARAM_LIMIT} parameters, model has {}",
            net.param_count()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, caches) = net.forward_train(batch, &mut rng)?;
    let analytic = net.backward(&caches, labels)?;
    let analytic_flat: Vec<Vec<f64>> = analytic.flat().into_iter().cloned().collect();

    let mut worst = 0.0f64;
    let slots = trainable_slot_count(&net);
    for slot in 0..slots {
        let len = trainable_len(&net, slot);
        for i in 0..len {
            let original = get_param(&net, slot, i);

            set_param(&mut net, slot, i, original + STEP);
            let loss_plus = loss_of(&mut net, batch, labels)?;
            set_param(&mut net, slot, i, original - STEP);
            let loss_minus = loss_of(&mut net, batch, labels)?;
            set_param(&mut net, slot, i, original);

            let numeric = (loss_plus - loss_minus) / (2.0 * STEP);
            let a = analytic_flat[slot][i];
            let error = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if error > worst {
                worst = error;
            }
        }
    }
    Ok(worst)
}

fn loss_of(net: &mut Network, batch: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (probs, _) = net.forward_train(batch, &mut rng)?;
    cross_entropy_loss(&probs, labels)
}

fn trainable_slot_count(net: &Network) -> usize {
    net.layers
        .iter()
        .map(|l| match l {
            Layer::Conv(_) | Layer::BatchNorm(_) | Layer::Dense(_) => 2,
            _ => 0,
        })
        .sum()
}

fn with_slot<R>(net: &mut Network, slot: usize, f: impl FnOnce(&mut Vec<f64>) -> R) -> R {
    let mut index = 0usize;
    for layer in net.layers.iter_mut() {
        let vecs: Vec<&mut Vec<f64>> = match layer {
            Layer::Conv(c) => vec![&mut c.weights, &mut c.bias],
            Layer::BatchNorm(bn) => vec![&mut bn.gamma, &mut bn.beta],
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
            _ => vec![],
        };
        for vec in vecs {
            if index == slot {
                return f(vec);
            }
            index += 1;
        }
    }
    unreachable!("slot {slot} out of range");
}

fn slot_ref<'a>(net: &'a Network, slot: usize) -> &'a Vec<f64> {
    let mut index = 0usize;
    for layer in &net.layers {
        let vecs: Vec<&Vec<f64>> = match layer {
            Layer::Conv(c) => vec![&c.weights, &c.bias],
            Layer::BatchNorm(bn) => vec![&bn.gamma, &bn.beta],
            Layer::Dense(d) => vec![&d.weights, &d.bias],
            _ => vec![],
        };
        for vec in vecs {
            if index == slot {
                return vec;
            }
            index += 1;
        }
    }
    unreachable!("slot {slot} out of range");
}

fn trainable_len(net: &Network, slot: usize) -> usize {
    slot_ref(net, slot).len()
}

fn get_param(net: &Network, slot: usize, i: usize) -> f64 {
    slot_ref(net, slot)[i]
}

fn set_param(net: &mut Network, slot: usize, i: usize, value: f64) {
    with_slot(net, slot, |v| v[i] = value);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len: usize = shape.iter().product();
        Tensor::from_vec(
            shape.to_vec(),
            (0..len).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn linear_model_gradients_are_exact() {
        let spec = ModelSpec {
            input_size: 6,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 3 },
                LayerSpec::Softmax,
            ],
        };
        let batch = random_batch(&[4, 1, 6, 6], 1);
        let error = gradient_check(&spec, &batch, &[0, 1, 2, 0], 3).unwrap();
        assert!(error < 1e-6, "relative error {error}");
    }

    #[test]
    fn conv_relu_dense_gradients_match() {
        let spec = ModelSpec {
            input_size: 8,
            layers: vec![
                LayerSpec::Conv { filters: 4, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::ReLU,
                LayerSpec::MaxPool { window: 2, stride: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 3 },
                LayerSpec::Softmax,
            ],
        };
        let batch = random_batch(&[3, 1, 8, 8], 2);
        let error = gradient_check(&spec, &batch, &[2, 0, 1], 5).unwrap();
        assert!(error < 1e-3, "relative error {error}");
    }

    #[test]
    fn dropout_forced_to_identity_leaves_error_unchanged() {
        let with_dropout = ModelSpec {
            input_size: 6,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 8 },
                LayerSpec::ReLU,
                LayerSpec::Dropout { rate: 0.5 },
                LayerSpec::Dense { units: 3 },
                LayerSpec::Softmax,
            ],
        };
        let without: ModelSpec = ModelSpec {
            input_size: 6,
            layers: with_dropout
                .layers
                .iter()
                .map(|l| match l {
                    LayerSpec::Dropout { .. } => LayerSpec::Dropout { rate: 0.0 },
                    other => other.clone(),
                })
                .collect(),
        };
        let batch = random_batch(&[2, 1, 6, 6], 7);
        let a = gradient_check(&with_dropout, &batch, &[1, 2], 9).unwrap();
        let b = gradient_check(&without, &batch, &[1, 2], 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_models_are_rejected() {
        let spec = ModelSpec {
            input_size: 32,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 64 },
                LayerSpec::ReLU,
                LayerSpec::Dense { units: 3 },
                LayerSpec::Softmax,
            ],
        };
        let batch = Tensor::zeros(&[1, 1, 32, 32]);
        assert!(gradient_check(&spec, &batch, &[0], 0).is_err());
    }
}
