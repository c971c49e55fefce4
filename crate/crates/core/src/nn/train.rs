//! Training loop, optimizers, and dataset plumbing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, GrayImage};
use crate::nn::network::{cross_entropy_loss, Network};
use crate::nn::tensor::Tensor;
use crate::nn::ModelSpec;
use crate::seed::{derive_seed, tags};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Square input size every image is resized to before batching.
    pub canonical_input: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            seed: 0,
            canonical_input: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::argument("epochs and batch_size must be >= 1".to_string()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::argument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.canonical_input == 0 {
            return Err(Error::argument("canonical_input must be positive".to_string()));
        }
        Ok(())
    }
}

/// Loss/accuracy record of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<TrainHistory> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "epoch,train_loss,train_acc,val_loss,val_acc" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "bad or missing history header".to_string(),
                })
            }
        }
        let mut records = Vec::new();
        for (index, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    line: index + 1,
                    message: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: index + 1,
                    message: format!("bad number '{s}'"),
                })
            };
            records.push(EpochRecord {
                epoch: parse(fields[0])? as usize,
                train_loss: parse(fields[1])?,
                train_acc: parse(fields[2])?,
                val_loss: parse(fields[3])?,
                val_acc: parse(fields[4])?,
            });
        }
        Ok(TrainHistory { records })
    }
}

/// Images flattened to `[0, 1]` inputs at a fixed size, with labels.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub input_size: usize,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn from_images(items: &[(GrayImage, usize)], input_size: usize) -> Result<LabeledSet> {
        let mut inputs = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        for (image, label) in items {
            let resized = if image.width() == input_size && image.height() == input_size {
                image.clone()
            } else {
                resize_bilinear(image, input_size, input_size)?
            };
            inputs.push(resized.pixels().iter().map(|&p| f64::from(p) / 255.0).collect());
            labels.push(*label);
        }
        Ok(LabeledSet { input_size, inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let s = self.input_size;
        let mut data = Vec::with_capacity(indices.len() * s * s);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.inputs[i]);
            labels.push(self.labels[i]);
        }
        let tensor = Tensor::from_vec(vec![indices.len(), 1, s, s], data)
            .expect("batch data length is consistent by construction");
        (tensor, labels)
    }
}

struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    fn new(kind: OptimizerKind, learning_rate: f64, param_sizes: &[usize]) -> Optimizer {
        Optimizer {
            kind,
            learning_rate,
            step: 0,
            first_moment: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn apply(&mut self, params: Vec<&mut Vec<f64>>, grads: &[&Vec<f64>]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (param, grad) in params.into_iter().zip(grads) {
                    for (p, &g) in param.iter_mut().zip(grad.iter()) {
                        *p -= self.learning_rate * g;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let t = self.step as f64;
                let correction1 = 1.0 - beta1.powf(t);
                let correction2 = 1.0 - beta2.powf(t);
                for ((param, grad), (m, v)) in params
                    .into_iter()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut().zip(&mut self.second_moment))
                {
                    for i in 0..param.len() {
                        let g = grad[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / correction1;
                        let v_hat = v[i] / correction2;
                        param[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

fn correct_count(probs: &Tensor, labels: &[usize]) -> usize {
    let classes = probs.shape()[1];
    labels
        .iter()
        .enumerate()
        .filter(|&(bi, &label)| {
            let row = &probs.data()[bi * classes..(bi + 1) * classes];
            argmax(row) == label
        })
        .count()
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean loss and accuracy of `net` over `set` in inference mode.
pub fn evaluate(net: &Network, set: &LabeledSet, batch_size: usize) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::argument("cannot evaluate an empty set".to_string()));
    }
    let indices: Vec<usize> = (0..set.len()).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in indices.chunks(batch_size.max(1)) {
        let (batch, labels) = set.batch(chunk);
        let probs = net.forward_eval(&batch)?;
        loss_sum += cross_entropy_loss(&probs, &labels)? * labels.len() as f64;
        correct += correct_count(&probs, &labels);
    }
    Ok((loss_sum / set.len() as f64, correct as f64 / set.len() as f64))
}

/// Trains `spec` on `train_set`, tracking `val_set` each epoch.
///
/// Initialization, shuffling, and dropout masks all derive from `cfg.seed`,
/// so identical inputs reproduce the identical model and history. Training
/// loss/accuracy are accumulated over the minibatches as the epoch runs;
/// validation metrics come from an inference-mode pass at epoch end.
pub fn train(
    spec: &ModelSpec,
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::argument("train and validation sets must be nonempty".to_string()));
    }
    if train_set.input_size != spec.input_size || val_set.input_size != spec.input_size {
        return Err(Error::argument(format!(
            "dataset input size {} does not match model input {}",
            train_set.input_size, spec.input_size
        )));
    }
    let classes = spec.num_classes();
    if let Some(&bad) = train_set.labels.iter().chain(&val_set.labels).find(|&&l| l >= classes) {
        return Err(Error::argument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }

    let mut net = Network::build(spec, derive_seed(cfg.seed, tags::TRAIN_INIT, &[]))?;
    let sizes: Vec<usize> = net.trainable_ref().iter().map(|p| p.len()).collect();
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, &sizes);

    let mut history = TrainHistory::default();
    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            tags::TRAIN_SHUFFLE,
            &[epoch as u64],
        ));
        indices.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch_index, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            let (batch, labels) = train_set.batch(chunk);
            let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.seed,
                tags::TRAIN_DROPOUT,
                &[epoch as u64, batch_index as u64],
            ));
            let (probs, caches) = net.forward_train(&batch, &mut dropout_rng)?;
            loss_sum += cross_entropy_loss(&probs, &labels)? * labels.len() as f64;
            correct += correct_count(&probs, &labels);
            let grads = net.backward(&caches, &labels)?;
            optimizer.apply(net.trainable_mut(), &grads.flat());
        }

        let (val_loss, val_acc) = evaluate(&net, val_set, cfg.batch_size)?;
        history.records.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss,
            val_acc,
        });
    }
    Ok((net, history))
}

/// Classifies one image: the class is the argmax of the output
/// probabilities, ties resolving to the lowest class index.
pub fn predict(net: &Network, image: &GrayImage) -> Result<(usize, Vec<f64>)> {
    let set = LabeledSet::from_images(&[(image.clone(), 0)], net.input_size())?;
    let (batch, _) = set.batch(&[0]);
    let probs = net.forward_eval(&batch)?;
    let row = probs.data().to_vec();
    Ok((argmax(&row), row))
}
