//! Adam training loop with plateau decay and best-validation checkpoints.

use std::rc::Rc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{Architecture, GnnModel, GraphInputs};
use super::tape::Tensor;
use crate::error::{Error, Result};
use crate::generate::rng_for;
use crate::model::BipartiteGraph;

const SPLIT_STREAM: u64 = 3;
const SHUFFLE_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplier applied when the monitored loss plateaus.
    pub lr_decay: f64,
    /// Epochs without improvement before the learning rate decays.
    pub lr_patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub class_weighting: bool,
    /// Instances whose gradients are summed per optimizer step.
    pub batch_size: usize,
    /// Stop after this many epochs without improvement.
    pub early_stop_patience: Option<usize>,
    /// Seed for the initial weights.
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 1e-3,
            lr_decay: 0.5,
            lr_patience: 10,
            validation_fraction: 0.2,
            seed: 0,
            class_weighting: false,
            batch_size: 1,
            early_stop_patience: None,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidArgument(
                "validation fraction must lie in (0,1)".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument("bad learning-rate schedule".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// A graph together with its 0/1 targets.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub graph: BipartiteGraph,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub class_weights: [f64; 2],
    /// Every training label belongs to the same class.
    pub degenerate_labels: bool,
}

/// Adam with β = (0.9, 0.999) and ε = 1e−8.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect()
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let it = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((w, &g), (m, v)) in it {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *w -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

struct Prepared {
    inputs: GraphInputs,
    targets: Rc<[f64]>,
    weights: Rc<[f64]>,
}

fn accuracy(logits: &[f64], labels: &[f64]) -> (usize, usize) {
    let correct = logits
        .iter()
        .zip(labels)
        .filter(|(z, y)| (**z >= 0.0) == (**y >= 0.5))
        .count();
    (correct, labels.len())
}

/// Mean loss and pooled label accuracy over `set`.
fn evaluate(model: &GnnModel, data: &[Prepared], set: &[usize]) -> (f64, f64) {
    let mut loss = 0.0;
    let (mut hit, mut total) = (0, 0);
    for &i in set {
        let d = &data[i];
        let z = model.logits(&d.inputs);
        loss += model.loss(&d.inputs, &d.targets, &d.weights);
        let (h, t) = accuracy(&z, &d.targets);
        hit += h;
        total += t;
    }
    (loss / set.len() as f64, hit as f64 / total.max(1) as f64)
}

/// Label accuracy of `model` on one example.
pub fn label_accuracy(model: &GnnModel, example: &TrainingExample) -> Result<f64> {
    let z = model.logits(&GraphInputs::new(&example.graph)?);
    let (h, t) = accuracy(&z, &example.labels);
    Ok(h as f64 / t.max(1) as f64)
}

/// Deterministic train/validation split of `n` items.
pub fn split_indices(n: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, SPLIT_STREAM));
    let n_val = ((validation_fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Trains a fresh model of architecture `arch`.
pub fn train(
    arch: Architecture,
    dataset: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<(GnnModel, TrainingLog)> {
    train_from(GnnModel::new(arch, cfg.init_seed), dataset, cfg)
}

/// Continues training `model`.
pub fn train_from(
    mut model: GnnModel,
    dataset: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<(GnnModel, TrainingLog)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    for (k, ex) in dataset.iter().enumerate() {
        if ex.labels.len() != ex.graph.num_vars {
            return Err(Error::PredictionShape {
                expected: ex.graph.num_vars,
                got: ex.labels.len(),
            });
        }
        if ex.labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "example {k} has non-binary labels"
            )));
        }
    }
    let (train_idx, val_idx) = split_indices(dataset.len(), cfg.validation_fraction, cfg.seed);
    let (mut n0, mut n1) = (0usize, 0usize);
    for &i in &train_idx {
        for &y in &dataset[i].labels {
            if y == 1.0 {
                n1 += 1;
            } else {
                n0 += 1;
            }
        }
    }
    let degenerate = n0 == 0 || n1 == 0;
    if degenerate {
        log::warn!(
            "degenerate labels: every training label is {}",
            if n1 == 0 { 0 } else { 1 }
        );
    }
    let class_weights = if cfg.class_weighting && !degenerate {
        let total = (n0 + n1) as f64;
        [total / (2.0 * n0 as f64), total / (2.0 * n1 as f64)]
    } else {
        [1.0, 1.0]
    };
    let data = dataset
        .iter()
        .map(|ex| {
            let weights: Vec<f64> = ex
                .labels
                .iter()
                .map(|&y| class_weights[y as usize])
                .collect();
            Ok(Prepared {
                inputs: GraphInputs::new(&ex.graph)?,
                targets: Rc::from(ex.labels.clone()),
                weights: Rc::from(weights),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut adam = Adam::new(model.params());
    let mut rng = rng_for(cfg.seed, SHUFFLE_STREAM);
    let mut lr = cfg.learning_rate;
    let mut order = train_idx.clone();
    let mut best = (f64::INFINITY, model.params().to_vec(), 0usize);
    let (mut since_best, mut since_decay) = (0usize, 0usize);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut total: Option<Vec<Tensor>> = None;
            for &i in batch {
                let d = &data[i];
                let (_, g) = model.loss_and_gradient(&d.inputs, &d.targets, &d.weights);
                match &mut total {
                    None => total = Some(g),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g) {
                            a.data_mut()
                                .iter_mut()
                                .zip(b.data())
                                .for_each(|(x, y)| *x += y);
                        }
                    }
                }
            }
            let mut grads = total.expect("nonempty batch");
            if batch.len() > 1 {
                let s = batch.len() as f64;
                grads
                    .iter_mut()
                    .for_each(|g| g.data_mut().iter_mut().for_each(|x| *x /= s));
            }
            adam.step(model.params_mut(), &grads, lr);
        }
        let (train_loss, train_accuracy) = evaluate(&model, &data, &train_idx);
        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&model, &data, &val_idx);
            (Some(l), Some(a))
        };
        epochs.push(EpochLog {
            epoch,
            learning_rate: lr,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        let monitored = val_loss.unwrap_or(train_loss);
        if monitored < best.0 {
            best = (monitored, model.params().to_vec(), epoch);
            since_best = 0;
            since_decay = 0;
        } else {
            since_best += 1;
            since_decay += 1;
            if since_decay >= cfg.lr_patience {
                lr *= cfg.lr_decay;
                since_decay = 0;
            }
            if cfg.early_stop_patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    let best_epoch = best.2;
    if best_epoch > 0 {
        model.params_mut().clone_from_slice(&best.1);
    }
    Ok((
        model,
        TrainingLog {
            epochs,
            best_epoch,
            train_indices: train_idx,
            val_indices: val_idx,
            class_weights,
            degenerate_labels: degenerate,
        },
    ))
}
