use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TrainConfig;
use crate::autodiff::{Tape, Tensor, BN_MOMENTUM};
use crate::error::{Error, Result};
use crate::net::{model_forward, predict, BatchInput, ForwardMode, ModelConfig, ModelParams, ParamKind, ProteinInput, Regularizers};

/// A protein with its neighborhoods already built for eval-mode use.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExample {
    pub id: String,
    pub input: ProteinInput,
    pub label: usize,
}

/// Heavy-ball momentum state, one velocity per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub velocity: Vec<Tensor<f32>>,
}

impl Optimizer {
    pub fn new(params: &ModelParams<f32>) -> Self {
        Optimizer {
            velocity: params.tensors.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Cross-entropy plus the weight-decay term.
    pub loss: f64,
    pub data_loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
    /// Proteins whose train-mode argmax matched the label.
    pub correct: usize,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn cross_entropy(row: &[f64], label: usize) -> f64 {
    let mx = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
    z.ln() - (row[label] - mx)
}

/// Scales `grads` in place to global norm at most `max_norm`; returns the norm before scaling.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= k);
    }
    norm
}

/// One optimizer step on `batch`: forward in training mode, softmax cross-entropy plus
/// `l2 / 2 * sum ||W||^2` over weights, clipping, then `v <- mu v + g; theta <- theta - lr v`.
/// Batch-norm running statistics move towards the batch statistics.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    batch: &BatchInput,
    labels: &[usize],
    params: &mut ModelParams<f32>,
    opt: &mut Optimizer,
    model: &ModelConfig,
    config: &TrainConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
    class_weights: Option<&[f64]>,
) -> Result<StepOutcome> {
    let reg = Regularizers {
        feature_noise: config.feature_noise_sigma,
        noise_every_conv: config.noise_every_conv,
        atom_dropout: config.atom_feature_dropout_p,
        dropout: true,
    };
    let mut tape = Tape::<f32>::new();
    let out = model_forward(&mut tape, batch, params, model, ForwardMode::Train { rng, reg })?;
    let loss = tape.softmax_cross_entropy(out.scores, labels, class_weights)?;
    let data_loss = f64::from(tape.value(loss).data[0]);
    if !f64::is_finite(data_loss) {
        return Err(Error::NonFinite(format!("training loss {data_loss}")));
    }
    let scores = tape.value(out.scores);
    let correct = labels
        .iter()
        .enumerate()
        .filter(|(r, &y)| argmax(&scores.row(*r).iter().map(|&v| f64::from(v)).collect::<Vec<_>>()) == y)
        .count();
    tape.backward(loss)?;

    let mut decay = 0.0;
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(params.tensors.len());
    for ((t, &v), kind) in params.tensors.iter().zip(&out.params).zip(&params.kinds) {
        let mut g: Vec<f64> = match tape.grad(v) {
            Some(g) => g.data.iter().map(|&x| f64::from(x)).collect(),
            None => vec![0.0; t.len()],
        };
        if *kind == ParamKind::Weight && config.l2 > 0.0 {
            decay += 0.5 * config.l2 * t.sum_squares();
            g.iter_mut().zip(&t.data).for_each(|(g, &w)| *g += config.l2 * f64::from(w));
        }
        grads.push(g);
    }
    let grad_norm = clip_global_norm(&mut grads, config.grad_clip_norm);
    if !grad_norm.is_finite() {
        return Err(Error::NonFinite(format!("gradient norm {grad_norm}")));
    }
    momentum_update(params, opt, &grads, lr, config.momentum);
    for (name, stats) in &out.batch_stats {
        let (mean, var) = params.buffer_mut(name)?;
        for (r, b) in mean.iter_mut().zip(&stats.mean) {
            *r = f64::from((BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b) as f32);
        }
        for (r, b) in var.iter_mut().zip(&stats.var) {
            *r = f64::from((BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b) as f32);
        }
    }
    Ok(StepOutcome {
        loss: data_loss + decay,
        data_loss,
        grad_norm,
        clipped: grad_norm > config.grad_clip_norm,
        correct,
    })
}

/// `v <- mu v + g; theta <- theta - lr v` for every parameter tensor.
pub fn momentum_update(params: &mut ModelParams<f32>, opt: &mut Optimizer, grads: &[Vec<f64>], lr: f64, momentum: f64) {
    for ((t, v), g) in params.tensors.iter_mut().zip(&mut opt.velocity).zip(grads) {
        for ((w, vel), &gi) in t.data.iter_mut().zip(v.data.iter_mut()).zip(g) {
            *vel = (momentum * f64::from(*vel) + gi) as f32;
            *w = (f64::from(*w) - lr * f64::from(*vel)) as f32;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Fraction of proteins whose highest score is their label.
    pub accuracy: f64,
    /// Accuracy restricted to each class; `None` for classes without examples.
    pub per_class: Vec<Option<f64>>,
    /// Mean cross-entropy.
    pub loss: f64,
    pub count: usize,
    pub predictions: Vec<usize>,
}

/// Eval-mode metrics, one protein at a time.
pub fn evaluate(params: &ModelParams<f32>, model: &ModelConfig, examples: &[PreparedExample]) -> Result<Metrics> {
    let scores = examples
        .par_iter()
        .map(|e| {
            let batch = BatchInput::from_proteins(&[&e.input])?;
            Ok(predict(&batch, params, model)?.remove(0))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    if let Some(e) = examples.iter().find(|e| e.label >= model.num_classes) {
        return Err(Error::InvalidArgument(format!("{}: label {} for {} classes", e.id, e.label, model.num_classes)));
    }
    Ok(metrics_from_scores(&scores, &labels, model.num_classes))
}

/// Accuracy, per-class accuracy and mean cross-entropy of score rows; ties go to the lowest class.
pub fn metrics_from_scores(scores: &[Vec<f64>], labels: &[usize], classes: usize) -> Metrics {
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(labels.len());
    for (&y, s) in labels.iter().zip(scores) {
        let p = argmax(s);
        predictions.push(p);
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
        loss += cross_entropy(s, y);
    }
    let n = labels.len();
    let correct: usize = hits.iter().sum();
    Metrics {
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        per_class: hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
            .collect(),
        loss: if n == 0 { 0.0 } else { loss / n as f64 },
        count: n,
        predictions,
    }
}
