use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::data::{augment, Example};
use super::optim::{evaluate, train_step, Metrics, Optimizer, PreparedExample};
use super::{lr_at, RunConfig};
use crate::error::{Error, Result};
use crate::net::{prepare_protein, save_checkpoint, BatchInput, ModelConfig, ModelParams, ProteinInput};

const SHUFFLE: u64 = 1;
const AUGMENT: u64 = 2;
const STEP: u64 = 3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generator that depends only on `seed` and `tags`, never on scheduling.
pub fn derive_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let h = tags.iter().fold(splitmix(seed), |h, &t| splitmix(h ^ splitmix(t)));
    ChaCha8Rng::seed_from_u64(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub step: usize,
    /// Mean training loss over the epoch's steps.
    pub loss: f64,
    pub lr: f64,
    /// Train-mode accuracy over the epoch's batches.
    pub train_accuracy: f64,
    /// Loss of every step of the epoch, in order.
    pub step_losses: Vec<f64>,
    pub valid: Option<Metrics>,
}

impl EpochRecord {
    pub const HEADER: &'static str = "epoch\tstep\tloss\tlr\ttrain_accuracy\tvalid_accuracy\tvalid_loss";

    pub fn log_line(&self) -> String {
        let (va, vl) = match &self.valid {
            Some(m) => (format!("{:.6}", m.accuracy), format!("{:.6}", m.loss)),
            None => ("-".into(), "-".into()),
        };
        format!(
            "{}\t{}\t{:.6}\t{:e}\t{:.6}\t{va}\t{vl}",
            self.epoch, self.step, self.loss, self.lr, self.train_accuracy
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub config: ModelConfig,
    pub best: ModelParams<f32>,
    pub best_epoch: usize,
    pub best_valid_accuracy: Option<f64>,
    pub last: ModelParams<f32>,
    pub history: Vec<EpochRecord>,
}

/// Groups `order` into batches of at most `batch_size` proteins; a protein that would push a
/// nonempty batch past `atom_budget` atoms moves to the next batch.
pub fn make_batches(order: &[usize], atoms: &[usize], batch_size: usize, atom_budget: usize) -> Vec<Vec<usize>> {
    let mut pending: VecDeque<usize> = order.iter().copied().collect();
    let mut batches = Vec::new();
    while !pending.is_empty() {
        let mut batch = Vec::new();
        let mut total = 0;
        let mut deferred = Vec::new();
        while let Some(i) = pending.pop_front() {
            if batch.len() == batch_size {
                pending.push_front(i);
                break;
            }
            if !batch.is_empty() && total + atoms[i] > atom_budget {
                deferred.push(i);
                continue;
            }
            total += atoms[i];
            batch.push(i);
        }
        for d in deferred.into_iter().rev() {
            pending.push_front(d);
        }
        batches.push(batch);
    }
    batches
}

pub fn prepare_examples(examples: &[Example], config: &ModelConfig) -> Result<Vec<PreparedExample>> {
    examples
        .par_iter()
        .map(|e| {
            Ok(PreparedExample {
                id: e.id.clone(),
                input: prepare_protein(&e.hierarchy, config)?,
                label: e.label,
            })
        })
        .collect()
}

fn class_weights(examples: &[Example], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    examples.iter().for_each(|e| counts[e.label] += 1);
    let n = examples.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (classes as f64 * c as f64) })
        .collect()
}

/// Trains on `train_set`, tracking accuracy on `valid_set` after every epoch.
///
/// With an output directory, writes `best.ieck`, `last.ieck` and `train.log` there.
/// `on_epoch` sees every record and stops training by returning false.
pub fn train(
    run: &RunConfig,
    train_set: &[Example],
    valid_set: &[Example],
    out_dir: Option<&Path>,
    on_epoch: &mut (dyn FnMut(&EpochRecord) -> bool + Send),
) -> Result<TrainReport> {
    run.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let classes = run.model.num_classes;
    if let Some(e) = train_set.iter().chain(valid_set).find(|e| e.label >= classes) {
        return Err(Error::Config(format!("{}: label {} but num_classes = {classes}", e.id, e.label)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.train.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| train_inner(run, train_set, valid_set, out_dir, on_epoch))
}

fn train_inner(
    run: &RunConfig,
    train_set: &[Example],
    valid_set: &[Example],
    out_dir: Option<&Path>,
    on_epoch: &mut (dyn FnMut(&EpochRecord) -> bool + Send),
) -> Result<TrainReport> {
    let tc = &run.train;
    let mut model = run.model.clone();
    model.init_seed = tc.seed;
    let mut params = ModelParams::<f32>::init(&model)?;
    log::info!("model has {} trainable parameters", params.count());
    let mut opt = Optimizer::new(&params);
    let weights = tc.class_weighting.then(|| class_weights(train_set, model.num_classes));
    let valid = prepare_examples(valid_set, &model)?;
    let fixed: Option<Vec<ProteinInput>> = if tc.augment {
        None
    } else {
        Some(prepare_examples(train_set, &model)?.into_iter().map(|p| p.input).collect())
    };
    let atoms: Vec<usize> = train_set.iter().map(|e| e.hierarchy.levels[0].node_count()).collect();

    let mut log_file = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = BufWriter::new(File::create(dir.join("train.log"))?);
            writeln!(f, "{}", EpochRecord::HEADER)?;
            Some(f)
        }
        None => None,
    };

    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_acc: Option<f64> = None;
    let mut history = Vec::new();
    let mut step = 0usize;
    for epoch in 0..tc.epochs {
        let lr = lr_at(tc, epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut derive_rng(tc.seed, &[SHUFFLE, epoch as u64]));
        let batches = make_batches(&order, &atoms, tc.batch_size, tc.atom_budget);
        let mut step_losses = Vec::with_capacity(batches.len());
        let mut correct = 0usize;
        for (b, members) in batches.iter().enumerate() {
            let augmented: Vec<ProteinInput>;
            let inputs: Vec<&ProteinInput> = match &fixed {
                Some(all) => members.iter().map(|&i| &all[i]).collect(),
                None => {
                    augmented = members
                        .par_iter()
                        .map(|&i| {
                            let mut rng = derive_rng(tc.seed, &[AUGMENT, epoch as u64, i as u64]);
                            let h = augment(&train_set[i].hierarchy, tc, &mut rng)?;
                            prepare_protein(&h, &model)
                        })
                        .collect::<Result<_>>()?;
                    augmented.iter().collect()
                }
            };
            let batch = BatchInput::from_proteins(&inputs)?;
            let labels: Vec<usize> = members.iter().map(|&i| train_set[i].label).collect();
            let mut rng = derive_rng(tc.seed, &[STEP, epoch as u64, b as u64]);
            let outcome = train_step(&batch, &labels, &mut params, &mut opt, &model, tc, lr, &mut rng, weights.as_deref())
                .map_err(|e| match e {
                    Error::NonFinite(msg) => {
                        let ids: Vec<&str> = members.iter().map(|&i| train_set[i].id.as_str()).collect();
                        Error::NonFinite(format!("{msg} at epoch {epoch}, step {step}, batch {ids:?}"))
                    }
                    other => other,
                })?;
            step += 1;
            step_losses.push(outcome.loss);
            correct += outcome.correct;
        }
        let valid_metrics = if valid.is_empty() {
            None
        } else {
            Some(evaluate(&params, &model, &valid)?)
        };
        let record = EpochRecord {
            epoch,
            step,
            loss: step_losses.iter().sum::<f64>() / batches.len() as f64,
            lr,
            train_accuracy: correct as f64 / train_set.len() as f64,
            step_losses,
            valid: valid_metrics,
        };
        log::info!("{}", record.log_line());
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", record.log_line())?;
            f.flush()?;
        }
        match record.valid.as_ref().map(|m| m.accuracy) {
            Some(acc) if best_acc.is_none_or(|b| acc > b) => {
                best_acc = Some(acc);
                best_epoch = epoch;
                best = params.clone();
                if let Some(dir) = out_dir {
                    save_checkpoint(&dir.join("best.ieck"), &model, &best)?;
                }
            }
            None => {
                best_epoch = epoch;
                best = params.clone();
            }
            _ => {}
        }
        let keep_going = on_epoch(&record);
        history.push(record);
        if !keep_going {
            break;
        }
    }
    if let Some(dir) = out_dir {
        save_checkpoint(&dir.join("last.ieck"), &model, &params)?;
        if best_acc.is_none() {
            save_checkpoint(&dir.join("best.ieck"), &model, &best)?;
        }
    }
    Ok(TrainReport {
        config: model,
        best,
        best_epoch,
        best_valid_accuracy: best_acc,
        last: params,
        history,
    })
}
