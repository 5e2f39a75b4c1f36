use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::input::{BatchInput, BatchLevel, ProteinInput};
use super::params::PHYSICAL_DIM;
use super::{ModelConfig, ModelParams};
use crate::autodiff::{BatchStats, Real, Tape, Tensor, Var, LEAKY_SLOPE};
use crate::error::{Error, Result};

/// Train-time perturbations applied inside the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizers {
    /// Standard deviation of Gaussian noise added to features before convolutions.
    pub feature_noise: f64,
    /// Add noise before every convolution instead of only before intrinsic-extrinsic ones.
    pub noise_every_conv: bool,
    /// Probability of zeroing all features of a node before each intrinsic-extrinsic conv.
    pub atom_dropout: f64,
    /// Whether the dropout rates of the model configuration apply.
    pub dropout: bool,
}

impl Regularizers {
    pub const NONE: Regularizers = Regularizers {
        feature_noise: 0.0,
        noise_every_conv: false,
        atom_dropout: 0.0,
        dropout: false,
    };
}

pub enum ForwardMode<'r> {
    /// Running batch-norm statistics, no dropout or noise.
    Eval,
    /// Batch statistics, with the given perturbations drawn from `rng`.
    Train { rng: &'r mut ChaCha8Rng, reg: Regularizers },
}

pub struct ForwardOutput {
    /// `proteins x classes`.
    pub scores: Var,
    /// `proteins x final width`, the readout fed to the head.
    pub embedding: Var,
    /// Tape handle of every parameter, in parameter order.
    pub params: Vec<Var>,
    /// Batch statistics of every batch-norm layer (training mode only).
    pub batch_stats: Vec<(String, BatchStats)>,
}

struct Ctx<'a, 'r, T: Real> {
    tape: &'a mut Tape<T>,
    params: &'a ModelParams<T>,
    vars: Vec<Var>,
    config: &'a ModelConfig,
    mode: ForwardMode<'r>,
    stats: Vec<(String, BatchStats)>,
}

/// Kernel MLP weights on the tape.
#[derive(Debug, Clone, Copy)]
pub struct KernelVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// `out[x, c] = sum over neighbors i of x, sum over j: F[i, j] * kappa_jc(inputs(x, i))`.
///
/// The kernel MLP maps each entry's inputs through one leaky-ReLU hidden layer to a
/// `t x k` matrix.
pub fn ieconv_forward<T: Real>(tape: &mut Tape<T>, features: Var, level: &BatchLevel, kernel: KernelVars) -> Result<Var> {
    let (n, _) = tape.shape(features);
    if n != level.nodes {
        return Err(Error::shape("ieconv", format!("{n} feature rows for {} nodes", level.nodes)));
    }
    let e = level.edge_count();
    let d = tape.shape(kernel.w1).0;
    if level.kernel_inputs.len() != e * d {
        return Err(Error::shape("ieconv", format!("kernel expects {d} inputs per entry")));
    }
    let inputs = tape.constant(Tensor::from_f64(e, d, &level.kernel_inputs)?);
    let h = tape.matmul(inputs, kernel.w1)?;
    let h = tape.add_row(h, kernel.b1)?;
    let h = tape.leaky_relu(h, LEAKY_SLOPE);
    let w = tape.matmul(h, kernel.w2)?;
    let w = tape.add_row(w, kernel.b2)?;
    let gathered = tape.gather_rows(features, level.neighbors.clone())?;
    let messages = tape.edge_contract(gathered, w)?;
    tape.segment_sum(messages, level.centers.clone(), n)
}

impl<T: Real> Ctx<'_, '_, T> {
    fn p(&self, name: &str) -> Result<Var> {
        Ok(self.vars[self.params.index_of(name)?])
    }

    fn train(&self) -> bool {
        matches!(self.mode, ForwardMode::Train { .. })
    }

    /// Batch norm followed by leaky ReLU.
    fn pre(&mut self, x: Var, name: &str) -> Result<Var> {
        let gamma = self.p(&format!("{name}.gamma"))?;
        let beta = self.p(&format!("{name}.beta"))?;
        let y = if self.train() {
            let (y, stats) = self.tape.batch_norm_train(x, gamma, beta)?;
            self.stats.push((name.to_string(), stats));
            y
        } else {
            let (mean, var) = self.params.buffer(name)?;
            self.tape.batch_norm_eval(x, gamma, beta, mean, var)?
        };
        Ok(self.tape.leaky_relu(y, LEAKY_SLOPE))
    }

    fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        match &mut self.mode {
            ForwardMode::Train { rng, reg } if reg.dropout => self.tape.dropout(x, p, true, *rng),
            _ => Ok(x),
        }
    }

    fn noise(&mut self, x: Var, before_ieconv: bool) -> Result<Var> {
        let ForwardMode::Train { rng, reg } = &mut self.mode else {
            return Ok(x);
        };
        if reg.feature_noise <= 0.0 || !(before_ieconv || reg.noise_every_conv) {
            return Ok(x);
        }
        let (r, c) = self.tape.shape(x);
        let dist = Normal::new(0.0, reg.feature_noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let data = (0..r * c).map(|_| T::of(dist.sample(*rng))).collect();
        let eps = self.tape.constant(Tensor::new(r, c, data)?);
        self.tape.add(x, eps)
    }

    fn atom_dropout(&mut self, x: Var) -> Result<Var> {
        match &mut self.mode {
            ForwardMode::Train { rng, reg } if reg.atom_dropout > 0.0 => self.tape.row_dropout(x, reg.atom_dropout, *rng),
            _ => Ok(x),
        }
    }

    fn dense(&mut self, x: Var, name: &str) -> Result<Var> {
        let w = self.p(&format!("{name}.w"))?;
        let b = self.p(&format!("{name}.b"))?;
        let y = self.tape.matmul(x, w)?;
        self.tape.add_row(y, b)
    }

    /// pre-activation, dropout, noise, then a 1x1 convolution.
    fn conv1x1(&mut self, x: Var, bn: &str, name: &str) -> Result<Var> {
        let h = self.pre(x, bn)?;
        let h = self.dropout(h, self.config.dropout)?;
        let h = self.noise(h, false)?;
        self.dense(h, name)
    }

    fn bottleneck(&mut self, x: Var, level: &BatchLevel, prefix: &str) -> Result<Var> {
        let h = self.conv1x1(x, &format!("{prefix}.bn1"), &format!("{prefix}.down"))?;
        let h = self.pre(h, &format!("{prefix}.bn2"))?;
        let h = self.atom_dropout(h)?;
        let h = self.noise(h, true)?;
        let kernel = KernelVars {
            w1: self.p(&format!("{prefix}.kernel1.w"))?,
            b1: self.p(&format!("{prefix}.kernel1.b"))?,
            w2: self.p(&format!("{prefix}.kernel2.w"))?,
            b2: self.p(&format!("{prefix}.kernel2.b"))?,
        };
        let h = ieconv_forward(self.tape, h, level, kernel)?;
        let h = self.conv1x1(h, &format!("{prefix}.bn3"), &format!("{prefix}.up"))?;
        self.tape.add(x, h)
    }
}

/// Runs the classifier on a batch and returns the score and embedding handles.
pub fn model_forward<T: Real>(
    tape: &mut Tape<T>,
    batch: &BatchInput,
    params: &ModelParams<T>,
    config: &ModelConfig,
    mode: ForwardMode<'_>,
) -> Result<ForwardOutput> {
    if batch.levels.len() != config.level_radii.len() {
        return Err(Error::InvalidArgument(format!(
            "batch has {} levels, the model has {}",
            batch.levels.len(),
            config.level_radii.len()
        )));
    }
    let d_in = config.conv_variant.kernel_inputs();
    if batch.levels.iter().any(|l| l.kernel_inputs.len() != l.edge_count() * d_in) {
        return Err(Error::InvalidArgument("batch was prepared for a different conv variant".into()));
    }
    let vars: Vec<Var> = params.tensors.iter().map(|t| tape.param(t.clone())).collect();
    model_forward_vars(tape, batch, params, vars, config, mode)
}

/// Like [`model_forward`], with the tape handle of every parameter supplied by the caller.
///
/// `params` still provides the batch-norm running statistics.
pub fn model_forward_vars<T: Real>(
    tape: &mut Tape<T>,
    batch: &BatchInput,
    params: &ModelParams<T>,
    vars: Vec<Var>,
    config: &ModelConfig,
    mode: ForwardMode<'_>,
) -> Result<ForwardOutput> {
    if vars.len() != params.tensors.len() {
        return Err(Error::InvalidArgument(format!("{} parameter handles for {} parameters", vars.len(), params.tensors.len())));
    }
    if batch.levels.len() != config.level_radii.len() {
        return Err(Error::InvalidArgument("batch depth differs from the model".into()));
    }
    let mut cx = Ctx {
        tape,
        params,
        vars,
        config,
        mode,
        stats: Vec::new(),
    };
    let n0 = batch.atom_count();
    let physical = cx.tape.constant(Tensor::from_f64(n0, PHYSICAL_DIM, &batch.physical)?);
    let embed = cx.p("embed")?;
    let types = cx.tape.shape(embed).0;
    if batch.node_type.iter().any(|&t| t as usize >= types) {
        return Err(Error::InvalidArgument("node type outside the embedding table".into()));
    }
    let gathered = cx.tape.gather_rows(embed, batch.node_type.clone())?;
    let mut x = cx.tape.concat_cols(&[physical, gathered])?;

    for (l, level) in batch.levels.iter().enumerate() {
        if l > 0 {
            if let Some(pool) = &batch.levels[l - 1].pool {
                x = cx.tape.segment_mean(x, pool.clone(), level.nodes)?;
            }
        }
        x = cx.conv1x1(x, &format!("l{l}.proj.bn"), &format!("l{l}.proj"))?;
        for b in 0..config.blocks_per_level {
            x = cx.bottleneck(x, level, &format!("l{l}.b{b}"))?;
        }
    }
    let embedding = cx.tape.segment_mean(x, batch.readout.clone(), batch.proteins)?;
    let h = cx.dense(embedding, "head1")?;
    let h = cx.tape.leaky_relu(h, LEAKY_SLOPE);
    let h = cx.dropout(h, config.head_dropout)?;
    let scores = cx.dense(h, "head2")?;
    Ok(ForwardOutput {
        scores,
        embedding,
        params: cx.vars,
        batch_stats: cx.stats,
    })
}

fn rows<T: Real>(t: &Tensor<T>) -> Vec<Vec<f64>> {
    (0..t.rows).map(|r| t.row(r).iter().map(|v| v.f64()).collect()).collect()
}

/// Eval-mode class scores, one row per protein.
pub fn predict<T: Real>(batch: &BatchInput, params: &ModelParams<T>, config: &ModelConfig) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::new();
    let out = model_forward(&mut tape, batch, params, config, ForwardMode::Eval)?;
    Ok(rows(tape.value(out.scores)))
}

/// Eval-mode readout vector of one protein.
pub fn embed_protein<T: Real>(input: &ProteinInput, params: &ModelParams<T>, config: &ModelConfig) -> Result<Vec<f64>> {
    let batch = BatchInput::from_proteins(&[input])?;
    let mut tape = Tape::new();
    let out = model_forward(&mut tape, &batch, params, config, ForwardMode::Eval)?;
    Ok(rows(tape.value(out.embedding)).remove(0))
}

