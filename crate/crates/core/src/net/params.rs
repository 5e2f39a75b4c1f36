use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::autodiff::{Real, Tensor};
use crate::element::ElementTable;
use crate::error::{Error, Result};
use crate::multigraph::EMBED_DIM;

/// Physical feature columns read from the graph.
pub(crate) const PHYSICAL_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Convolution, kernel and head weights and biases; subject to weight decay.
    Weight,
    /// Batch-norm scale and shift.
    Norm,
    Embedding,
}

/// Named trainable tensors plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub names: Vec<String>,
    pub kinds: Vec<ParamKind>,
    pub tensors: Vec<Tensor<T>>,
    /// Running mean and variance per batch-norm layer, keyed by the layer prefix.
    pub buffers: Vec<(String, Vec<f64>, Vec<f64>)>,
    index: HashMap<String, usize>,
    buffer_index: HashMap<String, usize>,
}

impl<T: Real> ModelParams<T> {
    pub fn empty() -> Self {
        ModelParams {
            names: Vec::new(),
            kinds: Vec::new(),
            tensors: Vec::new(),
            buffers: Vec::new(),
            index: HashMap::new(),
            buffer_index: HashMap::new(),
        }
    }

    pub fn push(&mut self, name: String, kind: ParamKind, t: Tensor<T>) {
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.kinds.push(kind);
        self.tensors.push(t);
    }

    pub fn push_buffer(&mut self, name: String, mean: Vec<f64>, var: Vec<f64>) {
        self.buffer_index.insert(name.clone(), self.buffers.len());
        self.buffers.push((name, mean, var));
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named `{name}`")))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        Ok(&self.tensors[self.index_of(name)?])
    }

    pub fn buffer(&self, name: &str) -> Result<(&[f64], &[f64])> {
        let i = *self
            .buffer_index
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no running statistics for `{name}`")))?;
        Ok((&self.buffers[i].1, &self.buffers[i].2))
    }

    pub fn buffer_mut(&mut self, name: &str) -> Result<(&mut Vec<f64>, &mut Vec<f64>)> {
        let i = *self
            .buffer_index
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no running statistics for `{name}`")))?;
        let (_, m, v) = &mut self.buffers[i];
        Ok((m, v))
    }

    /// Trainable scalar count.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            buffers: self.buffers.clone(),
            index: self.index.clone(),
            buffer_index: self.buffer_index.clone(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
            && self.buffers.iter().all(|(_, m, v)| m.iter().chain(v).all(|x| x.is_finite()))
    }

    /// Parameters for `config`, drawn from a generator seeded with `config.init_seed`.
    ///
    /// Dense weights are normal with variance 1/fan_in; biases and batch-norm shifts start at
    /// zero, batch-norm scales at one, and each block's final projection at zero.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut p = ModelParams::empty();
        let types = ElementTable::builtin().len();
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let embed = (0..types * EMBED_DIM).map(|_| T::of(unit.sample(&mut rng))).collect();
        p.push("embed".into(), ParamKind::Embedding, Tensor::new(types, EMBED_DIM, embed)?);

        let dense = |p: &mut ModelParams<T>, rng: &mut ChaCha8Rng, name: &str, fan_in: usize, fan_out: usize, zero: bool| {
            let std = (1.0 / fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| if zero { T::zero() } else { T::of(std * unit.sample(rng)) })
                .collect();
            p.push(format!("{name}.w"), ParamKind::Weight, Tensor { rows: fan_in, cols: fan_out, data: w });
            p.push(format!("{name}.b"), ParamKind::Weight, Tensor::zeros(1, fan_out));
        };
        let norm = |p: &mut ModelParams<T>, name: &str, width: usize| {
            p.push(format!("{name}.gamma"), ParamKind::Norm, Tensor::filled(1, width, T::one()));
            p.push(format!("{name}.beta"), ParamKind::Norm, Tensor::zeros(1, width));
            p.push_buffer(name.to_string(), vec![0.0; width], vec![1.0; width]);
        };

        let widths = config.widths();
        let mut prev = PHYSICAL_DIM + EMBED_DIM;
        for (l, &d) in widths.iter().enumerate() {
            norm(&mut p, &format!("l{l}.proj.bn"), prev);
            dense(&mut p, &mut rng, &format!("l{l}.proj"), prev, d, false);
            let q = d / 4;
            for b in 0..config.blocks_per_level {
                let pre = format!("l{l}.b{b}");
                norm(&mut p, &format!("{pre}.bn1"), d);
                dense(&mut p, &mut rng, &format!("{pre}.down"), d, q, false);
                norm(&mut p, &format!("{pre}.bn2"), q);
                dense(&mut p, &mut rng, &format!("{pre}.kernel1"), config.conv_variant.kernel_inputs(), config.kernel_hidden, false);
                dense(&mut p, &mut rng, &format!("{pre}.kernel2"), config.kernel_hidden, q * q, false);
                norm(&mut p, &format!("{pre}.bn3"), q);
                dense(&mut p, &mut rng, &format!("{pre}.up"), q, d, true);
            }
            prev = d;
        }
        let h = config.head_width();
        dense(&mut p, &mut rng, "head1", prev, h, false);
        dense(&mut p, &mut rng, "head2", h, config.num_classes, false);
        Ok(p)
    }

    /// Checks every tensor shape against a freshly initialized model for `config`.
    pub fn check_against(&self, config: &ModelConfig) -> Result<()> {
        let reference = ModelParams::<T>::init(config)?;
        if reference.names != self.names {
            return Err(Error::format("parameter names do not match the model configuration"));
        }
        for (name, (a, b)) in self.names.iter().zip(reference.tensors.iter().zip(&self.tensors)) {
            if a.shape() != b.shape() {
                return Err(Error::format(format!("parameter `{name}` has shape {:?}, expected {:?}", b.shape(), a.shape())));
            }
        }
        let names = |p: &ModelParams<T>| p.buffers.iter().map(|(n, m, v)| (n.clone(), m.len(), v.len())).collect::<Vec<_>>();
        if names(&reference) != names(self) {
            return Err(Error::format("batch-norm statistics do not match the model configuration"));
        }
        Ok(())
    }
}
