//! The intrinsic-extrinsic convolution, bottleneck blocks and the five-level classifier.

pub mod checkpoint;
mod config;
mod input;
mod model;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{parse_key_values, ConvVariant, ModelConfig};
pub(crate) use config::{parse_bool, parse_ratio};
pub use input::{prepare_protein, BatchInput, BatchLevel, ProteinInput};
pub use model::{embed_protein, ieconv_forward, model_forward, model_forward_vars, predict, ForwardMode, ForwardOutput, KernelVars, Regularizers};
pub use params::{ModelParams, ParamKind};
