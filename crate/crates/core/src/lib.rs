//! Protein multi-graphs, intrinsic-extrinsic convolutions and hierarchical pooling.
//!
//! The pipeline runs PDB text through [`structure::parse_pdb`], bond inference in
//! [`chemistry`], graph assembly in [`multigraph`], the pooling hierarchy in [`pooling`], and
//! finally the network in [`net`], trained by [`train`].

pub mod autodiff;
pub mod chemistry;
pub mod element;
pub mod error;
pub mod geometry;
pub mod multigraph;
pub mod net;
pub mod pooling;
pub mod structure;
pub mod synth;
pub mod templates;
pub mod train;

pub use element::{element_properties, Element, ElementProps, ElementTable};
pub use error::{Error, Result};
pub use multigraph::{ProteinGraph, NeighborTable, KernelInput};
pub use pooling::{GraphHierarchy, PoolingMatrix};
pub use structure::{parse_pdb, Atom, ProteinStructure, Residue};
