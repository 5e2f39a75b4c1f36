use super::{ConvVariant, ModelConfig};
use crate::error::{Error, Result};
use crate::multigraph::{build_neighbor_table, NeighborTable, ProteinGraph, NO_TYPE};
use crate::pooling::GraphHierarchy;

/// One network level of one or more proteins.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLevel {
    pub nodes: usize,
    /// Center of every neighbor entry.
    pub centers: Vec<u32>,
    pub neighbors: Vec<u32>,
    /// Kernel inputs after variant masking, `edges x kernel_inputs`, row-major.
    pub kernel_inputs: Vec<f64>,
    /// Assignment of this level's nodes to the next level's nodes.
    pub pool: Option<Vec<u32>>,
}

impl BatchLevel {
    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }
}

/// Everything the network reads from one protein.
#[derive(Debug, Clone, PartialEq)]
pub struct ProteinInput {
    pub levels: Vec<BatchLevel>,
    /// Level-0 physical features, `n x 3`.
    pub physical: Vec<f64>,
    pub node_type: Vec<u32>,
}

impl ProteinInput {
    pub fn atom_count(&self) -> usize {
        self.levels[0].nodes
    }
}

/// Disjoint union of several proteins.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchInput {
    pub levels: Vec<BatchLevel>,
    pub physical: Vec<f64>,
    pub node_type: Vec<u32>,
    /// Protein of every node at the last level.
    pub readout: Vec<u32>,
    pub proteins: usize,
}

fn mask_inputs(table: &NeighborTable, variant: ConvVariant) -> Vec<f64> {
    let mut out = Vec::with_capacity(table.edge_count() * variant.kernel_inputs());
    for (k, o) in table.inputs.iter().zip(&table.offsets_xyz) {
        match variant {
            ConvVariant::Ours => out.extend([k.de_norm, k.di1_norm, k.di2_norm]),
            ConvVariant::ExConv => out.extend([k.de_norm, 0.0, 0.0]),
            ConvVariant::InConvC => out.extend([0.0, k.di1_norm, 0.0]),
            ConvVariant::InConvH => out.extend([0.0, 0.0, k.di2_norm]),
            ConvVariant::InConvCH => out.extend([0.0, k.di1_norm, k.di2_norm]),
            ConvVariant::Ours3DCH => out.extend([o[0], o[1], o[2], k.di1_norm, k.di2_norm]),
        }
    }
    out
}

fn level(graph: &ProteinGraph, radius: f64, config: &ModelConfig, pool: Option<Vec<u32>>) -> Result<BatchLevel> {
    let table = build_neighbor_table(
        &graph.positions_f64(),
        &graph.adj_a,
        &graph.adj_b,
        radius,
        config.hop_cap_covalent,
        config.hop_cap_hydrogen,
        config.neighborhood_variant,
    )?;
    Ok(BatchLevel {
        nodes: graph.node_count(),
        centers: table.centers(),
        neighbors: table.neighbors.clone(),
        kernel_inputs: mask_inputs(&table, config.conv_variant),
        pool,
    })
}

/// Builds the per-level neighborhoods the network needs from a pooling hierarchy.
///
/// With pooling disabled every level reuses the atom graph at that level's radius.
pub fn prepare_protein(hierarchy: &GraphHierarchy, config: &ModelConfig) -> Result<ProteinInput> {
    let depth = config.level_radii.len();
    if config.pooling_enabled && hierarchy.levels.len() != depth {
        return Err(Error::InvalidArgument(format!(
            "hierarchy has {} levels, the model needs {depth}",
            hierarchy.levels.len()
        )));
    }
    let g0 = &hierarchy.levels[0];
    if g0.feature_dim < 3 {
        return Err(Error::shape("prepare_protein", format!("graph has {} feature columns", g0.feature_dim)));
    }
    if g0.node_type.contains(&NO_TYPE) {
        return Err(Error::InvalidArgument("atom-level graph has untyped nodes".into()));
    }
    let mut levels = Vec::with_capacity(depth);
    for (l, &radius) in config.level_radii.iter().enumerate() {
        let lvl = if config.pooling_enabled {
            let pool = (l + 1 < depth).then(|| hierarchy.pools[l].assignment.clone());
            level(&hierarchy.levels[l], radius, config, pool)?
        } else {
            level(g0, radius, config, None)?
        };
        levels.push(lvl);
    }
    let physical = (0..g0.node_count())
        .flat_map(|i| g0.feature_row(i)[..3].iter().map(|&v| f64::from(v)))
        .collect();
    Ok(ProteinInput {
        levels,
        physical,
        node_type: g0.node_type.clone(),
    })
}

impl BatchInput {
    pub fn from_proteins(proteins: &[&ProteinInput]) -> Result<BatchInput> {
        let first = proteins
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let depth = first.levels.len();
        if proteins.iter().any(|p| p.levels.len() != depth) {
            return Err(Error::InvalidArgument("proteins prepared with different depths".into()));
        }
        let mut levels = Vec::with_capacity(depth);
        for l in 0..depth {
            let mut out = BatchLevel {
                nodes: 0,
                centers: Vec::new(),
                neighbors: Vec::new(),
                kernel_inputs: Vec::new(),
                pool: first.levels[l].pool.as_ref().map(|_| Vec::new()),
            };
            for p in proteins {
                let src = &p.levels[l];
                let shift = out.nodes as u32;
                out.centers.extend(src.centers.iter().map(|&c| c + shift));
                out.neighbors.extend(src.neighbors.iter().map(|&c| c + shift));
                out.kernel_inputs.extend_from_slice(&src.kernel_inputs);
                out.nodes += src.nodes;
            }
            if let Some(pool) = out.pool.as_mut() {
                let mut shift = 0u32;
                for p in proteins {
                    let src = p.levels[l]
                        .pool
                        .as_ref()
                        .ok_or_else(|| Error::InvalidArgument("pooling differs between proteins".into()))?;
                    pool.extend(src.iter().map(|&c| c + shift));
                    shift += p.levels[l + 1].nodes as u32;
                }
            }
            levels.push(out);
        }
        let mut readout = Vec::new();
        for (i, p) in proteins.iter().enumerate() {
            readout.extend(std::iter::repeat_n(i as u32, p.levels[depth - 1].nodes));
        }
        Ok(BatchInput {
            levels,
            physical: proteins.iter().flat_map(|p| p.physical.iter().copied()).collect(),
            node_type: proteins.iter().flat_map(|p| p.node_type.iter().copied()).collect(),
            readout,
            proteins: proteins.len(),
        })
    }

    pub fn atom_count(&self) -> usize {
        self.levels[0].nodes
    }
}
