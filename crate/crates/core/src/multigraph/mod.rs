//! The protein multi-graph: positions, features, covalent adjacency A and covalent+hydrogen
//! adjacency B, together with extrinsic/intrinsic distance queries.

pub mod format;
pub mod hops;
pub mod neighbors;
pub mod spatial;

use crate::chemistry::BondList;
use crate::element::{ElementTable, FeatureScaler};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::structure::ProteinStructure;

pub use hops::hop_distances;
pub use neighbors::{build_neighbor_table, KernelInput, NeighborTable, NeighborhoodVariant};
pub use spatial::{ball_query, SpatialGrid};

/// Number of per-node input feature columns: 3 physical + 3 embedding.
pub const FEATURE_DIM: usize = 6;
pub const EMBED_DIM: usize = 3;
/// Node type for nodes that are not single atoms (pooled levels).
pub const NO_TYPE: u32 = u32::MAX;

/// Sparse symmetric binary adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Adjacency {
    n: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    /// Builds from arbitrary pairs; self-loops dropped, duplicates merged.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a != b {
                edges.push((a.min(b) as u32, a.max(b) as u32));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted(n, edges))
    }

    fn from_sorted(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for &(a, b) in &edges {
            targets[fill[a as usize]] = b;
            fill[a as usize] += 1;
            targets[fill[b as usize]] = a;
            fill[b as usize] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Adjacency {
            n,
            edges,
            offsets,
            targets,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted(n, Vec::new())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Upper-triangle edge list, sorted.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    pub fn is_subset_of(&self, other: &Adjacency) -> bool {
        self.n == other.n && self.edges.iter().all(|e| other.edges.binary_search(e).is_ok())
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        self.component_labels().1
    }

    /// Component id per node (ids in order of lowest member) and the component count.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v as usize] == usize::MAX {
                        label[v as usize] = count;
                        stack.push(v as usize);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }
}

/// G = (N, F, A, B) plus the residue bookkeeping pooling needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProteinGraph {
    /// n x 3, angstroms.
    pub positions: Vec<[f32; 3]>,
    /// n x t, row-major.
    pub features: Vec<f32>,
    pub feature_dim: usize,
    pub adj_a: Adjacency,
    pub adj_b: Adjacency,
    /// Residue ordinal of each node (for pooled nodes, the lowest residue they contain).
    pub residue_of: Vec<u32>,
    /// Embedding row of each atom; `NO_TYPE` on pooled levels.
    pub node_type: Vec<u32>,
    /// Node holding each residue's alpha carbon.
    pub ca_index: Vec<Option<u32>>,
    /// Chain ordinal of each residue.
    pub residue_chain: Vec<u32>,
}

impl ProteinGraph {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn residue_count(&self) -> usize {
        self.ca_index.len()
    }

    pub fn feature_row(&self, i: usize) -> &[f32] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn positions_f64(&self) -> Vec<Vec3> {
        self.positions.iter().map(|p| p.map(f64::from)).collect()
    }

    /// Chain ordinal per node.
    pub fn node_chain(&self) -> Vec<u32> {
        self.residue_of.iter().map(|&r| self.residue_chain[r as usize]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        let bad = |m: String| Err(Error::format(m));
        if self.features.len() != n * self.feature_dim {
            return bad(format!("feature matrix has {} values, expected {}", self.features.len(), n * self.feature_dim));
        }
        if self.adj_a.node_count() != n || self.adj_b.node_count() != n {
            return bad("adjacency size differs from node count".into());
        }
        if !self.adj_a.is_subset_of(&self.adj_b) {
            return bad("A is not a subset of B".into());
        }
        if self.residue_of.len() != n || self.node_type.len() != n {
            return bad("per-node arrays have the wrong length".into());
        }
        let r = self.residue_count();
        if self.residue_chain.len() != r {
            return bad("per-residue arrays have the wrong length".into());
        }
        if self.residue_of.iter().any(|&x| x as usize >= r) {
            return bad("residue index out of range".into());
        }
        if self.ca_index.iter().flatten().any(|&x| x as usize >= n) {
            return bad("alpha-carbon index out of range".into());
        }
        Ok(())
    }
}

/// Current values of the learnable atom-type embedding, one row per element-table entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEmbedding {
    pub rows: Vec<[f32; EMBED_DIM]>,
}

impl AtomEmbedding {
    pub fn zeros(types: usize) -> Self {
        AtomEmbedding {
            rows: vec![[0.0; EMBED_DIM]; types],
        }
    }
}

pub fn build_multigraph(
    structure: &ProteinStructure,
    covalent: &BondList,
    hydrogen: &BondList,
    embedding: &AtomEmbedding,
) -> Result<ProteinGraph> {
    build_multigraph_with(structure, covalent, hydrogen, embedding, ElementTable::builtin())
}

pub fn build_multigraph_with(
    structure: &ProteinStructure,
    covalent: &BondList,
    hydrogen: &BondList,
    embedding: &AtomEmbedding,
    table: &ElementTable,
) -> Result<ProteinGraph> {
    let n = structure.atom_count();
    let scaler = FeatureScaler::frozen();
    let mut positions = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * FEATURE_DIM);
    let mut node_type = Vec::with_capacity(n);
    for atom in structure.atoms() {
        let props = table.get(atom.element)?;
        let row = embedding.rows.get(props.embed_index).ok_or_else(|| {
            Error::InvalidArgument(format!("embedding has no row for {}", atom.element))
        })?;
        positions.push(atom.position.map(|v| v as f32));
        features.extend(scaler.apply(&props).iter().map(|&v| v as f32));
        features.extend_from_slice(row);
        node_type.push(props.embed_index as u32);
    }
    let adj_a = Adjacency::from_edges(n, covalent.edges.iter().copied())?;
    let adj_b = Adjacency::from_edges(n, covalent.edges.iter().chain(hydrogen.edges.iter()).copied())?;
    let offsets = structure.residue_offsets();
    let ca_index = structure
        .residues
        .iter()
        .enumerate()
        .map(|(r, res)| res.atom_index("CA").map(|i| (offsets[r] + i) as u32))
        .collect();
    Ok(ProteinGraph {
        positions,
        features,
        feature_dim: FEATURE_DIM,
        adj_a,
        adj_b,
        residue_of: structure.residue_of_atoms().into_iter().map(|r| r as u32).collect(),
        node_type,
        ca_index,
        residue_chain: structure.chain_ordinals().into_iter().map(|c| c as u32).collect(),
    })
}

/// Parses bonds and builds the atom-level graph in one go.
pub fn graph_from_structure(structure: &ProteinStructure, interchain_hbonds: bool) -> Result<ProteinGraph> {
    use crate::chemistry::{detect_hydrogen_bonds_with, infer_covalent_bonds, place_amide_hydrogens, HbondParams};
    let covalent = infer_covalent_bonds(structure)?;
    let hydrogens = place_amide_hydrogens(structure);
    let hbonds = detect_hydrogen_bonds_with(structure, &hydrogens, HbondParams { interchain: interchain_hbonds });
    let table = ElementTable::builtin();
    build_multigraph(structure, &covalent, &hbonds, &AtomEmbedding::zeros(table.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemistry::{infer_covalent_bonds, BondKind};
    use crate::templates;

    #[test]
    fn single_atom_graph() {
        let text = "ATOM      1  N   ALA A   1       0.000   0.000   0.000  1.00  0.00           N\n";
        let s = crate::parse_pdb(text.as_bytes()).unwrap();
        let g = graph_from_structure(&s, true).unwrap();
        assert_eq!(g.positions.len(), 1);
        assert_eq!(g.features.len(), 6);
        assert_eq!(g.adj_a.edge_count(), 0);
        assert_eq!(g.adj_b.edge_count(), 0);
        assert_eq!(g.ca_index, vec![None]);
    }

    #[test]
    fn alanine_without_hbonds_has_a_equal_b() {
        let s = ProteinStructure {
            residues: vec![templates::template("ALA").unwrap().ideal_residue()],
            source_id: "ala".into(),
        };
        let cov = infer_covalent_bonds(&s).unwrap();
        let none = BondList::new(BondKind::Hydrogen, []);
        let mut emb = AtomEmbedding::zeros(ElementTable::builtin().len());
        for (i, row) in emb.rows.iter_mut().enumerate() {
            *row = [i as f32 + 0.5, -(i as f32), 2.0];
        }
        let g = build_multigraph(&s, &cov, &none, &emb).unwrap();
        assert_eq!(g.adj_a, g.adj_b);
        assert_eq!(g.adj_a.edge_count(), 4);
        for i in 0..g.node_count() {
            let j = i;
            for &k in g.adj_a.neighbors(i) {
                assert!(g.adj_a.contains(k as usize, j));
            }
            let element = s.residues[0].atoms[i].element;
            let idx = ElementTable::builtin().get(element).unwrap().embed_index;
            assert_eq!(g.feature_row(i)[3], emb.rows[idx][0]);
        }
        g.validate().unwrap();
        assert_eq!(g.ca_index, vec![Some(1)]);
    }

    #[test]
    fn adjacency_rejects_out_of_range() {
        assert!(Adjacency::from_edges(2, [(0, 2)]).is_err());
        let a = Adjacency::from_edges(3, [(1, 0), (0, 1), (2, 2)]).unwrap();
        assert_eq!(a.edges(), &[(0, 1)]);
        assert_eq!(a.components(), 2);
    }
}
