//! Pooling matrices and the five-level graph hierarchy.
//!
//! For an assignment matrix P (n x m, one 1 per row) with cluster sizes D:
//! positions and features are averaged per cluster (D^-1 P^T X), and both adjacencies are
//! mapped through P, with the diagonal zeroed and entries clamped to one.

pub mod amino;
pub mod format;
pub mod spectral;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::multigraph::{Adjacency, ProteinGraph, NO_TYPE};
use crate::structure::ProteinStructure;

pub use amino::{amino_pool_matrix, canonical_pool};
pub use spectral::spectral_cluster;

pub const LEVELS: usize = 5;

/// Sparse binary assignment of n fine nodes to m clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolingMatrix {
    /// Cluster of each fine node.
    pub assignment: Vec<u32>,
    /// Members per cluster, all >= 1.
    pub cluster_sizes: Vec<u32>,
}

impl PoolingMatrix {
    /// Cluster count is `max + 1`; every cluster must receive at least one node.
    pub fn from_assignment(assignment: Vec<u32>) -> Result<Self> {
        let m = assignment.iter().max().map_or(0, |&x| x as usize + 1);
        Self::new(assignment, m)
    }

    pub fn new(assignment: Vec<u32>, clusters: usize) -> Result<Self> {
        let mut sizes = vec![0u32; clusters];
        for &c in &assignment {
            let slot = sizes
                .get_mut(c as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("cluster {c} out of range ({clusters})")))?;
            *slot += 1;
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("cluster {j} is empty")));
        }
        Ok(PoolingMatrix {
            assignment,
            cluster_sizes: sizes,
        })
    }

    pub fn identity(n: usize) -> Self {
        PoolingMatrix {
            assignment: (0..n as u32).collect(),
            cluster_sizes: vec![1; n],
        }
    }

    pub fn row_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_sizes.len()
    }

    /// D^-1 P^T X for a row-major `rows x cols` matrix, summing members in ascending row
    /// order and scaling by the reciprocal cluster size.
    pub fn pool_rows(&self, values: &[f64], cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cluster_count() * cols];
        for (i, &c) in self.assignment.iter().enumerate() {
            let dst = &mut out[c as usize * cols..(c as usize + 1) * cols];
            for (d, v) in dst.iter_mut().zip(&values[i * cols..(i + 1) * cols]) {
                *d += v;
            }
        }
        for (c, &size) in self.cluster_sizes.iter().enumerate() {
            let inv = 1.0 / f64::from(size);
            out[c * cols..(c + 1) * cols].iter_mut().for_each(|v| *v *= inv);
        }
        out
    }

    /// binarize(P^T A P) with zero diagonal.
    pub fn pool_adjacency(&self, adjacency: &Adjacency) -> Adjacency {
        let mut edges: Vec<(u32, u32)> = adjacency
            .edges()
            .iter()
            .filter_map(|&(a, b)| {
                let (ca, cb) = (self.assignment[a as usize], self.assignment[b as usize]);
                (ca != cb).then(|| (ca.min(cb), ca.max(cb)))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Adjacency::from_edges(self.cluster_count(), edges.into_iter().map(|(a, b)| (a as usize, b as usize)))
            .expect("cluster indices are in range")
    }
}

/// Where pooled node positions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PositionsMode {
    Average,
    Explicit(Vec<[f32; 3]>),
}

pub fn apply_pooling(graph: &ProteinGraph, pool: &PoolingMatrix, mode: PositionsMode) -> Result<ProteinGraph> {
    let n = graph.node_count();
    if pool.row_count() != n {
        return Err(Error::shape(
            "apply_pooling",
            format!("P has {} rows, graph has {n} nodes", pool.row_count()),
        ));
    }
    let m = pool.cluster_count();
    let positions = match mode {
        PositionsMode::Average => {
            let flat: Vec<f64> = graph.positions.iter().flat_map(|p| p.map(f64::from)).collect();
            pool.pool_rows(&flat, 3)
                .chunks(3)
                .map(|c| [c[0] as f32, c[1] as f32, c[2] as f32])
                .collect()
        }
        PositionsMode::Explicit(p) => {
            if p.len() != m {
                return Err(Error::shape("apply_pooling", format!("{} explicit positions for {m} clusters", p.len())));
            }
            p
        }
    };
    let feats: Vec<f64> = graph.features.iter().map(|&v| f64::from(v)).collect();
    let features = pool.pool_rows(&feats, graph.feature_dim).into_iter().map(|v| v as f32).collect();

    let mut residue_of = vec![u32::MAX; m];
    let mut node_type: Vec<Option<u32>> = vec![None; m];
    for (i, &c) in pool.assignment.iter().enumerate() {
        let c = c as usize;
        residue_of[c] = residue_of[c].min(graph.residue_of[i]);
        node_type[c] = match node_type[c] {
            None => Some(graph.node_type[i]),
            Some(t) if t == graph.node_type[i] => Some(t),
            Some(_) => Some(NO_TYPE),
        };
    }
    let out = ProteinGraph {
        positions,
        features,
        feature_dim: graph.feature_dim,
        adj_a: pool.pool_adjacency(&graph.adj_a),
        adj_b: pool.pool_adjacency(&graph.adj_b),
        residue_of,
        node_type: node_type.into_iter().map(|t| t.unwrap_or(NO_TYPE)).collect(),
        ca_index: graph.ca_index.iter().map(|ca| ca.map(|i| pool.assignment[i as usize])).collect(),
        residue_chain: graph.residue_chain.clone(),
    };
    Ok(out)
}

/// Node i belongs to residue j.
pub fn residue_assignment(graph: &ProteinGraph) -> Result<PoolingMatrix> {
    PoolingMatrix::new(graph.residue_of.clone(), graph.residue_count())
}

/// Alpha-carbon positions for every residue of `graph`, falling back to the centroid of the
/// residue's nodes when it has no CA. Returns the positions and the fallback residues.
pub fn alpha_carbon_positions(graph: &ProteinGraph) -> Result<(Vec<[f32; 3]>, Vec<usize>)> {
    let pool = residue_assignment(graph)?;
    let flat: Vec<f64> = graph.positions.iter().flat_map(|p| p.map(f64::from)).collect();
    let centroids = pool.pool_rows(&flat, 3);
    let mut fallback = Vec::new();
    let positions = graph
        .ca_index
        .iter()
        .enumerate()
        .map(|(r, ca)| match ca {
            Some(i) => graph.positions[*i as usize],
            None => {
                fallback.push(r);
                let c = &centroids[r * 3..r * 3 + 3];
                [c[0] as f32, c[1] as f32, c[2] as f32]
            }
        })
        .collect();
    Ok((positions, fallback))
}

/// One node per residue, placed at the residue's alpha carbon.
pub fn alpha_carbon_pool(graph: &ProteinGraph) -> Result<(PoolingMatrix, ProteinGraph)> {
    let (positions, fallback) = alpha_carbon_positions(graph)?;
    if !fallback.is_empty() {
        log::debug!("residues without CA pooled to their centroid: {fallback:?}");
    }
    let pool = residue_assignment(graph)?;
    let pooled = apply_pooling(graph, &pool, PositionsMode::Explicit(positions))?;
    Ok((pool, pooled))
}

/// Merges consecutive node pairs within each chain; odd chains end in a singleton.
pub fn backbone_pool(graph: &ProteinGraph) -> Result<(PoolingMatrix, ProteinGraph)> {
    let chains = graph.node_chain();
    let mut local: HashMap<u32, u32> = HashMap::new();
    let mut cluster_of: HashMap<(u32, u32), u32> = HashMap::new();
    let mut assignment = Vec::with_capacity(chains.len());
    for &ch in &chains {
        let idx = local.entry(ch).or_insert(0);
        let key = (ch, *idx / 2);
        *idx += 1;
        let next = cluster_of.len() as u32;
        assignment.push(*cluster_of.entry(key).or_insert(next));
    }
    let pool = PoolingMatrix::from_assignment(assignment)?;
    let pooled = apply_pooling(graph, &pool, PositionsMode::Average)?;
    Ok((pool, pooled))
}

/// Atoms -> halved atoms -> alpha carbons -> backbone/2 -> backbone/4.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphHierarchy {
    pub levels: Vec<ProteinGraph>,
    /// `pools[k]` maps level k onto level k + 1.
    pub pools: Vec<PoolingMatrix>,
}

impl GraphHierarchy {
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(ProteinGraph::node_count).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.pools.len() + 1 != self.levels.len() {
            return Err(Error::format(format!(
                "{} levels with {} pooling matrices",
                self.levels.len(),
                self.pools.len()
            )));
        }
        for (k, p) in self.pools.iter().enumerate() {
            if p.row_count() != self.levels[k].node_count() || p.cluster_count() != self.levels[k + 1].node_count() {
                return Err(Error::format(format!("pooling matrix {k} does not match its levels")));
            }
        }
        self.levels.iter().try_for_each(ProteinGraph::validate)
    }

    /// The same hierarchy with new atom positions propagated to every level: averaged
    /// levels are re-averaged and the alpha-carbon level re-reads the CA atoms.
    pub fn with_atom_positions(&self, atom_positions: &[[f32; 3]]) -> Result<GraphHierarchy> {
        if atom_positions.len() != self.levels[0].node_count() {
            return Err(Error::shape("with_atom_positions", "position count differs from atom count"));
        }
        let mut out = self.clone();
        out.levels[0].positions = atom_positions.to_vec();
        for k in 1..out.levels.len() {
            let positions = if k == 2 && self.levels.len() == LEVELS {
                alpha_carbon_positions(&out.levels[0])?.0
            } else {
                let prev: Vec<f64> = out.levels[k - 1].positions.iter().flat_map(|p| p.map(f64::from)).collect();
                self.pools[k - 1]
                    .pool_rows(&prev, 3)
                    .chunks(3)
                    .map(|c| [c[0] as f32, c[1] as f32, c[2] as f32])
                    .collect()
            };
            out.levels[k].positions = positions;
        }
        Ok(out)
    }
}

impl GraphHierarchy {
    /// The same hierarchy with atom `i` moved to index `perm[i]`.
    pub fn permute_atoms(&self, perm: &[usize]) -> Result<GraphHierarchy> {
        let g = &self.levels[0];
        let n = g.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the atoms".into()));
        }
        let t = g.feature_dim;
        let mut positions = vec![[0.0f32; 3]; n];
        let mut features = vec![0.0f32; n * t];
        let mut residue_of = vec![0u32; n];
        let mut node_type = vec![0u32; n];
        for (i, &p) in perm.iter().enumerate() {
            positions[p] = g.positions[i];
            features[p * t..(p + 1) * t].copy_from_slice(g.feature_row(i));
            residue_of[p] = g.residue_of[i];
            node_type[p] = g.node_type[i];
        }
        let remap = |adj: &Adjacency| {
            Adjacency::from_edges(n, adj.edges().iter().map(|&(a, b)| (perm[a as usize], perm[b as usize])))
        };
        let mut out = self.clone();
        out.levels[0] = ProteinGraph {
            positions,
            features,
            feature_dim: t,
            adj_a: remap(&g.adj_a)?,
            adj_b: remap(&g.adj_b)?,
            residue_of,
            node_type,
            ca_index: g.ca_index.iter().map(|c| c.map(|i| perm[i as usize] as u32)).collect(),
            residue_chain: g.residue_chain.clone(),
        };
        if let Some(p0) = out.pools.first_mut() {
            let mut assignment = vec![0u32; n];
            for (i, &p) in perm.iter().enumerate() {
                assignment[p] = self.pools[0].assignment[i];
            }
            p0.assignment = assignment;
        }
        Ok(out)
    }
}

/// Amino-acid level pooling matrix for a whole protein.
pub fn amino_level_pool(structure: &ProteinStructure, graph: &ProteinGraph) -> Result<PoolingMatrix> {
    if structure.atom_count() != graph.node_count() {
        return Err(Error::shape("amino_level_pool", "structure and graph sizes differ"));
    }
    let offsets = structure.residue_offsets();
    let mut assignment = Vec::with_capacity(graph.node_count());
    let mut next = 0u32;
    for (r, res) in structure.residues.iter().enumerate() {
        let (lo, hi) = (offsets[r], offsets[r + 1]);
        let sub = Adjacency::from_edges(
            hi - lo,
            graph
                .adj_a
                .edges()
                .iter()
                .filter(|(a, b)| (lo..hi).contains(&(*a as usize)) && (lo..hi).contains(&(*b as usize)))
                .map(|&(a, b)| (a as usize - lo, b as usize - lo)),
        )?;
        let names: Vec<&str> = res.atoms.iter().map(|a| a.name.as_str()).collect();
        let local = amino_pool_matrix(&res.res_name, &names, &sub)?;
        assignment.extend(local.assignment.iter().map(|&c| next + c));
        next += local.cluster_count() as u32;
    }
    PoolingMatrix::new(assignment, next as usize)
}

pub fn build_hierarchy(structure: &ProteinStructure, graph: &ProteinGraph) -> Result<GraphHierarchy> {
    let p0 = amino_level_pool(structure, graph)?;
    let l1 = apply_pooling(graph, &p0, PositionsMode::Average)?;
    let p1 = residue_assignment(&l1)?;
    let (ca_positions, fallback) = alpha_carbon_positions(graph)?;
    if !fallback.is_empty() {
        log::debug!("{}: residues without CA pooled to their centroid: {fallback:?}", structure.source_id);
    }
    let l2 = apply_pooling(&l1, &p1, PositionsMode::Explicit(ca_positions))?;
    let (p2, l3) = backbone_pool(&l2)?;
    let (p3, l4) = backbone_pool(&l3)?;
    let h = GraphHierarchy {
        levels: vec![graph.clone(), l1, l2, l3, l4],
        pools: vec![p0, p1, p2, p3],
    };
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multigraph::graph_from_structure;
    use crate::synth::{self, ResidueSpec};
    use crate::templates;

    fn dipeptide() -> (ProteinStructure, ProteinGraph) {
        let specs = [ResidueSpec::new("GLY", synth::STRAND), ResidueSpec::new("ALA", synth::STRAND)];
        let s = synth::structure("dipeptide", vec![synth::build_chain('A', &specs)]);
        let g = graph_from_structure(&s, true).unwrap();
        (s, g)
    }

    #[test]
    fn identity_pooling_is_a_no_op() {
        let (_, g) = dipeptide();
        let out = apply_pooling(&g, &PoolingMatrix::identity(g.node_count()), PositionsMode::Average).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn merging_two_atoms_averages() {
        let g = ProteinGraph {
            positions: vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            features: vec![1.0, 2.0, 3.0, 6.0],
            feature_dim: 2,
            adj_a: Adjacency::from_edges(2, [(0, 1)]).unwrap(),
            adj_b: Adjacency::from_edges(2, [(0, 1)]).unwrap(),
            residue_of: vec![0, 0],
            node_type: vec![1, 1],
            ca_index: vec![None],
            residue_chain: vec![0],
        };
        let p = PoolingMatrix::from_assignment(vec![0, 0]).unwrap();
        let out = apply_pooling(&g, &p, PositionsMode::Average).unwrap();
        assert_eq!(out.positions, vec![[1.0, 0.0, 0.0]]);
        assert_eq!(out.features, vec![2.0, 4.0]);
        assert_eq!(out.adj_a.edge_count(), 0);
        assert_eq!(out.node_type, vec![1]);
    }

    #[test]
    fn dimension_mismatch() {
        let (_, g) = dipeptide();
        assert!(apply_pooling(&g, &PoolingMatrix::identity(3), PositionsMode::Average).is_err());
        assert!(PoolingMatrix::new(vec![0, 2], 3).is_err());
    }

    #[test]
    fn dipeptide_alpha_carbons() {
        let (s, g) = dipeptide();
        assert_eq!(g.node_count(), 9);
        let (p, out) = alpha_carbon_pool(&g).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(out.node_count(), 2);
        assert_eq!(out.adj_a.edges(), &[(0, 1)]);
        let ca0 = s.residues[0].atom("CA").unwrap().position.map(|v| v as f32);
        let ca1 = s.residues[1].atom("CA").unwrap().position.map(|v| v as f32);
        assert_eq!(out.positions, vec![ca0, ca1]);
    }

    #[test]
    fn missing_ca_uses_centroid() {
        let mut r = templates::template("GLY").unwrap().ideal_residue();
        r.atoms.retain(|a| a.name != "CA");
        let s = ProteinStructure { residues: vec![r], source_id: "x".into() };
        let g = graph_from_structure(&s, true).unwrap();
        let (_, out) = alpha_carbon_pool(&g).unwrap();
        let mut c = [0.0f64; 3];
        for a in s.atoms() {
            for (ck, &p) in c.iter_mut().zip(&a.position) {
                *ck += f64::from(p as f32) / 3.0;
            }
        }
        for (&got, want) in out.positions[0].iter().zip(c) {
            assert!((f64::from(got) - want).abs() < 1e-5);
        }
    }

    fn residue_level_chain(lens: &[usize]) -> ProteinGraph {
        let n: usize = lens.iter().sum();
        let mut chain = Vec::new();
        let mut edges = Vec::new();
        let mut base = 0;
        for (c, &l) in lens.iter().enumerate() {
            chain.extend(std::iter::repeat_n(c as u32, l));
            edges.extend((1..l).map(|i| (base + i - 1, base + i)));
            base += l;
        }
        ProteinGraph {
            positions: (0..n).map(|i| [i as f32, 0.0, 0.0]).collect(),
            features: vec![0.0; n],
            feature_dim: 1,
            adj_a: Adjacency::from_edges(n, edges.clone()).unwrap(),
            adj_b: Adjacency::from_edges(n, edges).unwrap(),
            residue_of: (0..n as u32).collect(),
            node_type: vec![NO_TYPE; n],
            ca_index: (0..n as u32).map(Some).collect(),
            residue_chain: chain,
        }
    }

    #[test]
    fn backbone_pairs() {
        let (p, out) = backbone_pool(&residue_level_chain(&[4])).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 1, 1]);
        assert_eq!(out.positions, vec![[0.5, 0.0, 0.0], [2.5, 0.0, 0.0]]);
        let (p, _) = backbone_pool(&residue_level_chain(&[5])).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 1, 1, 2]);
        assert_eq!(p.cluster_sizes, vec![2, 2, 1]);
    }

    #[test]
    fn backbone_never_merges_across_chains() {
        let (p, out) = backbone_pool(&residue_level_chain(&[3, 3])).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 1, 2, 2, 3]);
        assert_eq!(out.adj_a.edges(), &[(0, 1), (2, 3)]);
    }

    #[test]
    fn single_residue_hierarchy() {
        let s = ProteinStructure {
            residues: vec![templates::template("TYR").unwrap().ideal_residue()],
            source_id: "tyr".into(),
        };
        let g = graph_from_structure(&s, true).unwrap();
        let h = build_hierarchy(&s, &g).unwrap();
        assert_eq!(h.level_sizes(), vec![12, 6, 1, 1, 1]);
        h.validate().unwrap();
    }

    #[test]
    fn dipeptide_hierarchy_by_hand() {
        let (s, g) = dipeptide();
        let h = build_hierarchy(&s, &g).unwrap();
        // GLY 4 atoms -> 2 clusters, ALA 5 atoms -> 3 clusters.
        assert_eq!(h.level_sizes(), vec![9, 5, 2, 1, 1]);
        assert_eq!(&h.pools[0].assignment[..4].iter().collect::<std::collections::BTreeSet<_>>().len(), &2);
        assert!(h.pools[0].assignment[..4].iter().all(|&c| c < 2));
        assert!(h.pools[0].assignment[4..].iter().all(|&c| (2..5).contains(&c)));
        assert_eq!(h.pools[1].assignment, vec![0, 0, 1, 1, 1]);
        assert_eq!(h.pools[2].assignment, vec![0, 0]);
        assert_eq!(h.pools[3].assignment, vec![0]);
        assert_eq!(h.levels[2].adj_a.edges(), &[(0, 1)]);
        assert_eq!(h.levels[3].adj_a.edge_count(), 0);
    }

    #[test]
    fn permuting_atoms_keeps_pooled_levels() {
        let (s, g) = dipeptide();
        let h = build_hierarchy(&s, &g).unwrap();
        let perm = [8, 0, 7, 1, 6, 2, 5, 3, 4];
        let p = h.permute_atoms(&perm).unwrap();
        p.validate().unwrap();
        assert_eq!(p.levels[1..], h.levels[1..]);
        assert_eq!(p.levels[0].adj_a.edge_count(), g.adj_a.edge_count());
        assert!(h.permute_atoms(&[0, 0, 1, 2, 3, 4, 5, 6, 7]).is_err());
    }

    #[test]
    fn reposition_matches_rebuild() {
        let (s, g) = dipeptide();
        let h = build_hierarchy(&s, &g).unwrap();
        let shifted: Vec<[f32; 3]> = g.positions.iter().map(|p| [p[0] + 1.0, p[1], p[2] - 2.0]).collect();
        let moved = h.with_atom_positions(&shifted).unwrap();
        let mut g2 = g.clone();
        g2.positions = shifted;
        let rebuilt = build_hierarchy(&s, &g2).unwrap();
        assert_eq!(moved, rebuilt);
    }
}
