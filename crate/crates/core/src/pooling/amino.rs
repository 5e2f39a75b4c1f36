//! Per-residue halving: spectral clustering of each amino acid's covalent graph.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use super::spectral::spectral_cluster;
use super::PoolingMatrix;
use crate::chemistry::infer_covalent_bonds;
use crate::error::Result;
use crate::multigraph::Adjacency;
use crate::structure::ProteinStructure;
use crate::templates::TEMPLATES;

/// Clustering of a canonical residue template, keyed by atom name.
#[derive(Debug, PartialEq)]
pub struct TemplatePool {
    pub res_name: &'static str,
    pub atom_names: Vec<&'static str>,
    pub bonds: Adjacency,
    pub matrix: PoolingMatrix,
}

impl TemplatePool {
    pub fn cluster_of(&self, atom_name: &str) -> Option<u32> {
        self.atom_names
            .iter()
            .position(|n| *n == atom_name)
            .map(|i| self.matrix.assignment[i])
    }
}

fn cache() -> &'static HashMap<&'static str, Arc<TemplatePool>> {
    static CACHE: OnceLock<HashMap<&'static str, Arc<TemplatePool>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        TEMPLATES
            .iter()
            .map(|t| {
                let structure = ProteinStructure {
                    residues: vec![t.ideal_residue()],
                    source_id: t.name.to_string(),
                };
                let bonds = infer_covalent_bonds(&structure).expect("template elements are known");
                let adj = Adjacency::from_edges(t.heavy_atom_count(), bonds.edges).expect("template bonds");
                let matrix = halve(&adj).expect("templates are connected");
                let pool = TemplatePool {
                    res_name: t.name,
                    atom_names: t.atom_names(),
                    bonds: adj,
                    matrix,
                };
                (t.name, Arc::new(pool))
            })
            .collect()
    })
}

/// Cached clustering for one of the 20 canonical residues.
pub fn canonical_pool(res_name: &str) -> Option<Arc<TemplatePool>> {
    cache().get(res_name).cloned()
}

/// ceil(k/2) spectral clusters of a residue's covalent subgraph. Disconnected fragments are
/// halved component by component.
pub fn halve(adjacency: &Adjacency) -> Result<PoolingMatrix> {
    let n = adjacency.node_count();
    let (labels, count) = adjacency.component_labels();
    if count <= 1 {
        let assignment = spectral_cluster(adjacency, n.div_ceil(2))?;
        return PoolingMatrix::from_assignment(assignment.into_iter().map(|c| c as u32).collect());
    }
    let mut assignment = vec![0u32; n];
    let mut next = 0u32;
    for comp in 0..count {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == comp).collect();
        let local: HashMap<usize, usize> = members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let sub = Adjacency::from_edges(
            members.len(),
            adjacency
                .edges()
                .iter()
                .filter(|(a, _)| labels[*a as usize] == comp)
                .map(|&(a, b)| (local[&(a as usize)], local[&(b as usize)])),
        )?;
        let clusters = members.len().div_ceil(2);
        let sub_labels = spectral_cluster(&sub, clusters)?;
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = next + sub_labels[k] as u32;
        }
        next += clusters as u32;
    }
    PoolingMatrix::from_assignment(assignment)
}

/// Pooling matrix for one observed residue: the cached template clustering when the heavy
/// atoms match a canonical template exactly, otherwise clustered from `subgraph`.
pub fn amino_pool_matrix(res_name: &str, atom_names: &[&str], subgraph: &Adjacency) -> Result<PoolingMatrix> {
    if let Some(pool) = canonical_pool(res_name) {
        if pool.atom_names.len() == atom_names.len() {
            let mapped: Option<Vec<u32>> = atom_names.iter().map(|n| pool.cluster_of(n)).collect();
            if let Some(assignment) = mapped {
                let mut sorted = atom_names.to_vec();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() == atom_names.len() {
                    return PoolingMatrix::from_assignment(assignment);
                }
            }
        }
    }
    halve(subgraph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::CANONICAL;

    #[test]
    fn glycine_two_clusters() {
        let g = canonical_pool("GLY").unwrap();
        assert_eq!(g.matrix.cluster_count(), 2);
    }

    #[test]
    fn single_atom_fragment() {
        let m = halve(&Adjacency::empty(1)).unwrap();
        assert_eq!(m.assignment, vec![0]);
    }

    #[test]
    fn every_canonical_residue_halves() {
        for name in CANONICAL {
            let pool = canonical_pool(name).unwrap();
            let k = pool.atom_names.len();
            assert_eq!(pool.matrix.cluster_count(), k.div_ceil(2), "{name}");
            assert!(pool.matrix.cluster_sizes.iter().all(|&s| s >= 1));
        }
    }

    #[test]
    fn cache_returns_the_same_object() {
        let a = canonical_pool("TRP").unwrap();
        let b = canonical_pool("TRP").unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn observed_order_is_mapped_by_name() {
        let pool = canonical_pool("SER").unwrap();
        let names = ["OG", "CB", "O", "C", "CA", "N"];
        let m = amino_pool_matrix("SER", &names, &Adjacency::empty(6)).unwrap();
        for (i, n) in names.iter().enumerate() {
            let expected = pool.cluster_of(n).unwrap();
            // Same partition, possibly renumbered.
            for (j, o) in names.iter().enumerate() {
                let same_t = pool.cluster_of(o).unwrap() == expected;
                assert_eq!(m.assignment[i] == m.assignment[j], same_t);
            }
        }
    }

    #[test]
    fn incomplete_residue_is_clustered_on_the_fly() {
        // N-CA-C only: three connected atoms, two clusters.
        let adj = Adjacency::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let m = amino_pool_matrix("SER", &["N", "CA", "C"], &adj).unwrap();
        assert_eq!(m.cluster_count(), 2);
        // Fragmented residue: per-component halving.
        let adj = Adjacency::from_edges(5, [(0, 1), (2, 3), (3, 4)]).unwrap();
        let m = amino_pool_matrix("XYZ", &["A", "B", "C", "D", "E"], &adj).unwrap();
        assert_eq!(m.cluster_count(), 1 + 2);
    }
}
