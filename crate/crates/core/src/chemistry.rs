//! Covalent bond inference and backbone hydrogen bonds from the DSSP electrostatic model.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::element::ElementTable;
use crate::error::Result;
use crate::geometry::{add, dist, normalize, scale, sub, Vec3};
use crate::multigraph::spatial::SpatialGrid;
use crate::structure::ProteinStructure;

/// Slack added to the sum of covalent radii, angstroms.
pub const COVALENT_TOLERANCE: f64 = 0.45;
/// SG-SG candidate radius for disulfide bridges, angstroms.
pub const DISULFIDE_CUTOFF: f64 = 2.5;
/// 0.084 * 332, kcal/mol * angstrom.
pub const DSSP_COUPLING: f64 = 27.888;
/// kcal/mol.
pub const DSSP_CUTOFF: f64 = -0.5;
pub const NH_LENGTH: f64 = 1.0;
/// Acceptor O atoms are searched within this radius of the donor N.
pub const HBOND_SEARCH_RADIUS: f64 = 5.2;
/// Pairs with any interatomic distance below this are rejected as degenerate.
pub const MIN_HBOND_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondKind {
    Covalent,
    Hydrogen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BondList {
    /// Sorted, unique, `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub kind: BondKind,
}

impl BondList {
    pub fn new(kind: BondKind, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        BondList { edges, kind }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovalentParams {
    pub tolerance: f64,
    pub disulfide_cutoff: f64,
}

impl Default for CovalentParams {
    fn default() -> Self {
        CovalentParams {
            tolerance: COVALENT_TOLERANCE,
            disulfide_cutoff: DISULFIDE_CUTOFF,
        }
    }
}

pub fn infer_covalent_bonds(structure: &ProteinStructure) -> Result<BondList> {
    infer_covalent_bonds_with(structure, ElementTable::builtin(), CovalentParams::default())
}

/// Bonds every same-residue pair within `r_i + r_j + tolerance`, the peptide C(i-1)-N(i)
/// candidate of consecutive residues in a chain, and SG-SG pairs across residues.
pub fn infer_covalent_bonds_with(
    structure: &ProteinStructure,
    table: &ElementTable,
    params: CovalentParams,
) -> Result<BondList> {
    let offsets = structure.residue_offsets();
    let radii: Vec<f64> = structure
        .atoms()
        .map(|a| table.get(a.element).map(|p| p.covalent_radius))
        .collect::<Result<_>>()?;
    let positions: Vec<Vec3> = structure.atoms().map(|a| a.position).collect();
    let bonded = |i: usize, j: usize| dist(positions[i], positions[j]) <= radii[i] + radii[j] + params.tolerance;

    let mut edges = Vec::new();
    for (r, res) in structure.residues.iter().enumerate() {
        let base = offsets[r];
        let k = res.atoms.len();
        for a in 0..k {
            for b in (a + 1)..k {
                if bonded(base + a, base + b) {
                    edges.push((base + a, base + b));
                }
            }
        }
    }
    for (r, prev) in structure.previous_in_chain().into_iter().enumerate() {
        let Some(p) = prev else { continue };
        let (Some(c), Some(n)) = (
            structure.residues[p].atom_index("C"),
            structure.residues[r].atom_index("N"),
        ) else {
            continue;
        };
        let (c, n) = (offsets[p] + c, offsets[r] + n);
        if bonded(c, n) {
            edges.push((c, n));
        }
    }
    let sulfurs: Vec<(usize, usize)> = structure
        .residues
        .iter()
        .enumerate()
        .filter_map(|(r, res)| res.atom_index("SG").map(|i| (r, offsets[r] + i)))
        .collect();
    for (x, &(ra, a)) in sulfurs.iter().enumerate() {
        for &(rb, b) in &sulfurs[x + 1..] {
            if ra != rb && dist(positions[a], positions[b]) <= params.disulfide_cutoff && bonded(a, b) {
                edges.push((a, b));
            }
        }
    }
    Ok(BondList::new(BondKind::Covalent, edges))
}

/// Amide hydrogen positions keyed by residue ordinal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AmideHydrogens {
    pub positions: BTreeMap<usize, Vec3>,
    /// Residues that have a predecessor but lack N, or the predecessor's C or O.
    pub skipped: Vec<usize>,
}

/// H(i) = N(i) + 1.0 Å along (C(i-1) - O(i-1)). Prolines and chain starts get none.
pub fn place_amide_hydrogens(structure: &ProteinStructure) -> AmideHydrogens {
    let mut out = AmideHydrogens::default();
    for (r, prev) in structure.previous_in_chain().into_iter().enumerate() {
        let Some(p) = prev else { continue };
        let res = &structure.residues[r];
        if res.res_name == "PRO" {
            continue;
        }
        let prev = &structure.residues[p];
        match (res.atom("N"), prev.atom("C"), prev.atom("O")) {
            (Some(n), Some(c), Some(o)) => {
                let u = normalize(sub(c.position, o.position));
                out.positions.insert(r, add(n.position, scale(u, NH_LENGTH)));
            }
            _ => out.skipped.push(r),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HbondParams {
    pub interchain: bool,
}

impl Default for HbondParams {
    fn default() -> Self {
        HbondParams { interchain: true }
    }
}

/// DSSP energy of the N-H...O=C pair, kcal/mol, or `None` for degenerate geometry.
pub fn dssp_energy(n: Vec3, h: Vec3, o: Vec3, c: Vec3) -> Option<f64> {
    let r_on = dist(o, n);
    let r_ch = dist(c, h);
    let r_oh = dist(o, h);
    let r_cn = dist(c, n);
    if [r_on, r_ch, r_oh, r_cn].iter().any(|&d| d < MIN_HBOND_DISTANCE) {
        return None;
    }
    Some(DSSP_COUPLING * (1.0 / r_on + 1.0 / r_ch - 1.0 / r_oh - 1.0 / r_cn))
}

pub fn detect_hydrogen_bonds(structure: &ProteinStructure, hydrogens: &AmideHydrogens) -> BondList {
    detect_hydrogen_bonds_with(structure, hydrogens, HbondParams::default())
}

/// Emits (donor N, acceptor O) for every backbone pair with DSSP energy below -0.5 kcal/mol.
pub fn detect_hydrogen_bonds_with(
    structure: &ProteinStructure,
    hydrogens: &AmideHydrogens,
    params: HbondParams,
) -> BondList {
    let offsets = structure.residue_offsets();
    let chains = structure.chain_ordinals();
    // Position of each residue within its chain.
    let mut chain_pos = vec![0usize; structure.residues.len()];
    let mut counters: Vec<usize> = Vec::new();
    for (r, &ch) in chains.iter().enumerate() {
        if counters.len() <= ch {
            counters.resize(ch + 1, 0);
        }
        chain_pos[r] = counters[ch];
        counters[ch] += 1;
    }

    struct Acceptor {
        residue: usize,
        o_index: usize,
        o: Vec3,
        c: Vec3,
    }
    let acceptors: Vec<Acceptor> = structure
        .residues
        .iter()
        .enumerate()
        .filter_map(|(r, res)| {
            let oi = res.atom_index("O")?;
            let c = res.atom("C")?;
            Some(Acceptor {
                residue: r,
                o_index: offsets[r] + oi,
                o: res.atoms[oi].position,
                c: c.position,
            })
        })
        .collect();
    let o_positions: Vec<Vec3> = acceptors.iter().map(|a| a.o).collect();
    let grid = SpatialGrid::new(&o_positions, HBOND_SEARCH_RADIUS);

    let donors: Vec<(usize, usize, Vec3, Vec3)> = hydrogens
        .positions
        .iter()
        .filter_map(|(&r, &h)| {
            let res = &structure.residues[r];
            let ni = res.atom_index("N")?;
            Some((r, offsets[r] + ni, res.atoms[ni].position, h))
        })
        .collect();

    let edges: Vec<(usize, usize)> = donors
        .par_iter()
        .flat_map_iter(|&(r, n_index, n, h)| {
            grid.query(&o_positions, n, HBOND_SEARCH_RADIUS)
                .into_iter()
                .filter_map(|k| {
                    let acc = &acceptors[k];
                    let j = acc.residue;
                    let allowed = if chains[r] == chains[j] {
                        chain_pos[r].abs_diff(chain_pos[j]) >= 2
                    } else {
                        params.interchain
                    };
                    if !allowed {
                        return None;
                    }
                    let e = dssp_energy(n, h, acc.o, acc.c)?;
                    (e < DSSP_CUTOFF).then_some((n_index, acc.o_index))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    BondList::new(BondKind::Hydrogen, edges)
}
