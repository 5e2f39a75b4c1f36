//! Ideal-geometry heavy-atom templates for the 20 canonical amino acids.
//!
//! Side chains are described as internal coordinates (bond, angle, dihedral) relative to
//! previously placed atoms of the same residue. The templates drive the cached amino-acid
//! pooling matrices and the synthetic structure builder.

use crate::element::Element;
use crate::geometry::{place, Vec3};
use crate::structure::{Atom, Residue};

pub const N_CA: f64 = 1.458;
pub const CA_C: f64 = 1.525;
pub const C_O: f64 = 1.231;
pub const C_N: f64 = 1.329;
pub const N_CA_C: f64 = 111.0;
pub const CA_C_N: f64 = 116.2;
pub const C_N_CA: f64 = 121.7;
pub const CA_C_O: f64 = 120.5;

/// One side-chain atom: bonded to `refs.2`, angle refs.1-refs.2-atom, dihedral refs.0-..-atom.
#[derive(Debug, Clone, Copy)]
pub struct ZEntry {
    pub name: &'static str,
    pub element: Element,
    pub refs: (&'static str, &'static str, &'static str),
    pub bond: f64,
    pub angle: f64,
    pub dihedral: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ResidueTemplate {
    pub name: &'static str,
    pub side_chain: &'static [ZEntry],
    /// Ring bonds not implied by the internal-coordinate tree.
    pub ring_closures: &'static [(&'static str, &'static str)],
}

const C: Element = Element::C;
const N: Element = Element::N;
const O: Element = Element::O;
const S: Element = Element::S;

const fn z(
    name: &'static str,
    element: Element,
    refs: (&'static str, &'static str, &'static str),
    bond: f64,
    angle: f64,
    dihedral: f64,
) -> ZEntry {
    ZEntry {
        name,
        element,
        refs,
        bond,
        angle,
        dihedral,
    }
}

const CB: ZEntry = z("CB", C, ("C", "N", "CA"), 1.530, 110.5, 122.686);

const fn t(
    name: &'static str,
    side_chain: &'static [ZEntry],
    ring_closures: &'static [(&'static str, &'static str)],
) -> ResidueTemplate {
    ResidueTemplate {
        name,
        side_chain,
        ring_closures,
    }
}

pub const TEMPLATES: [ResidueTemplate; 20] = [
    t("GLY", &[], &[]),
    t("ALA", &[CB], &[]),
    t("SER", &[CB, z("OG", O, ("N", "CA", "CB"), 1.417, 110.8, -63.0)], &[]),
    t("CYS", &[CB, z("SG", S, ("N", "CA", "CB"), 1.808, 113.8, -62.0)], &[]),
    t(
        "VAL",
        &[
            CB,
            z("CG1", C, ("N", "CA", "CB"), 1.527, 110.7, 177.0),
            z("CG2", C, ("N", "CA", "CB"), 1.527, 110.4, -63.0),
        ],
        &[],
    ),
    t(
        "THR",
        &[
            CB,
            z("OG1", O, ("N", "CA", "CB"), 1.433, 109.2, 60.0),
            z("CG2", C, ("N", "CA", "CB"), 1.521, 111.1, -60.0),
        ],
        &[],
    ),
    t(
        "LEU",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.530, 116.1, -60.0),
            z("CD1", C, ("CA", "CB", "CG"), 1.524, 110.3, 175.0),
            z("CD2", C, ("CA", "CB", "CG"), 1.525, 110.6, 55.0),
        ],
        &[],
    ),
    t(
        "ILE",
        &[
            CB,
            z("CG1", C, ("N", "CA", "CB"), 1.527, 110.4, -60.0),
            z("CG2", C, ("N", "CA", "CB"), 1.527, 110.5, 180.0),
            z("CD1", C, ("CA", "CB", "CG1"), 1.520, 113.8, 170.0),
        ],
        &[],
    ),
    t(
        "MET",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.520, 114.0, -60.0),
            z("SD", S, ("CA", "CB", "CG"), 1.810, 112.7, 180.0),
            z("CE", C, ("CB", "CG", "SD"), 1.790, 100.5, 70.0),
        ],
        &[],
    ),
    t(
        "PRO",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.495, 102.5, 25.5),
            z("CD", C, ("CA", "CB", "CG"), 1.507, 105.5, -24.5),
        ],
        &[("CD", "N")],
    ),
    t(
        "PHE",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.500, 113.8, -60.0),
            z("CD1", C, ("CA", "CB", "CG"), 1.390, 120.0, 90.0),
            z("CD2", C, ("CA", "CB", "CG"), 1.390, 120.0, -90.0),
            z("CE1", C, ("CB", "CG", "CD1"), 1.390, 120.0, 180.0),
            z("CE2", C, ("CB", "CG", "CD2"), 1.390, 120.0, 180.0),
            z("CZ", C, ("CG", "CD1", "CE1"), 1.390, 120.0, 0.0),
        ],
        &[("CZ", "CE2")],
    ),
    t(
        "TYR",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.510, 113.8, -60.0),
            z("CD1", C, ("CA", "CB", "CG"), 1.390, 120.0, 90.0),
            z("CD2", C, ("CA", "CB", "CG"), 1.390, 120.0, -90.0),
            z("CE1", C, ("CB", "CG", "CD1"), 1.390, 120.0, 180.0),
            z("CE2", C, ("CB", "CG", "CD2"), 1.390, 120.0, 180.0),
            z("CZ", C, ("CG", "CD1", "CE1"), 1.390, 120.0, 0.0),
            z("OH", O, ("CD1", "CE1", "CZ"), 1.360, 120.0, 180.0),
        ],
        &[("CZ", "CE2")],
    ),
    t(
        "TRP",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.500, 114.0, -60.0),
            z("CD1", C, ("CA", "CB", "CG"), 1.400, 126.0, 90.0),
            z("CD2", C, ("CA", "CB", "CG"), 1.400, 126.0, -90.0),
            z("NE1", N, ("CB", "CG", "CD1"), 1.400, 108.0, 180.0),
            z("CE2", C, ("CB", "CG", "CD2"), 1.400, 108.0, 180.0),
            z("CE3", C, ("CB", "CG", "CD2"), 1.400, 132.0, 0.0),
            z("CZ2", C, ("CG", "CD2", "CE2"), 1.400, 120.0, 180.0),
            z("CH2", C, ("CD2", "CE2", "CZ2"), 1.400, 120.0, 0.0),
            z("CZ3", C, ("CE2", "CZ2", "CH2"), 1.400, 120.0, 0.0),
        ],
        &[("NE1", "CE2"), ("CZ3", "CE3")],
    ),
    t(
        "HIS",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.500, 113.7, -60.0),
            z("ND1", N, ("CA", "CB", "CG"), 1.380, 126.0, 90.0),
            z("CD2", C, ("CA", "CB", "CG"), 1.380, 126.0, -90.0),
            z("CE1", C, ("CB", "CG", "ND1"), 1.380, 108.0, 180.0),
            z("NE2", N, ("CB", "CG", "CD2"), 1.380, 108.0, 180.0),
        ],
        &[("CE1", "NE2")],
    ),
    t(
        "ASP",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.520, 113.0, -60.0),
            z("OD1", O, ("CA", "CB", "CG"), 1.250, 118.4, -30.0),
            z("OD2", O, ("CA", "CB", "CG"), 1.250, 118.4, 150.0),
        ],
        &[],
    ),
    t(
        "ASN",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.520, 112.6, -60.0),
            z("OD1", O, ("CA", "CB", "CG"), 1.230, 120.8, -30.0),
            z("ND2", N, ("CA", "CB", "CG"), 1.330, 116.4, 150.0),
        ],
        &[],
    ),
    t(
        "GLU",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.520, 113.8, -60.0),
            z("CD", C, ("CA", "CB", "CG"), 1.520, 113.3, 180.0),
            z("OE1", O, ("CB", "CG", "CD"), 1.250, 118.4, -30.0),
            z("OE2", O, ("CB", "CG", "CD"), 1.250, 118.4, 150.0),
        ],
        &[],
    ),
    t(
        "GLN",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.520, 113.8, -60.0),
            z("CD", C, ("CA", "CB", "CG"), 1.520, 112.7, 180.0),
            z("OE1", O, ("CB", "CG", "CD"), 1.230, 120.9, -30.0),
            z("NE2", N, ("CB", "CG", "CD"), 1.330, 116.5, 150.0),
        ],
        &[],
    ),
    t(
        "LYS",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.520, 114.0, -60.0),
            z("CD", C, ("CA", "CB", "CG"), 1.520, 111.5, 180.0),
            z("CE", C, ("CB", "CG", "CD"), 1.520, 111.5, 180.0),
            z("NZ", N, ("CG", "CD", "CE"), 1.490, 111.7, 180.0),
        ],
        &[],
    ),
    t(
        "ARG",
        &[
            CB,
            z("CG", C, ("N", "CA", "CB"), 1.520, 114.0, -60.0),
            z("CD", C, ("CA", "CB", "CG"), 1.520, 111.3, 180.0),
            z("NE", N, ("CB", "CG", "CD"), 1.460, 112.0, 180.0),
            z("CZ", C, ("CG", "CD", "NE"), 1.330, 124.5, 180.0),
            z("NH1", N, ("CD", "NE", "CZ"), 1.330, 120.0, 0.0),
            z("NH2", N, ("CD", "NE", "CZ"), 1.330, 120.0, 180.0),
        ],
        &[],
    ),
];

pub const CANONICAL: [&str; 20] = [
    "GLY", "ALA", "SER", "CYS", "VAL", "THR", "LEU", "ILE", "MET", "PRO", "PHE", "TYR", "TRP",
    "HIS", "ASP", "ASN", "GLU", "GLN", "LYS", "ARG",
];

pub fn template(res_name: &str) -> Option<&'static ResidueTemplate> {
    TEMPLATES.iter().find(|t| t.name == res_name)
}

impl ResidueTemplate {
    /// Heavy-atom names in template order: N, CA, C, O, then the side chain.
    pub fn atom_names(&self) -> Vec<&'static str> {
        ["N", "CA", "C", "O"]
            .into_iter()
            .chain(self.side_chain.iter().map(|e| e.name))
            .collect()
    }

    pub fn heavy_atom_count(&self) -> usize {
        4 + self.side_chain.len()
    }

    /// Declared covalent topology as index pairs into `atom_names`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let names = self.atom_names();
        let idx = |n: &str| names.iter().position(|m| *m == n).expect("template atom");
        let mut bonds = vec![(0, 1), (1, 2), (2, 3)];
        for (k, e) in self.side_chain.iter().enumerate() {
            bonds.push((idx(e.refs.2), 4 + k));
        }
        for (a, b) in self.ring_closures {
            bonds.push((idx(a), idx(b)));
        }
        let mut bonds: Vec<(usize, usize)> =
            bonds.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        bonds.sort_unstable();
        bonds
    }

    /// Side-chain atom positions given the residue's backbone N, CA and C.
    pub fn place_side_chain(&self, n: Vec3, ca: Vec3, c: Vec3) -> Vec<(&'static str, Element, Vec3)> {
        let mut placed: Vec<(&'static str, Vec3)> = vec![("N", n), ("CA", ca), ("C", c)];
        let mut out = Vec::with_capacity(self.side_chain.len());
        for e in self.side_chain {
            let get = |name: &str| {
                placed
                    .iter()
                    .find(|(m, _)| *m == name)
                    .map(|(_, p)| *p)
                    .expect("reference placed before use")
            };
            let p = place(get(e.refs.0), get(e.refs.1), get(e.refs.2), e.bond, e.angle, e.dihedral);
            placed.push((e.name, p));
            out.push((e.name, e.element, p));
        }
        out
    }

    /// A standalone residue in ideal geometry.
    pub fn ideal_residue(&self) -> Residue {
        let n = [0.0, 0.0, 0.0];
        let ca = [N_CA, 0.0, 0.0];
        let c = place([-0.5, 1.4, 0.0], n, ca, CA_C, N_CA_C, -60.0);
        let o = place(n, ca, c, C_O, CA_C_O, 140.0 + 180.0);
        let mut atoms = vec![
            backbone_atom("N", Element::N, n),
            backbone_atom("CA", Element::C, ca),
            backbone_atom("C", Element::C, c),
            backbone_atom("O", Element::O, o),
        ];
        for (name, element, p) in self.place_side_chain(n, ca, c) {
            atoms.push(backbone_atom(name, element, p));
        }
        for (i, a) in atoms.iter_mut().enumerate() {
            a.serial = i as i64 + 1;
        }
        Residue {
            chain_id: 'A',
            seq_num: 1,
            insertion_code: None,
            res_name: self.name.to_string(),
            atoms,
        }
    }
}

pub(crate) fn backbone_atom(name: &str, element: Element, position: Vec3) -> Atom {
    Atom {
        serial: 0,
        name: name.to_string(),
        element,
        position,
        alt_loc: None,
        occupancy: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;

    #[test]
    fn heavy_atom_counts() {
        let expected = [
            ("GLY", 4), ("ALA", 5), ("SER", 6), ("CYS", 6), ("VAL", 7), ("THR", 7), ("LEU", 8),
            ("ILE", 8), ("MET", 8), ("PRO", 7), ("PHE", 11), ("TYR", 12), ("TRP", 14),
            ("HIS", 10), ("ASP", 8), ("ASN", 8), ("GLU", 9), ("GLN", 9), ("LYS", 9), ("ARG", 11),
        ];
        for (name, count) in expected {
            assert_eq!(template(name).unwrap().heavy_atom_count(), count, "{name}");
        }
    }

    #[test]
    fn ring_closures_are_bond_length() {
        for t in TEMPLATES.iter() {
            let r = t.ideal_residue();
            for (a, b) in t.ring_closures {
                let d = dist(r.atom(a).unwrap().position, r.atom(b).unwrap().position);
                assert!((1.2..1.6).contains(&d), "{} {a}-{b}: {d}", t.name);
            }
        }
    }
}
