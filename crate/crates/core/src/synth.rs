//! Synthetic protein structures built from ideal residue geometry and backbone torsions.
//!
//! Used for fixtures, benchmarks and sanity training sets where real PDB entries are not at
//! hand.

use rand::Rng;

use crate::element::Element;
use crate::geometry::{add, mat_vec, place, uniform_rotation, Mat3, Vec3};
use crate::structure::{ProteinStructure, Residue};
use crate::templates::{self, backbone_atom, CANONICAL};

pub const HELIX: (f64, f64) = (-57.0, -47.0);
pub const STRAND: (f64, f64) = (-120.0, 130.0);
pub const TURN: (f64, f64) = (60.0, 30.0);

/// One residue to build: 3-letter name with its (phi, psi) torsions in degrees.
#[derive(Debug, Clone)]
pub struct ResidueSpec {
    pub name: String,
    pub phi: f64,
    pub psi: f64,
}

impl ResidueSpec {
    pub fn new(name: &str, (phi, psi): (f64, f64)) -> Self {
        ResidueSpec {
            name: name.to_string(),
            phi,
            psi,
        }
    }
}

/// Builds one chain with trans peptide bonds. Unknown residue names get a bare backbone.
pub fn build_chain(chain_id: char, specs: &[ResidueSpec]) -> Vec<Residue> {
    let mut residues = Vec::with_capacity(specs.len());
    let mut n: Vec3 = [0.0, 0.0, 0.0];
    let mut ca: Vec3 = [templates::N_CA, 0.0, 0.0];
    let mut c: Vec3 = place([-0.5, 1.4, 0.0], n, ca, templates::CA_C, templates::N_CA_C, specs.first().map_or(-60.0, |s| s.phi));
    for (i, spec) in specs.iter().enumerate() {
        let o = place(n, ca, c, templates::C_O, templates::CA_C_O, spec.psi + 180.0);
        let mut atoms = vec![
            backbone_atom("N", Element::N, n),
            backbone_atom("CA", Element::C, ca),
            backbone_atom("C", Element::C, c),
            backbone_atom("O", Element::O, o),
        ];
        if let Some(t) = templates::template(&spec.name) {
            for (name, element, p) in t.place_side_chain(n, ca, c) {
                atoms.push(backbone_atom(name, element, p));
            }
        }
        residues.push(Residue {
            chain_id,
            seq_num: i as i32 + 1,
            insertion_code: None,
            res_name: spec.name.clone(),
            atoms,
        });
        if let Some(next) = specs.get(i + 1) {
            let n_next = place(n, ca, c, templates::C_N, templates::CA_C_N, spec.psi);
            let ca_next = place(ca, c, n_next, templates::N_CA, templates::C_N_CA, 180.0);
            let c_next = place(c, n_next, ca_next, templates::CA_C, templates::N_CA_C, next.phi);
            n = n_next;
            ca = ca_next;
            c = c_next;
        }
    }
    renumber(&mut residues);
    residues
}

fn renumber(residues: &mut [Residue]) {
    let mut serial = 0;
    for r in residues.iter_mut() {
        for a in r.atoms.iter_mut() {
            serial += 1;
            a.serial = serial;
        }
    }
}

/// Applies `rot` then `shift` to every atom.
pub fn transform(residues: &mut [Residue], rot: &Mat3, shift: Vec3) {
    for r in residues.iter_mut() {
        for a in r.atoms.iter_mut() {
            a.position = add(mat_vec(rot, a.position), shift);
        }
    }
}

pub fn structure(source_id: &str, chains: Vec<Vec<Residue>>) -> ProteinStructure {
    let mut residues: Vec<Residue> = chains.into_iter().flatten().collect();
    renumber(&mut residues);
    ProteinStructure {
        residues,
        source_id: source_id.to_string(),
    }
}

/// Random canonical sequence; cysteines are left out so no accidental disulfides form.
pub fn random_sequence<R: Rng>(rng: &mut R, len: usize) -> Vec<&'static str> {
    let pool: Vec<&'static str> = CANONICAL.iter().copied().filter(|n| *n != "CYS").collect();
    (0..len).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

/// Single chain whose torsions are all `torsion`, jittered by up to `jitter` degrees.
pub fn uniform_chain<R: Rng>(rng: &mut R, chain_id: char, len: usize, torsion: (f64, f64), jitter: f64) -> Vec<Residue> {
    let seq = random_sequence(rng, len);
    let specs: Vec<ResidueSpec> = seq
        .iter()
        .map(|name| {
            let dphi = if jitter > 0.0 { rng.random_range(-jitter..jitter) } else { 0.0 };
            let dpsi = if jitter > 0.0 { rng.random_range(-jitter..jitter) } else { 0.0 };
            ResidueSpec::new(name, (torsion.0 + dphi, torsion.1 + dpsi))
        })
        .collect();
    build_chain(chain_id, &specs)
}

/// Rigidly rotates the whole structure to a random orientation.
pub fn random_pose<R: Rng>(rng: &mut R, residues: &mut [Residue]) {
    let rot = uniform_rotation(rng.random(), rng.random(), rng.random());
    transform(residues, &rot, [0.0; 3]);
}

/// Toy two-class protein: class 0 is an all-helix chain, class 1 an extended strand, both with
/// 10 degree torsion jitter and a random orientation.
pub fn toy_protein<R: Rng>(rng: &mut R, id: &str, class: usize, len: usize) -> ProteinStructure {
    let torsion = if class == 0 { HELIX } else { STRAND };
    let mut chain = uniform_chain(rng, 'A', len, torsion, 10.0);
    random_pose(rng, &mut chain);
    structure(id, vec![chain])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dihedral_deg, dist};

    #[test]
    fn torsions_are_reproduced() {
        let specs: Vec<ResidueSpec> = ["ALA", "GLY", "SER", "LEU"]
            .iter()
            .map(|n| ResidueSpec::new(n, HELIX))
            .collect();
        let chain = build_chain('A', &specs);
        let p = |i: usize, name: &str| chain[i].atom(name).unwrap().position;
        for i in 1..3 {
            let phi = dihedral_deg(p(i - 1, "C"), p(i, "N"), p(i, "CA"), p(i, "C"));
            let psi = dihedral_deg(p(i, "N"), p(i, "CA"), p(i, "C"), p(i + 1, "N"));
            assert!((phi - HELIX.0).abs() < 1e-6, "phi {phi}");
            assert!((psi - HELIX.1).abs() < 1e-6, "psi {psi}");
            assert!((dist(p(i, "C"), p(i + 1, "N")) - templates::C_N).abs() < 1e-9);
        }
    }
}
