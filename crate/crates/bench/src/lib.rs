//! Fixtures shared by the pipeline benchmarks.

use ieprot::synth::{self, ResidueSpec};
use ieprot::templates::CANONICAL;
use ieprot::ProteinStructure;

/// A single chain of `len` residues cycling through the canonical residues, alternating
/// helical and extended stretches of ten.
pub fn chain(len: usize) -> ProteinStructure {
    let specs: Vec<_> = (0..len)
        .map(|i| {
            let torsion = if (i / 10) % 2 == 0 { synth::HELIX } else { synth::STRAND };
            ResidueSpec::new(CANONICAL[(i * 7) % CANONICAL.len()], torsion)
        })
        .collect();
    synth::structure("bench", vec![synth::build_chain('A', &specs)])
}

#[cfg(test)]
mod tests {
    #[test]
    fn chain_has_requested_length() {
        let s = super::chain(25);
        assert_eq!(s.residues.len(), 25);
        assert!(s.atom_count() > 100);
    }
}
