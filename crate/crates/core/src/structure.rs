//! PDB ingestion into a canonical residue/atom model.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::element::{Element, ElementTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub serial: i64,
    pub name: String,
    pub element: Element,
    /// Angstroms.
    pub position: [f64; 3],
    pub alt_loc: Option<char>,
    pub occupancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    pub chain_id: char,
    pub seq_num: i32,
    pub insertion_code: Option<char>,
    pub res_name: String,
    pub atoms: Vec<Atom>,
}

impl Residue {
    pub fn atom(&self, name: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.name == name)
    }

    pub fn atom_index(&self, name: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProteinStructure {
    pub residues: Vec<Residue>,
    pub source_id: String,
}

impl ProteinStructure {
    pub fn atom_count(&self) -> usize {
        self.residues.iter().map(|r| r.atoms.len()).sum()
    }

    /// Global index of the first atom of each residue, plus a trailing total.
    pub fn residue_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.residues.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for r in &self.residues {
            acc += r.atoms.len();
            offsets.push(acc);
        }
        offsets
    }

    /// Atoms in global index order.
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.residues.iter().flat_map(|r| r.atoms.iter())
    }

    /// Residue ordinal of every atom.
    pub fn residue_of_atoms(&self) -> Vec<usize> {
        self.residues
            .iter()
            .enumerate()
            .flat_map(|(i, r)| std::iter::repeat_n(i, r.atoms.len()))
            .collect()
    }

    /// Chain ordinal (order of first appearance) for every residue.
    pub fn chain_ordinals(&self) -> Vec<usize> {
        let mut seen: Vec<char> = Vec::new();
        self.residues
            .iter()
            .map(|r| match seen.iter().position(|&c| c == r.chain_id) {
                Some(i) => i,
                None => {
                    seen.push(r.chain_id);
                    seen.len() - 1
                }
            })
            .collect()
    }

    /// For every residue, the ordinal of the preceding residue of the same chain in file
    /// order, when they are adjacent in the residue list.
    pub fn previous_in_chain(&self) -> Vec<Option<usize>> {
        (0..self.residues.len())
            .map(|i| {
                (i > 0 && self.residues[i - 1].chain_id == self.residues[i].chain_id)
                    .then(|| i - 1)
            })
            .collect()
    }
}

const WATER: &[&str] = &["HOH", "WAT", "DOD", "H2O", "SOL"];
const NUCLEIC: &[&str] = &[
    "A", "C", "G", "U", "I", "T", "DA", "DC", "DG", "DT", "DU", "DI", "N", "DN",
];

/// Parses PDB text with the builtin element table.
pub fn parse_pdb(bytes: &[u8]) -> Result<ProteinStructure> {
    parse_pdb_with(bytes, ElementTable::builtin())
}

pub fn parse_pdb_with(bytes: &[u8], table: &ElementTable) -> Result<ProteinStructure> {
    struct Pending {
        residue: Residue,
        by_name: HashMap<String, usize>,
    }

    let mut residues: Vec<Pending> = Vec::new();
    let mut index: HashMap<(char, i32, Option<char>), usize> = HashMap::new();
    let mut seen_model = false;
    let mut running_serial = 0i64;
    let mut any_atom = false;

    for (lineno, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        let lineno = lineno + 1;
        let record = field(line, 0, 6);
        match record.trim_end() {
            "MODEL" => {
                if seen_model {
                    break;
                }
                seen_model = true;
                continue;
            }
            "ENDMDL" | "END" => break,
            "ATOM" => {}
            _ => continue,
        }
        running_serial += 1;
        let bad = |msg: String| Error::Parse { line: lineno, msg };

        let res_name = field(line, 17, 20).trim().to_string();
        if WATER.contains(&res_name.as_str()) || NUCLEIC.contains(&res_name.as_str()) {
            continue;
        }
        let raw_name = field(line, 12, 16);
        let name = raw_name.trim().to_string();
        let element = resolve_element(&field(line, 76, 78), &raw_name)?;
        if element.is_hydrogen() {
            continue;
        }
        if !table.contains(element) {
            return Err(Error::UnknownElement(element.to_string()));
        }

        let coord = |lo: usize, hi: usize, axis: &str| -> Result<f64> {
            let s = field(line, lo, hi);
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| bad(format!("malformed {axis} coordinate `{}`", s.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("non-finite {axis} coordinate")))
            }
        };
        let position = [coord(30, 38, "x")?, coord(38, 46, "y")?, coord(46, 54, "z")?];

        let occ_field = field(line, 54, 60);
        let occupancy = match occ_field.trim() {
            "" => 1.0,
            s => s
                .parse::<f64>()
                .map_err(|_| bad(format!("malformed occupancy `{s}`")))?,
        };
        let seq_field = field(line, 22, 26);
        let seq_num: i32 = seq_field
            .trim()
            .parse()
            .map_err(|_| bad(format!("malformed residue number `{}`", seq_field.trim())))?;
        let serial = field(line, 6, 11).trim().parse().unwrap_or(running_serial);
        let alt_loc = char_at(line, 16);
        let chain_id = char_at(line, 21).unwrap_or(' ');
        let insertion_code = char_at(line, 26);
        any_atom = true;

        let atom = Atom {
            serial,
            name: name.clone(),
            element,
            position,
            alt_loc,
            occupancy,
        };

        let key = (chain_id, seq_num, insertion_code);
        let slot = *index.entry(key).or_insert_with(|| {
            residues.push(Pending {
                residue: Residue {
                    chain_id,
                    seq_num,
                    insertion_code,
                    res_name: res_name.clone(),
                    atoms: Vec::new(),
                },
                by_name: HashMap::new(),
            });
            residues.len() - 1
        });
        let pending = &mut residues[slot];
        match pending.by_name.get(&name) {
            Some(&i) => {
                let kept = &pending.residue.atoms[i];
                if prefer_alt(&atom, kept) {
                    pending.residue.atoms[i] = atom;
                }
            }
            None => {
                pending.by_name.insert(name, pending.residue.atoms.len());
                pending.residue.atoms.push(atom);
            }
        }
    }

    let residues: Vec<Residue> = residues
        .into_iter()
        .map(|p| p.residue)
        .filter(|r| !r.atoms.is_empty())
        .collect();
    if !any_atom || residues.is_empty() {
        return Err(Error::EmptyStructure);
    }
    Ok(ProteinStructure {
        residues,
        source_id: String::new(),
    })
}

/// Highest occupancy wins; ties go to the lower altLoc character (blank first).
fn prefer_alt(candidate: &Atom, kept: &Atom) -> bool {
    if candidate.occupancy != kept.occupancy {
        return candidate.occupancy > kept.occupancy;
    }
    candidate.alt_loc.unwrap_or(' ') < kept.alt_loc.unwrap_or(' ')
}

fn resolve_element(column: &str, raw_name: &str) -> Result<Element> {
    let column = column.trim();
    if !column.is_empty() {
        return column.parse();
    }
    let name = raw_name.trim();
    if name.len() >= 2 && name[..2].eq_ignore_ascii_case("SE") {
        return Ok(Element::SE);
    }
    name.chars()
        .find(|c| c.is_ascii_alphabetic())
        .ok_or_else(|| Error::UnknownElement(name.to_string()))
        .and_then(|c| c.to_string().parse())
}

/// Columns `lo..hi` (0-based, half-open); short lines yield what is present.
fn field(line: &[u8], lo: usize, hi: usize) -> String {
    if lo >= line.len() {
        return String::new();
    }
    String::from_utf8_lossy(&line[lo..hi.min(line.len())]).into_owned()
}

fn char_at(line: &[u8], col: usize) -> Option<char> {
    line.get(col)
        .map(|&b| b as char)
        .filter(|c| !c.is_ascii_whitespace())
}

/// Writes ATOM records in the fixed-column layout `parse_pdb` reads.
pub fn write_pdb(structure: &ProteinStructure) -> String {
    let mut out = String::new();
    let mut serial = 0;
    for res in &structure.residues {
        for atom in &res.atoms {
            serial += 1;
            let name = if atom.name.len() < 4 && atom.element.as_str().len() == 1 {
                format!(" {:<3}", atom.name)
            } else {
                format!("{:<4}", atom.name)
            };
            let _ = writeln!(
                out,
                "ATOM  {:>5} {}{}{:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
                serial % 100_000,
                name,
                atom.alt_loc.unwrap_or(' '),
                res.res_name,
                res.chain_id,
                res.seq_num,
                res.insertion_code.unwrap_or(' '),
                atom.position[0],
                atom.position[1],
                atom.position[2],
                atom.occupancy,
                0.0,
                atom.element.as_str().to_ascii_uppercase(),
            );
        }
    }
    out.push_str("END\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::too_many_arguments)]
    fn atom_line(serial: u32, name: &str, alt: char, res: &str, chain: char, seq: i32, xyz: [f64; 3], occ: f64, el: &str) -> String {
        let name = if name.len() < 4 { format!(" {name:<3}") } else { name.to_string() };
        format!(
            "ATOM  {serial:>5} {name}{alt}{res:>3} {chain}{seq:>4}    {:>8.3}{:>8.3}{:>8.3}{occ:>6.2}{:>6.2}          {el:>2}\n",
            xyz[0], xyz[1], xyz[2], 0.0
        )
    }

    #[test]
    fn minimal_record() {
        let text = atom_line(1, "N", ' ', "ALA", 'A', 1, [0.0; 3], 1.0, "N");
        let s = parse_pdb(text.as_bytes()).unwrap();
        assert_eq!(s.residues.len(), 1);
        assert_eq!(s.atom_count(), 1);
        let a = &s.residues[0].atoms[0];
        assert_eq!(a.position, [0.0, 0.0, 0.0]);
        assert_eq!(a.element, Element::N);
        assert_eq!(a.name, "N");
    }

    #[test]
    fn column_layout_is_exact() {
        let line = "ATOM     17  CA BSER B -12A     11.104   6.134  -6.504  0.40 12.00           C\n";
        let s = parse_pdb(line.as_bytes()).unwrap();
        let r = &s.residues[0];
        assert_eq!((r.chain_id, r.seq_num, r.insertion_code), ('B', -12, Some('A')));
        assert_eq!(r.res_name, "SER");
        let a = &r.atoms[0];
        assert_eq!(a.serial, 17);
        assert_eq!(a.alt_loc, Some('B'));
        assert_eq!(a.position, [11.104, 6.134, -6.504]);
        assert_eq!(a.occupancy, 0.40);
    }

    #[test]
    fn altloc_keeps_highest_occupancy() {
        let mut text = atom_line(1, "CA", 'A', "SER", 'A', 1, [1.0, 0.0, 0.0], 0.6, "C");
        text += &atom_line(2, "CA", 'B', "SER", 'A', 1, [2.0, 0.0, 0.0], 0.4, "C");
        let s = parse_pdb(text.as_bytes()).unwrap();
        assert_eq!(s.atom_count(), 1);
        assert_eq!(s.residues[0].atoms[0].occupancy, 0.6);
        assert_eq!(s.residues[0].atoms[0].position[0], 1.0);

        // Reversed order, same winner.
        let mut text = atom_line(2, "CA", 'B', "SER", 'A', 1, [2.0, 0.0, 0.0], 0.4, "C");
        text += &atom_line(1, "CA", 'A', "SER", 'A', 1, [1.0, 0.0, 0.0], 0.6, "C");
        let s = parse_pdb(text.as_bytes()).unwrap();
        assert_eq!(s.residues[0].atoms[0].alt_loc, Some('A'));
    }

    #[test]
    fn altloc_tie_goes_to_lower_character() {
        let mut text = atom_line(1, "CA", 'B', "SER", 'A', 1, [2.0, 0.0, 0.0], 0.5, "C");
        text += &atom_line(2, "CA", 'A', "SER", 'A', 1, [1.0, 0.0, 0.0], 0.5, "C");
        let s = parse_pdb(text.as_bytes()).unwrap();
        assert_eq!(s.residues[0].atoms[0].alt_loc, Some('A'));
    }

    #[test]
    fn skips_hetatm_water_hydrogens_and_later_models() {
        let mut text = String::from("HEADER    TEST\nMODEL        1\n");
        text += &atom_line(1, "N", ' ', "GLY", 'A', 1, [0.0; 3], 1.0, "N");
        text += &atom_line(2, "H", ' ', "GLY", 'A', 1, [1.0, 0.0, 0.0], 1.0, "H");
        text += "HETATM    3  O   HOH A 101       5.000   5.000   5.000  1.00  0.00           O\n";
        text += &atom_line(4, "O", ' ', "HOH", 'A', 102, [6.0; 3], 1.0, "O");
        text += &atom_line(5, "P", ' ', "DA", 'B', 1, [7.0; 3], 1.0, "P");
        text += "ENDMDL\nMODEL        2\n";
        text += &atom_line(1, "N", ' ', "GLY", 'A', 1, [9.0; 3], 1.0, "N");
        let s = parse_pdb(text.as_bytes()).unwrap();
        assert_eq!(s.atom_count(), 1);
        assert_eq!(s.residues[0].atoms[0].position, [0.0; 3]);
    }

    #[test]
    fn element_inference_from_name() {
        let mut text = String::new();
        text += "ATOM      1  CA  ALA A   1       0.000   0.000   0.000  1.00  0.00\n";
        text += "ATOM      2 SE   MSE A   2       1.000   0.000   0.000  1.00  0.00\n";
        text += "ATOM      3 1HB  ALA A   1       2.000   0.000   0.000  1.00  0.00\n";
        let s = parse_pdb(text.as_bytes()).unwrap();
        assert_eq!(s.atom_count(), 2);
        assert_eq!(s.residues[0].atoms[0].element, Element::C);
        assert_eq!(s.residues[1].atoms[0].element, Element::SE);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_pdb(b""), Err(Error::EmptyStructure)));
        assert!(matches!(parse_pdb(b"HETATM    1  O   HOH A   1       0.000   0.000   0.000\n"), Err(Error::EmptyStructure)));
        let text = "REMARK\nATOM      1  CA  ALA A   1       0.0x0   0.000   0.000  1.00  0.00           C\n";
        match parse_pdb(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "ATOM      1  123 ALA A   1       0.000   0.000   0.000  1.00  0.00\n";
        assert!(matches!(parse_pdb(text.as_bytes()), Err(Error::UnknownElement(_))));
        let text = "ATOM      1 FE   ALA A   1       0.000   0.000   0.000  1.00  0.00          FE\n";
        assert!(matches!(parse_pdb(text.as_bytes()), Err(Error::UnknownElement(_))));
    }

    #[test]
    fn file_order_not_numeric_order() {
        let mut text = atom_line(1, "N", ' ', "GLY", 'A', 5, [0.0; 3], 1.0, "N");
        text += &atom_line(2, "N", ' ', "GLY", 'A', -3, [1.0; 3], 1.0, "N");
        text += &atom_line(3, "N", ' ', "GLY", 'B', 1, [2.0; 3], 1.0, "N");
        let s = parse_pdb(text.as_bytes()).unwrap();
        let seqs: Vec<i32> = s.residues.iter().map(|r| r.seq_num).collect();
        assert_eq!(seqs, vec![5, -3, 1]);
        assert_eq!(s.chain_ordinals(), vec![0, 0, 1]);
        assert_eq!(s.previous_in_chain(), vec![None, Some(0), None]);
        assert_eq!(s.residue_offsets(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn writer_round_trips() {
        let mut text = atom_line(1, "N", ' ', "ALA", 'A', 1, [1.5, -2.25, 3.125], 1.0, "N");
        text += &atom_line(2, "CA", ' ', "ALA", 'A', 1, [2.0, -2.0, 3.0], 1.0, "C");
        text += &atom_line(3, "SG", ' ', "CYS", 'A', 2, [4.0, 0.0, 0.0], 1.0, "S");
        let s = parse_pdb(text.as_bytes()).unwrap();
        let again = parse_pdb(write_pdb(&s).as_bytes()).unwrap();
        assert_eq!(s, again);
    }
}
