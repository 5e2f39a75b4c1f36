//! Per-element physical constants used for bond inference and atom features.
//!
//! Covalent radii follow Cordero et al. (2008), van der Waals radii follow Bondi (1964),
//! masses are IUPAC conventional atomic weights.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Normalized chemical element symbol ("C", "Se", ...).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element([u8; 2]);

impl Element {
    pub const H: Element = Element(*b"H ");
    pub const C: Element = Element(*b"C ");
    pub const N: Element = Element(*b"N ");
    pub const O: Element = Element(*b"O ");
    pub const S: Element = Element(*b"S ");
    pub const SE: Element = Element(*b"Se");
    pub const P: Element = Element(*b"P ");

    pub fn as_str(&self) -> &str {
        let len = if self.0[1] == b' ' { 1 } else { 2 };
        std::str::from_utf8(&self.0[..len]).unwrap_or("?")
    }

    pub fn is_hydrogen(&self) -> bool {
        *self == Element::H || self.0 == *b"D "
    }
}

impl FromStr for Element {
    type Err = Error;

    /// Accepts one- or two-letter symbols in any case, surrounding blanks ignored.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bytes = t.as_bytes();
        match bytes.len() {
            1 if bytes[0].is_ascii_alphabetic() => Ok(Element([bytes[0].to_ascii_uppercase(), b' '])),
            2 if bytes.iter().all(u8::is_ascii_alphabetic) => Ok(Element([
                bytes[0].to_ascii_uppercase(),
                bytes[1].to_ascii_lowercase(),
            ])),
            _ => Err(Error::UnknownElement(t.to_string())),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element({})", self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementProps {
    /// Angstroms.
    pub covalent_radius: f64,
    /// Angstroms.
    pub vdw_radius: f64,
    /// Daltons.
    pub mass: f64,
    /// Row of the learnable atom-type embedding table.
    pub embed_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementTable {
    entries: Vec<(Element, ElementProps)>,
}

const DEFAULT_TABLE: &[(&str, f64, f64, f64)] = &[
    ("H", 0.31, 1.20, 1.008),
    ("C", 0.76, 1.70, 12.011),
    ("N", 0.71, 1.55, 14.007),
    ("O", 0.66, 1.52, 15.999),
    ("S", 1.05, 1.80, 32.06),
    ("Se", 1.20, 1.90, 78.971),
    ("P", 1.07, 1.80, 30.974),
];

impl ElementTable {
    /// The table compiled into the binary.
    pub fn builtin() -> &'static ElementTable {
        static TABLE: OnceLock<ElementTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let rows = DEFAULT_TABLE
                .iter()
                .map(|&(s, c, v, m)| (s.parse().expect("builtin symbol"), c, v, m));
            ElementTable::from_rows(rows).expect("builtin element table")
        })
    }

    /// Parses an override table: one element per line as `symbol covalent_radius vdw_radius mass`.
    /// Blank lines and `#` comments are ignored. Embedding indices follow line order.
    pub fn parse(text: &str) -> Result<ElementTable> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            if fields.len() != 4 {
                return Err(bad("expected `symbol covalent vdw mass`"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let element: Element = fields[0].parse()?;
            rows.push((element, num(fields[1])?, num(fields[2])?, num(fields[3])?));
        }
        ElementTable::from_rows(rows.into_iter())
    }

    fn from_rows(rows: impl Iterator<Item = (Element, f64, f64, f64)>) -> Result<ElementTable> {
        let mut entries: Vec<(Element, ElementProps)> = Vec::new();
        for (element, covalent_radius, vdw_radius, mass) in rows {
            if !(covalent_radius > 0.0 && vdw_radius > 0.0 && mass > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "element {element}: radii and mass must be positive"
                )));
            }
            if entries.iter().any(|(e, _)| *e == element) {
                return Err(Error::InvalidArgument(format!("duplicate element {element}")));
            }
            let embed_index = entries.len();
            entries.push((
                element,
                ElementProps {
                    covalent_radius,
                    vdw_radius,
                    mass,
                    embed_index,
                },
            ));
        }
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty element table".into()));
        }
        Ok(ElementTable { entries })
    }

    pub fn get(&self, element: Element) -> Result<ElementProps> {
        self.entries
            .iter()
            .find(|(e, _)| *e == element)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::UnknownElement(element.to_string()))
    }

    pub fn contains(&self, element: Element) -> bool {
        self.entries.iter().any(|(e, _)| *e == element)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.entries.iter().map(|(e, _)| *e)
    }
}

/// Looks up `symbol` in the builtin table.
pub fn element_properties(symbol: &str) -> Result<ElementProps> {
    let element: Element = symbol.parse()?;
    ElementTable::builtin().get(element)
}

/// Affine standardization of (covalent radius, vdW radius, mass) with constants frozen from
/// the builtin table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaler {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl FeatureScaler {
    pub fn frozen() -> FeatureScaler {
        let table = ElementTable::builtin();
        let rows: Vec<[f64; 3]> = table
            .entries
            .iter()
            .map(|(_, p)| [p.covalent_radius, p.vdw_radius, p.mass])
            .collect();
        let n = rows.len() as f64;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for k in 0..3 {
            mean[k] = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
            std[k] = var.sqrt();
        }
        FeatureScaler { mean, std }
    }

    pub fn apply(&self, props: &ElementProps) -> [f64; 3] {
        let raw = [props.covalent_radius, props.vdw_radius, props.mass];
        std::array::from_fn(|k| (raw[k] - self.mean[k]) / self.std[k])
    }
}
