//! Binary graph blocks.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! "IECG" | version u16 | n u32 | t u16
//! positions  n*3 f32
//! features   n*t f32
//! A          count u32, count * (u32, u32)
//! B          count u32, count * (u32, u32)
//! residue_of n u32
//! node_type  n u32
//! r u32 | ca_index r u32 (0xFFFFFFFF = none) | residue_chain r u32
//! crc32 of every preceding byte of the block
//! ```

use crate::error::{Error, Result};

use super::{Adjacency, ProteinGraph};

pub const GRAPH_MAGIC: &[u8; 4] = b"IECG";
pub const GRAPH_VERSION: u16 = 1;
pub const NO_CA: u32 = u32::MAX;

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    /// Appends the CRC of everything written since `start`.
    pub fn crc_from(&mut self, start: usize) {
        let crc = crc32fast::hash(&self.buf[start..]);
        self.u32(crc);
    }
}

pub(crate) struct ByteReader<'a> {
    pub data: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        ByteReader { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.remaining() < k {
            return Err(Error::format(format!("truncated block at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    /// Checks that `count * width` bytes remain before allocating for them.
    pub fn reserve(&self, count: usize, width: usize) -> Result<()> {
        match count.checked_mul(width) {
            Some(k) if k <= self.remaining() => Ok(()),
            _ => Err(Error::format(format!("truncated block at byte {}", self.pos))),
        }
    }
    pub fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4).map_err(|_| Error::format("missing magic"))?;
        if got != magic {
            return Err(Error::format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }
    /// Verifies the CRC over `start..pos` against the next u32.
    pub fn check_crc(&mut self, start: usize) -> Result<()> {
        let computed = crc32fast::hash(&self.data[start..self.pos]);
        let stored = self.u32()?;
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        Ok(())
    }
}

pub fn serialize_graph(graph: &ProteinGraph) -> Vec<u8> {
    let mut w = ByteWriter::default();
    write_graph(&mut w, graph);
    w.buf
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<ProteinGraph> {
    let mut r = ByteReader::new(bytes);
    let g = read_graph(&mut r)?;
    if r.remaining() != 0 {
        return Err(Error::format(format!("{} trailing bytes after graph block", r.remaining())));
    }
    Ok(g)
}

pub(crate) fn write_graph(w: &mut ByteWriter, g: &ProteinGraph) {
    let start = w.buf.len();
    w.bytes(GRAPH_MAGIC);
    w.u16(GRAPH_VERSION);
    w.u32(g.node_count() as u32);
    w.u16(g.feature_dim as u16);
    for p in &g.positions {
        p.iter().for_each(|&v| w.f32(v));
    }
    g.features.iter().for_each(|&v| w.f32(v));
    for adj in [&g.adj_a, &g.adj_b] {
        w.u32(adj.edge_count() as u32);
        for &(a, b) in adj.edges() {
            w.u32(a);
            w.u32(b);
        }
    }
    g.residue_of.iter().for_each(|&v| w.u32(v));
    g.node_type.iter().for_each(|&v| w.u32(v));
    w.u32(g.residue_count() as u32);
    g.ca_index.iter().for_each(|v| w.u32(v.unwrap_or(NO_CA)));
    g.residue_chain.iter().for_each(|&v| w.u32(v));
    w.crc_from(start);
}

pub(crate) fn read_graph(r: &mut ByteReader<'_>) -> Result<ProteinGraph> {
    let start = r.pos;
    r.magic(GRAPH_MAGIC)?;
    let version = r.u16()?;
    if version != GRAPH_VERSION {
        return Err(Error::format(format!("unsupported graph version {version}")));
    }
    let n = r.u32()? as usize;
    let t = r.u16()? as usize;
    r.reserve(n, 12)?;
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push([r.f32()?, r.f32()?, r.f32()?]);
    }
    r.reserve(n, 4 * t)?;
    let features = (0..n * t).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    let mut adj = Vec::with_capacity(2);
    for _ in 0..2 {
        let count = r.u32()? as usize;
        r.reserve(count, 8)?;
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            pairs.push((r.u32()? as usize, r.u32()? as usize));
        }
        adj.push(pairs);
    }
    r.reserve(n, 8)?;
    let residue_of = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let node_type = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let res = r.u32()? as usize;
    r.reserve(res, 8)?;
    let ca_index = (0..res)
        .map(|_| r.u32().map(|v| (v != NO_CA).then_some(v)))
        .collect::<Result<Vec<_>>>()?;
    let residue_chain = (0..res).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    r.check_crc(start)?;

    let b_pairs = adj.pop().unwrap();
    let a_pairs = adj.pop().unwrap();
    let graph = ProteinGraph {
        positions,
        features,
        feature_dim: t,
        adj_a: Adjacency::from_edges(n, a_pairs).map_err(|e| Error::format(e.to_string()))?,
        adj_b: Adjacency::from_edges(n, b_pairs).map_err(|e| Error::format(e.to_string()))?,
        residue_of,
        node_type,
        ca_index,
        residue_chain,
    };
    graph.validate()?;
    Ok(graph)
}
