//! Hierarchy files: the level-0 graph block followed by one pool block and one graph block per
//! coarser level.
//!
//! ```text
//! graph block (level 0)
//! repeat:
//!   "IECP" | version u16 | rows u32 | cols u32 | assignment rows*u32 | crc32
//!   graph block (level k + 1)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::multigraph::format::{read_graph, write_graph, ByteReader, ByteWriter};

use super::{GraphHierarchy, PoolingMatrix};

pub const POOL_MAGIC: &[u8; 4] = b"IECP";
pub const POOL_VERSION: u16 = 1;

pub fn serialize_hierarchy(h: &GraphHierarchy) -> Vec<u8> {
    let mut w = ByteWriter::default();
    write_graph(&mut w, &h.levels[0]);
    for (pool, level) in h.pools.iter().zip(&h.levels[1..]) {
        let start = w.buf.len();
        w.bytes(POOL_MAGIC);
        w.u16(POOL_VERSION);
        w.u32(pool.row_count() as u32);
        w.u32(pool.cluster_count() as u32);
        pool.assignment.iter().for_each(|&c| w.u32(c));
        w.crc_from(start);
        write_graph(&mut w, level);
    }
    w.buf
}

pub fn deserialize_hierarchy(bytes: &[u8]) -> Result<GraphHierarchy> {
    let mut r = ByteReader::new(bytes);
    let mut levels = vec![read_graph(&mut r)?];
    let mut pools = Vec::new();
    while r.remaining() > 0 {
        let start = r.pos;
        r.magic(POOL_MAGIC)?;
        let version = r.u16()?;
        if version != POOL_VERSION {
            return Err(Error::format(format!("unsupported pool version {version}")));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        r.reserve(rows, 4)?;
        let assignment = (0..rows).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        r.check_crc(start)?;
        pools.push(PoolingMatrix::new(assignment, cols).map_err(|e| Error::format(e.to_string()))?);
        levels.push(read_graph(&mut r)?);
    }
    let h = GraphHierarchy { levels, pools };
    h.validate()?;
    Ok(h)
}

pub fn write_hierarchy_file(path: &Path, h: &GraphHierarchy) -> Result<()> {
    std::fs::write(path, serialize_hierarchy(h))?;
    Ok(())
}

pub fn read_hierarchy_file(path: &Path) -> Result<GraphHierarchy> {
    deserialize_hierarchy(&std::fs::read(path)?)
}
