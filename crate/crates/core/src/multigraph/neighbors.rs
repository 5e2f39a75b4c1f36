//! Per-center neighborhoods with normalized extrinsic and intrinsic distances.

use rayon::prelude::*;

use super::hops::HopScratch;
use super::spatial::SpatialGrid;
use super::Adjacency;
use crate::error::{Error, Result};
use crate::geometry::{dist, Vec3};

/// Normalized (extrinsic, covalent-hop, hydrogen-hop) distances, each clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelInput {
    pub de_norm: f64,
    pub di1_norm: f64,
    pub di2_norm: f64,
}

/// How the receptive field of a center is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeighborhoodVariant {
    /// Ball of radius m_e.
    Euclidean,
    /// Nodes within m_1 hops on A.
    CovHops,
    /// Nodes within m_2 hops on B.
    HydHops,
}

/// CSR layout: the neighbors of center `c` are `offsets[c]..offsets[c + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<u32>,
    pub inputs: Vec<KernelInput>,
    /// (neighbor - center) / m_e per entry, used by the coordinate-offset kernel variant.
    pub offsets_xyz: Vec<[f64; 3]>,
    pub radius: f64,
    pub cap1: u32,
    pub cap2: u32,
}

impl NeighborTable {
    pub fn center_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors_of(&self, c: usize) -> impl Iterator<Item = (usize, KernelInput)> + '_ {
        (self.offsets[c]..self.offsets[c + 1]).map(move |e| (self.neighbors[e] as usize, self.inputs[e]))
    }

    /// Center index of every entry.
    pub fn centers(&self) -> Vec<u32> {
        (0..self.center_count())
            .flat_map(|c| std::iter::repeat_n(c as u32, self.offsets[c + 1] - self.offsets[c]))
            .collect()
    }

    /// Concatenates tables of disjoint graphs, shifting node indices.
    pub fn disjoint_union(tables: &[&NeighborTable]) -> NeighborTable {
        let first = tables.first();
        let mut out = NeighborTable {
            offsets: vec![0],
            neighbors: Vec::new(),
            inputs: Vec::new(),
            offsets_xyz: Vec::new(),
            radius: first.map_or(0.0, |t| t.radius),
            cap1: first.map_or(0, |t| t.cap1),
            cap2: first.map_or(0, |t| t.cap2),
        };
        let mut shift = 0u32;
        for t in tables {
            let base = out.neighbors.len();
            out.neighbors.extend(t.neighbors.iter().map(|&i| i + shift));
            out.inputs.extend_from_slice(&t.inputs);
            out.offsets_xyz.extend_from_slice(&t.offsets_xyz);
            out.offsets.extend(t.offsets[1..].iter().map(|&o| o + base));
            shift += t.center_count() as u32;
        }
        out
    }
}

pub fn build_neighbor_table(
    positions: &[Vec3],
    adj_a: &Adjacency,
    adj_b: &Adjacency,
    radius: f64,
    cap1: u32,
    cap2: u32,
    variant: NeighborhoodVariant,
) -> Result<NeighborTable> {
    if radius.is_nan() || radius <= 0.0 || cap1 < 1 || cap2 < 1 {
        return Err(Error::InvalidArgument(format!(
            "neighbor table needs m_e > 0 and caps >= 1 (got {radius}, {cap1}, {cap2})"
        )));
    }
    let n = positions.len();
    if adj_a.node_count() != n || adj_b.node_count() != n {
        return Err(Error::shape("build_neighbor_table", "adjacency size differs from position count"));
    }
    let grid = match variant {
        NeighborhoodVariant::Euclidean => Some(SpatialGrid::new(positions, radius)),
        _ => None,
    };

    type Row = Vec<(u32, KernelInput, [f64; 3])>;
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map_init(
            || (HopScratch::new(n), HopScratch::new(n), Vec::new()),
            |(s1, s2, ball), c| {
                s1.run(adj_a, c, cap1);
                s2.run(adj_b, c, cap2);
                match variant {
                    NeighborhoodVariant::Euclidean => {
                        grid.as_ref().unwrap().query_into(positions, positions[c], radius, ball)
                    }
                    NeighborhoodVariant::CovHops => {
                        ball.clear();
                        ball.extend(s1.visited().map(|(i, _)| i));
                        ball.sort_unstable();
                    }
                    NeighborhoodVariant::HydHops => {
                        ball.clear();
                        ball.extend(s2.visited().map(|(i, _)| i));
                        ball.sort_unstable();
                    }
                }
                ball.iter()
                    .map(|&i| {
                        let d = dist(positions[c], positions[i]);
                        let h1 = s1.get(i).unwrap_or(cap1).min(cap1);
                        let h2 = s2.get(i).unwrap_or(cap2).min(cap2);
                        let input = KernelInput {
                            de_norm: (d / radius).clamp(0.0, 1.0),
                            di1_norm: f64::from(h1) / f64::from(cap1),
                            di2_norm: f64::from(h2) / f64::from(cap2),
                        };
                        let off = std::array::from_fn(|k| ((positions[i][k] - positions[c][k]) / radius).clamp(-1.0, 1.0));
                        (i as u32, input, off)
                    })
                    .collect()
            },
        )
        .collect();

    let mut table = NeighborTable {
        offsets: Vec::with_capacity(n + 1),
        neighbors: Vec::new(),
        inputs: Vec::new(),
        offsets_xyz: Vec::new(),
        radius,
        cap1,
        cap2,
    };
    table.offsets.push(0);
    for row in rows {
        for (i, input, off) in row {
            table.neighbors.push(i);
            table.inputs.push(input);
            table.offsets_xyz.push(off);
        }
        table.offsets.push(table.neighbors.len());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonded_pair() {
        let pos = [[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]];
        let a = Adjacency::from_edges(2, [(0, 1)]).unwrap();
        let t = build_neighbor_table(&pos, &a, &a, 3.0, 6, 6, NeighborhoodVariant::Euclidean).unwrap();
        let row: Vec<_> = t.neighbors_of(0).collect();
        assert_eq!(row.len(), 2);
        assert_eq!(row[0], (0, KernelInput::default()));
        let k = row[1].1;
        assert_eq!(row[1].0, 1);
        assert!((k.de_norm - 0.5).abs() < 1e-12);
        assert!((k.di1_norm - 1.0 / 6.0).abs() < 1e-12);
        assert!((k.di2_norm - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_neighbor_saturates() {
        let pos = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let a = Adjacency::empty(2);
        let t = build_neighbor_table(&pos, &a, &a, 3.0, 6, 6, NeighborhoodVariant::Euclidean).unwrap();
        let (_, k) = t.neighbors_of(0).nth(1).unwrap();
        assert!((k.de_norm - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!((k.di1_norm, k.di2_norm), (1.0, 1.0));
    }

    #[test]
    fn hop_neighborhoods_ignore_positions() {
        let a = Adjacency::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let p1 = [[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let p2 = [[0.0; 3], [9.0, 0.0, 0.0], [2.0, 5.0, 0.0], [30.0, 0.0, 0.0]];
        let t1 = build_neighbor_table(&p1, &a, &a, 3.0, 2, 2, NeighborhoodVariant::CovHops).unwrap();
        let t2 = build_neighbor_table(&p2, &a, &a, 3.0, 2, 2, NeighborhoodVariant::CovHops).unwrap();
        assert_eq!(t1.neighbors, t2.neighbors);
        assert_eq!(t1.neighbors_of(0).map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let a = Adjacency::empty(1);
        assert!(build_neighbor_table(&[[0.0; 3]], &a, &a, 0.0, 6, 6, NeighborhoodVariant::Euclidean).is_err());
        assert!(build_neighbor_table(&[[0.0; 3]], &a, &a, 1.0, 0, 6, NeighborhoodVariant::Euclidean).is_err());
    }

    #[test]
    fn disjoint_union_shifts_indices() {
        let a = Adjacency::from_edges(2, [(0, 1)]).unwrap();
        let pos = [[0.0; 3], [1.0, 0.0, 0.0]];
        let t = build_neighbor_table(&pos, &a, &a, 3.0, 6, 6, NeighborhoodVariant::Euclidean).unwrap();
        let u = NeighborTable::disjoint_union(&[&t, &t]);
        assert_eq!(u.center_count(), 4);
        assert_eq!(u.neighbors, vec![0, 1, 0, 1, 2, 3, 2, 3]);
        assert_eq!(u.centers(), vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }
}
