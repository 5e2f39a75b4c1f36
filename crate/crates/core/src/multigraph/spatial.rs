//! Uniform hash grid for radius queries.

use std::collections::HashMap;

use crate::geometry::{dist2, Vec3};

type Cell = (i64, i64, i64);

/// Buckets point indices into cubic cells of a fixed edge length.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    cell: f64,
    buckets: HashMap<Cell, Vec<u32>>,
}

impl SpatialGrid {
    pub fn new(points: &[Vec3], cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut buckets: HashMap<Cell, Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(cell_of(*p, cell)).or_default().push(i as u32);
        }
        SpatialGrid { cell, buckets }
    }

    /// Indices of `points` within `radius` (closed ball) of `center`, ascending.
    /// `points` must be the slice the grid was built from.
    pub fn query(&self, points: &[Vec3], center: Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_into(points, center, radius, &mut out);
        out
    }

    pub fn query_into(&self, points: &[Vec3], center: Vec3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let r2 = radius * radius;
        let reach = (radius / self.cell).ceil() as i64;
        let (cx, cy, cz) = cell_of(center, self.cell);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(bucket) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(
                            bucket
                                .iter()
                                .map(|&i| i as usize)
                                .filter(|&i| dist2(points[i], center) <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

fn cell_of(p: Vec3, cell: f64) -> Cell {
    (
        (p[0] / cell).floor() as i64,
        (p[1] / cell).floor() as i64,
        (p[2] / cell).floor() as i64,
    )
}

/// All indices within `radius` of `center` (closed ball), in ascending order.
pub fn ball_query(positions: &[Vec3], center: Vec3, radius: f64) -> Vec<usize> {
    assert!(radius > 0.0, "radius must be positive");
    SpatialGrid::new(positions, radius).query(positions, center, radius)
}
