//! Unnormalized spectral clustering: Laplacian eigenvectors followed by seeded k-means.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::multigraph::Adjacency;

pub const KMEANS_SEED: u64 = 0;
pub const KMEANS_MAX_ITER: usize = 100;
/// Seeded k-means++ restarts; the lowest-inertia run wins (earliest on ties).
pub const KMEANS_RESTARTS: usize = 10;

/// Rows of the `num_clusters` eigenvectors of L = deg - adj with the smallest eigenvalues.
pub fn spectral_embedding(adjacency: &Adjacency, num_clusters: usize) -> Vec<Vec<f64>> {
    let n = adjacency.node_count();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in adjacency.edges() {
        let (a, b) = (a as usize, b as usize);
        lap[(a, b)] -= 1.0;
        lap[(b, a)] -= 1.0;
        lap[(a, a)] += 1.0;
        lap[(b, b)] += 1.0;
    }
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let mut rows = vec![vec![0.0; num_clusters]; n];
    for (k, &col) in order.iter().take(num_clusters).enumerate() {
        let v = eig.eigenvectors.column(col);
        // Orient so the largest-magnitude entry is positive.
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            rows[i][k] = sign * v[i];
        }
    }
    rows
}

/// Clusters a connected graph into exactly `num_clusters` groups. Labels are renumbered in
/// order of first appearance, so node 0 is always in cluster 0.
pub fn spectral_cluster(adjacency: &Adjacency, num_clusters: usize) -> Result<Vec<usize>> {
    let n = adjacency.node_count();
    if num_clusters < 1 || num_clusters > n {
        return Err(Error::InvalidArgument(format!(
            "cannot make {num_clusters} clusters from {n} nodes"
        )));
    }
    let components = adjacency.components();
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    if num_clusters == 1 {
        return Ok(vec![0; n]);
    }
    let rows = spectral_embedding(adjacency, num_clusters);
    let labels = kmeans(&rows, num_clusters, KMEANS_SEED);
    Ok(relabel(&labels))
}

pub fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances of points to their cluster means.
pub fn kmeans_objective(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let centers = means(points, labels, k);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum()
}

fn means(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Deterministic k-means (k-means++ seeding, Lloyd iterations, empty clusters repaired by
/// moving the farthest member of the largest cluster). Requires `k <= points.len()`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let labels = lloyd(points, k, &mut rng);
        let cost = kmeans_objective(points, &labels, k);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[pick]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut centers = plus_plus_init(points, k, rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..KMEANS_MAX_ITER {
        repair_empty(points, &mut labels, &mut centers, k);
        centers = means(points, &labels, k);
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    repair_empty(points, &mut labels, &mut centers, k);
    labels
}

fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], centers: &mut [Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let largest = (0..k).fold(0, |b, j| if counts[j] > counts[b] { j } else { b });
        let center = means(points, labels, k).swap_remove(largest);
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if labels[i] == largest {
                let d = sq_dist(p, &center);
                if d > far_d {
                    far = Some(i);
                    far_d = d;
                }
            }
        }
        let i = far.expect("largest cluster is nonempty");
        labels[i] = empty;
        centers[empty] = points[i].clone();
    }
}
