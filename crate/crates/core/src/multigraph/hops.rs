//! Breadth-first hop counts truncated at a cap.

use std::collections::{BTreeMap, VecDeque};

use super::Adjacency;

/// Shortest hop counts from `source`; nodes farther than `cap` hops are absent.
pub fn hop_distances(adjacency: &Adjacency, source: usize, cap: u32) -> BTreeMap<usize, u32> {
    let mut scratch = HopScratch::new(adjacency.node_count());
    scratch.run(adjacency, source, cap);
    scratch.visited().collect()
}

/// Reusable BFS state; reset cost is proportional to the nodes touched by the last run.
#[derive(Debug, Clone)]
pub struct HopScratch {
    dist: Vec<u32>,
    touched: Vec<usize>,
    queue: VecDeque<usize>,
}

impl HopScratch {
    pub fn new(n: usize) -> Self {
        HopScratch {
            dist: vec![u32::MAX; n],
            touched: Vec::new(),
            queue: VecDeque::new(),
        }
    }

    pub fn run(&mut self, adjacency: &Adjacency, source: usize, cap: u32) {
        for &i in &self.touched {
            self.dist[i] = u32::MAX;
        }
        self.touched.clear();
        if self.dist.len() < adjacency.node_count() {
            self.dist.resize(adjacency.node_count(), u32::MAX);
        }
        self.dist[source] = 0;
        self.touched.push(source);
        self.queue.clear();
        self.queue.push_back(source);
        while let Some(u) = self.queue.pop_front() {
            let d = self.dist[u];
            if d == cap {
                continue;
            }
            for &v in adjacency.neighbors(u) {
                let v = v as usize;
                if self.dist[v] == u32::MAX {
                    self.dist[v] = d + 1;
                    self.touched.push(v);
                    self.queue.push_back(v);
                }
            }
        }
    }

    /// Hop count from the last source, if within the cap.
    pub fn get(&self, i: usize) -> Option<u32> {
        let d = self.dist[i];
        (d != u32::MAX).then_some(d)
    }

    pub fn visited(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.touched.iter().map(|&i| (i, self.dist[i]))
    }
}
