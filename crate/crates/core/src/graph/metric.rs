use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use super::family::GraphFamily;
use super::vertex::VertexId;
use crate::error::Result;

/// Outcome of a budgeted distance query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distance {
    Exact(usize),
    /// `y` is farther than the budget from `x`.
    BudgetExceeded,
}

impl GraphFamily {
    /// Vertices at graph distance at most `r` from `x`, in BFS order.
    pub fn ball(&self, x: &VertexId, r: usize) -> Result<Vec<VertexId>> {
        Ok(self.ball_with_distances(x, r)?.into_iter().map(|(v, _)| v).collect())
    }

    /// Ball together with each member's distance from `x`, in BFS order.
    pub fn ball_with_distances(&self, x: &VertexId, r: usize) -> Result<Vec<(VertexId, usize)>> {
        self.check_vertex(x)?;
        let mut dist: FxHashMap<VertexId, usize> = FxHashMap::default();
        dist.insert(*x, 0);
        let mut order = vec![(*x, 0)];
        let mut queue = VecDeque::from([*x]);
        let mut buf = Vec::new();
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            if dv == r {
                continue;
            }
            self.neighbors_into(&v, &mut buf);
            for w in buf.iter() {
                if !dist.contains_key(w) {
                    dist.insert(*w, dv + 1);
                    order.push((*w, dv + 1));
                    queue.push_back(*w);
                }
            }
        }
        Ok(order)
    }

    /// BFS distance from `x` to `y`, searching no farther than `budget`.
    pub fn graph_distance(&self, x: &VertexId, y: &VertexId, budget: usize) -> Result<Distance> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        if x == y {
            return Ok(Distance::Exact(0));
        }
        let mut dist: FxHashMap<VertexId, usize> = FxHashMap::default();
        dist.insert(*x, 0);
        let mut queue = VecDeque::from([*x]);
        let mut buf = Vec::new();
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            if dv == budget {
                continue;
            }
            self.neighbors_into(&v, &mut buf);
            for w in buf.iter() {
                if !dist.contains_key(w) {
                    if w == y {
                        return Ok(Distance::Exact(dv + 1));
                    }
                    dist.insert(*w, dv + 1);
                    queue.push_back(*w);
                }
            }
        }
        Ok(Distance::BudgetExceeded)
    }
}
