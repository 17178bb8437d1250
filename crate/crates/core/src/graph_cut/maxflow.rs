//! Dinic's blocking-flow max-flow on `f64` capacities.

use std::collections::VecDeque;

/// Residual capacities at or below this are treated as saturated.
pub const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
}

/// Residual network. Arc `2e` is the forward arc of the `e`-th added edge and
/// `2e + 1` its reverse.
#[derive(Debug, Clone)]
pub struct Dinic {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    level: Vec<u32>,
    cursor: Vec<usize>,
}

impl Dinic {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
            level: vec![0; nodes],
            cursor: vec![0; nodes],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> usize {
        debug_assert!(cap >= 0.0);
        let id = self.edges.len();
        self.adj[from].push(id);
        self.edges.push(Edge { to, cap });
        self.adj[to].push(id + 1);
        self.edges.push(Edge { to: from, cap: 0.0 });
        id / 2
    }

    /// Remaining capacity of the `edge`-th added edge.
    pub fn residual(&self, edge: usize) -> f64 {
        self.edges[2 * edge].cap
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        assert_ne!(s, t, "source and sink coincide");
        let mut total = 0.0;
        while self.build_levels(s, t) {
            self.cursor.iter_mut().for_each(|c| *c = 0);
            loop {
                let pushed = self.augment(s, t, f64::INFINITY);
                if pushed <= 0.0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    /// Nodes reachable from `s` through arcs with residual capacity; after
    /// [`Dinic::max_flow`] this is the source side of a minimum cut.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if !seen[v] && self.edges[e].cap > RESIDUAL_EPS {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    fn build_levels(&mut self, s: usize, t: usize) -> bool {
        const UNSEEN: u32 = u32::MAX;
        self.level.iter_mut().for_each(|l| *l = UNSEEN);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if self.level[v] == UNSEEN && self.edges[e].cap > RESIDUAL_EPS {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] != UNSEEN
    }

    fn augment(&mut self, u: usize, t: usize, limit: f64) -> f64 {
        if u == t {
            return limit;
        }
        while self.cursor[u] < self.adj[u].len() {
            let e = self.adj[u][self.cursor[u]];
            let v = self.edges[e].to;
            let cap = self.edges[e].cap;
            if cap > RESIDUAL_EPS && self.level[v] == self.level[u] + 1 {
                let pushed = self.augment(v, t, limit.min(cap));
                if pushed > 0.0 {
                    self.edges[e].cap -= pushed;
                    self.edges[e ^ 1].cap += pushed;
                    return pushed;
                }
            }
            self.cursor[u] += 1;
        }
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let mut d = Dinic::new(2);
        d.add_edge(0, 1, 5.0);
        assert_eq!(d.max_flow(0, 1), 5.0);
        assert_eq!(d.source_side(0), vec![true, false]);
    }

    #[test]
    fn diamond() {
        let mut d = Dinic::new(4);
        let (s, a, b, t) = (0, 1, 2, 3);
        d.add_edge(s, a, 3.0);
        d.add_edge(s, b, 2.0);
        d.add_edge(a, t, 2.0);
        d.add_edge(b, t, 3.0);
        assert_eq!(d.max_flow(s, t), 4.0);
    }

    #[test]
    fn residual_after_flow() {
        let mut d = Dinic::new(3);
        d.add_edge(0, 1, 10.0);
        let mid = d.add_edge(1, 2, 15.0);
        d.add_edge(0, 2, 20.0);
        assert_eq!(d.max_flow(0, 2), 30.0);
        assert_eq!(d.residual(mid), 5.0);
        assert_eq!(d.source_side(0), vec![true, false, false]);
    }
}
