//! Dinic's max-flow on a residual graph with `f64` capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
struct Arc {
    to: usize,
    cap: f64,
    flow: f64,
}

/// Directed graph with nonnegative capacities. Arcs are stored in pairs
/// `(2i, 2i + 1)`, the second being the reverse of the first.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    source: usize,
    sink: usize,
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxFlow {
    pub value: f64,
    /// `true` for nodes reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(nodes: usize, source: usize, sink: usize) -> Self {
        assert!(source < nodes && sink < nodes, "terminal out of range");
        assert_ne!(source, sink, "source and sink must differ");
        FlowNetwork {
            source,
            sink,
            arcs: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Adds `u -> v` with capacity `cap` and `v -> u` with `rev_cap`; returns the arc id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) -> usize {
        assert!(cap >= 0.0 && rev_cap >= 0.0, "capacities must be nonnegative");
        let id = self.arcs.len();
        self.arcs.push(Arc { to: v, cap, flow: 0.0 });
        self.arcs.push(Arc { to: u, cap: rev_cap, flow: 0.0 });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// `(from, to, capacity, flow)` for every stored arc.
    pub fn arcs(&self) -> Vec<(usize, usize, f64, f64)> {
        self.arcs
            .iter()
            .enumerate()
            .map(|(i, a)| (self.arcs[i ^ 1].to, a.to, a.cap, a.flow))
            .collect()
    }

    fn residual(&self, id: usize) -> f64 {
        self.arcs[id].cap - self.arcs[id].flow
    }

    fn levels(&self, eps: f64) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[self.source] = 0;
        let mut queue = VecDeque::from([self.source]);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let v = self.arcs[id].to;
                if level[v] == usize::MAX && self.residual(id) > eps {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[self.sink] != usize::MAX).then_some(level)
    }

    fn augment(&mut self, u: usize, limit: f64, level: &[usize], next: &mut [usize], eps: f64) -> f64 {
        if u == self.sink {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let id = self.adj[u][next[u]];
            let v = self.arcs[id].to;
            let r = self.residual(id);
            if r > eps && level[v] == level[u] + 1 {
                let pushed = self.augment(v, limit.min(r), level, next, eps);
                if pushed > 0.0 {
                    self.arcs[id].flow += pushed;
                    self.arcs[id ^ 1].flow -= pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Computes a maximum flow and the source side of a minimum cut.
    pub fn max_flow(&mut self) -> MaxFlow {
        let max_cap = self.arcs.iter().map(|a| a.cap).fold(0.0, f64::max);
        let eps = max_cap * 1e-13;
        let mut value = 0.0;
        while let Some(level) = self.levels(eps) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.augment(self.source, f64::INFINITY, &level, &mut next, eps);
                if pushed <= 0.0 {
                    break;
                }
                value += pushed;
            }
        }
        let mut source_side = vec![false; self.adj.len()];
        source_side[self.source] = true;
        let mut queue = VecDeque::from([self.source]);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let v = self.arcs[id].to;
                if !source_side[v] && self.residual(id) > eps {
                    source_side[v] = true;
                    queue.push_back(v);
                }
            }
        }
        MaxFlow { value, source_side }
    }

    /// Total capacity of arcs leaving the `side` set.
    pub fn cut_capacity(&self, side: &[bool]) -> f64 {
        self.arcs
            .iter()
            .enumerate()
            .filter(|(i, a)| side[self.arcs[i ^ 1].to] && !side[a.to])
            .map(|(_, a)| a.cap)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bottleneck_chain() {
        let mut g = FlowNetwork::new(3, 0, 2);
        g.add_edge(0, 1, 2.0, 0.0);
        g.add_edge(1, 2, 1.0, 0.0);
        let r = g.max_flow();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.source_side, vec![true, true, false]);
    }

    #[test]
    fn parallel_edges_add() {
        let mut g = FlowNetwork::new(2, 0, 1);
        g.add_edge(0, 1, 3.0, 0.0);
        g.add_edge(0, 1, 4.0, 0.0);
        assert_eq!(g.max_flow().value, 7.0);
    }

    #[test]
    fn disconnected_sink_gives_zero() {
        let mut g = FlowNetwork::new(3, 0, 2);
        g.add_edge(0, 1, 5.0, 0.0);
        let r = g.max_flow();
        assert_eq!(r.value, 0.0);
        assert_eq!(g.cut_capacity(&r.source_side), 0.0);
    }

    #[test]
    fn flow_needs_reverse_residuals() {
        // Classic case where a greedy path must be undone.
        let mut g = FlowNetwork::new(4, 0, 3);
        g.add_edge(0, 1, 1.0, 0.0);
        g.add_edge(0, 2, 1.0, 0.0);
        g.add_edge(1, 2, 1.0, 0.0);
        g.add_edge(1, 3, 1.0, 0.0);
        g.add_edge(2, 3, 1.0, 0.0);
        let r = g.max_flow();
        assert_eq!(r.value, 2.0);
        assert_eq!(g.cut_capacity(&r.source_side), 2.0);
    }
}
