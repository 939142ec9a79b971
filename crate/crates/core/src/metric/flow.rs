//! Dinic max-flow on integer capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: u32,
    cap: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<u32>>,
    edges: Vec<Edge>,
    level: Vec<i32>,
    cursor: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], edges: Vec::new(), level: Vec::new(), cursor: Vec::new() }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cap: u64) {
        let id = self.edges.len() as u32;
        self.edges.push(Edge { to: v as u32, cap });
        self.edges.push(Edge { to: u as u32, cap: 0 });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.clear();
        self.level.resize(self.adj.len(), -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e as usize];
                if cap > 0 && self.level[to as usize] < 0 {
                    self.level[to as usize] = self.level[u] + 1;
                    q.push_back(to as usize);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: u64) -> u64 {
        if u == t {
            return pushed;
        }
        while self.cursor[u] < self.adj[u].len() {
            let e = self.adj[u][self.cursor[u]] as usize;
            let Edge { to, cap } = self.edges[e];
            let to = to as usize;
            if cap > 0 && self.level[to] == self.level[u] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0 {
                    self.edges[e].cap -= got;
                    self.edges[e ^ 1].cap += got;
                    return got;
                }
            }
            self.cursor[u] += 1;
        }
        0
    }

    /// Saturates `s -> u -> v -> t` paths directly, in edge order.
    fn greedy_paths(&mut self, s: usize, t: usize) -> u64 {
        let mut to_sink = vec![u32::MAX; self.adj.len()];
        for (v, list) in self.adj.iter().enumerate() {
            for &e in list {
                if e % 2 == 0 && self.edges[e as usize].to as usize == t {
                    to_sink[v] = e;
                }
            }
        }
        let mut flow = 0;
        for i in 0..self.adj[s].len() {
            let se = self.adj[s][i] as usize;
            if se % 2 == 1 {
                continue;
            }
            let u = self.edges[se].to as usize;
            for j in 0..self.adj[u].len() {
                let ue = self.adj[u][j] as usize;
                let v = self.edges[ue].to as usize;
                let te = to_sink[v];
                if ue % 2 == 1 || te == u32::MAX {
                    continue;
                }
                let te = te as usize;
                let push = self.edges[se].cap.min(self.edges[ue].cap).min(self.edges[te].cap);
                if push == 0 {
                    continue;
                }
                for e in [se, ue, te] {
                    self.edges[e].cap -= push;
                    self.edges[e ^ 1].cap += push;
                }
                flow += push;
                if self.edges[se].cap == 0 {
                    break;
                }
            }
        }
        flow
    }

    /// Maximum s-t flow. Consumes the capacities.
    #[cfg(test)]
    pub fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        self.max_flow_until(s, t, |_| false)
    }

    /// Like [`FlowNetwork::max_flow`] but may return early with any flow value for
    /// which `enough` holds.
    pub fn max_flow_until(&mut self, s: usize, t: usize, enough: impl Fn(u64) -> bool) -> u64 {
        let mut flow = self.greedy_paths(s, t);
        if enough(flow) {
            return flow;
        }
        while self.bfs(s, t) {
            self.cursor.clear();
            self.cursor.resize(self.adj.len(), 0);
            loop {
                let f = self.dfs(s, t, u64::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
                if enough(flow) {
                    return flow;
                }
            }
        }
        flow
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        let mut g = FlowNetwork::new(6);
        for (u, v, c) in [(0, 1, 10), (0, 2, 10), (1, 3, 4), (1, 4, 8), (2, 4, 9), (3, 5, 10), (4, 3, 6), (4, 5, 10)] {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 19);
    }

    #[test]
    fn disconnected_is_zero() {
        let mut g = FlowNetwork::new(4);
        g.add_edge(0, 1, 10);
        g.add_edge(2, 3, 5);
        assert_eq!(g.max_flow(0, 3), 0);
    }

    #[test]
    fn alternating_path_needs_reverse_edge() {
        // left {a, b}, right {x, y}; a-x, a-y, b-x. Greedy a-x blocks b.
        let (s, a, b, x, y, t) = (0, 1, 2, 3, 4, 5);
        let mut g = FlowNetwork::new(6);
        g.add_edge(s, a, 1);
        g.add_edge(s, b, 1);
        g.add_edge(a, x, 1);
        g.add_edge(a, y, 1);
        g.add_edge(b, x, 1);
        g.add_edge(x, t, 1);
        g.add_edge(y, t, 1);
        assert_eq!(g.max_flow(s, t), 2);
    }
}
