//! Dinic max-flow on integer capacities.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowStats {
    pub phases: u32,
    pub augmentations: u64,
}

pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    level: Vec<u32>,
    iter: Vec<usize>,
    stats: FlowStats,
}

const UNREACHED: u32 = u32::MAX;

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![UNREACHED; n],
            iter: vec![0; n],
            stats: FlowStats::default(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds the arc pair `u → v` (capacity `forward`) and `v → u` (capacity `backward`).
    pub fn add_edge(&mut self, u: usize, v: usize, forward: i64, backward: i64) {
        debug_assert!(forward >= 0 && backward >= 0);
        let e = self.to.len();
        self.to.push(v);
        self.cap.push(forward);
        self.to.push(u);
        self.cap.push(backward);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
    }

    pub fn stats(&self) -> FlowStats {
        self.stats
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = UNREACHED);
        let mut queue = std::collections::VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && self.level[v] == UNREACHED {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] != UNREACHED
    }

    /// Blocking flow on the current level graph, with an explicit path stack.
    fn blocking_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0i64;
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let bottleneck = path.iter().map(|&e| self.cap[e]).min().unwrap_or(0);
                let mut first_saturated = path.len();
                for (i, &e) in path.iter().enumerate() {
                    self.cap[e] -= bottleneck;
                    self.cap[e ^ 1] += bottleneck;
                    if self.cap[e] == 0 && first_saturated == path.len() {
                        first_saturated = i;
                    }
                }
                total += bottleneck;
                self.stats.augmentations += 1;
                path.truncate(first_saturated);
                u = match path.last() {
                    Some(&e) => self.to[e],
                    None => s,
                };
                continue;
            }
            let mut advanced = false;
            while self.iter[u] < self.adj[u].len() {
                let e = self.adj[u][self.iter[u]];
                let v = self.to[e];
                if self.cap[e] > 0 && self.level[v] == self.level[u] + 1 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                self.iter[u] += 1;
            }
            if advanced {
                continue;
            }
            // Dead end: remove `u` from the level graph and retreat.
            self.level[u] = UNREACHED;
            match path.pop() {
                None => break,
                Some(e) => {
                    u = self.to[e ^ 1];
                    self.iter[u] += 1;
                }
            }
        }
        total
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut flow = 0i64;
        while self.bfs(s, t) {
            self.stats.phases += 1;
            self.iter.iter_mut().for_each(|i| *i = 0);
            flow += self.blocking_flow(s, t);
        }
        flow
    }

    /// Nodes reachable from `s` in the residual graph (the source-side-minimal cut).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}
