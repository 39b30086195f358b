//! Dinic max-flow on integer capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: u64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    arcs: Vec<Vec<Arc>>,
    level: Vec<u32>,
    next: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            arcs: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            next: vec![0; nodes],
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: u64) {
        let fwd = self.arcs[from].len();
        let bwd = self.arcs[to].len() + usize::from(from == to);
        self.arcs[from].push(Arc { to, cap, rev: bwd });
        self.arcs[to].push(Arc {
            to: from,
            cap: 0,
            rev: fwd,
        });
    }

    fn bfs(&mut self, source: usize, sink: usize) -> bool {
        self.level.fill(u32::MAX);
        self.level[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for arc in &self.arcs[u] {
                if arc.cap > 0 && self.level[arc.to] == u32::MAX {
                    self.level[arc.to] = self.level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        self.level[sink] != u32::MAX
    }

    /// Finds one augmenting path in the level graph with an explicit stack.
    fn augment(&mut self, source: usize, sink: usize) -> u64 {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut u = source;
        loop {
            if u == sink {
                let pushed = path
                    .iter()
                    .map(|&(v, i)| self.arcs[v][i].cap)
                    .min()
                    .unwrap_or(0);
                for &(v, i) in &path {
                    self.arcs[v][i].cap -= pushed;
                    let (to, rev) = (self.arcs[v][i].to, self.arcs[v][i].rev);
                    self.arcs[to][rev].cap += pushed;
                }
                return pushed;
            }
            let mut advanced = false;
            while self.next[u] < self.arcs[u].len() {
                let arc = &self.arcs[u][self.next[u]];
                if arc.cap > 0 && self.level[arc.to] == self.level[u] + 1 {
                    path.push((u, self.next[u]));
                    u = arc.to;
                    advanced = true;
                    break;
                }
                self.next[u] += 1;
            }
            if !advanced {
                // Dead end: retreat and skip the arc that led here.
                self.level[u] = u32::MAX;
                match path.pop() {
                    Some((v, _)) => {
                        u = v;
                        self.next[u] += 1;
                    }
                    None => return 0,
                }
            }
        }
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> u64 {
        let mut total = 0;
        while self.bfs(source, sink) {
            self.next.fill(0);
            loop {
                let f = self.augment(source, sink);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }

    /// Nodes reachable from `source` in the residual graph; call after
    /// [`max_flow`](Self::max_flow) to read off a minimum cut.
    pub fn source_side(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.arcs.len()];
        seen[source] = true;
        let mut stack = vec![source];
        while let Some(u) = stack.pop() {
            for arc in &self.arcs[u] {
                if arc.cap > 0 && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1, max flow 23.
        let mut g = FlowNetwork::new(6);
        for &(u, v, c) in &[
            (0, 1, 16),
            (0, 2, 13),
            (1, 3, 12),
            (2, 1, 4),
            (2, 4, 14),
            (3, 2, 9),
            (3, 5, 20),
            (4, 3, 7),
            (4, 5, 4),
        ] {
            g.add_arc(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23);
        let side = g.source_side(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn disconnected_sink() {
        let mut g = FlowNetwork::new(3);
        g.add_arc(0, 1, 5);
        assert_eq!(g.max_flow(0, 2), 0);
        assert_eq!(g.source_side(0), vec![true, true, false]);
    }
}
