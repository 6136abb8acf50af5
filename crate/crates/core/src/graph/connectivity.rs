//! Vertex connectivity through unit-capacity max-flow on the split graph.
//!
//! Node `v` becomes `v_in -> v_out` with capacity 1; an edge `{u, w}` becomes
//! `u_out -> w_in` and `w_out -> u_in` with unbounded capacity. The maximum
//! number of internally disjoint `s`-`t` paths equals the flow from `s_out`
//! to `t_in`.

use std::collections::VecDeque;

use super::{GraphError, NodeId, Result, Topology};

const INF: i32 = i32::MAX / 2;

struct FlowNet {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<i32>,
    next: Vec<usize>,
}

impl FlowNet {
    fn new(nodes: usize) -> Self {
        FlowNet { head: vec![usize::MAX; nodes], to: Vec::new(), cap: Vec::new(), next: Vec::new() }
    }

    fn add(&mut self, a: usize, b: usize, c: i32) {
        for (x, y, cc) in [(a, b, c), (b, a, 0)] {
            self.to.push(y);
            self.cap.push(cc);
            self.next.push(self.head[x]);
            self.head[x] = self.to.len() - 1;
        }
    }

    fn split(topo: &Topology) -> Self {
        let n = topo.node_count();
        let mut net = FlowNet::new(2 * n);
        for v in 0..n {
            net.add(2 * v, 2 * v + 1, 1);
        }
        for (u, w) in topo.edges() {
            let (u, w) = (u as usize, w as usize);
            net.add(2 * u + 1, 2 * w, INF);
            net.add(2 * w + 1, 2 * u, INF);
        }
        net
    }

    /// Augments along shortest paths until `limit` units flow.
    fn max_flow(&mut self, s: usize, t: usize, limit: i32) -> i32 {
        let mut flow = 0;
        while flow < limit {
            let mut prev_edge = vec![usize::MAX; self.head.len()];
            let mut seen = vec![false; self.head.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                if x == t {
                    break;
                }
                let mut e = self.head[x];
                while e != usize::MAX {
                    let y = self.to[e];
                    if self.cap[e] > 0 && !seen[y] {
                        seen[y] = true;
                        prev_edge[y] = e;
                        queue.push_back(y);
                    }
                    e = self.next[e];
                }
            }
            if !seen[t] {
                break;
            }
            let mut y = t;
            while y != s {
                let e = prev_edge[y];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                y = self.to[e ^ 1];
            }
            flow += 1;
        }
        flow
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            let mut e = self.head[x];
            while e != usize::MAX {
                let y = self.to[e];
                if self.cap[e] > 0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
                e = self.next[e];
            }
        }
        seen
    }
}

/// Number of internally node-disjoint paths between two non-adjacent nodes,
/// capped at `limit`.
pub fn local_connectivity(topo: &Topology, s: NodeId, t: NodeId, limit: usize) -> usize {
    let mut net = FlowNet::split(topo);
    net.max_flow(2 * s as usize + 1, 2 * t as usize, limit as i32) as usize
}

fn separating_cut(topo: &Topology, s: NodeId, t: NodeId, k: usize) -> Option<Vec<NodeId>> {
    let mut net = FlowNet::split(topo);
    let flow = net.max_flow(2 * s as usize + 1, 2 * t as usize, k as i32);
    if flow as usize >= k {
        return None;
    }
    let seen = net.reachable(2 * s as usize + 1);
    let cut = topo.nodes().filter(|&v| seen[2 * v as usize] && !seen[2 * v as usize + 1]).collect();
    Some(cut)
}

fn check_k(topo: &Topology, k: usize) -> Result<()> {
    if k == 0 {
        return Err(GraphError::Domain("k must be at least 1".into()));
    }
    if k >= topo.node_count() {
        return Err(GraphError::Domain(format!("k = {k} must be smaller than the node count {}", topo.node_count())));
    }
    Ok(())
}

/// Returns a node-cut with fewer than `k` nodes, if one exists.
///
/// Any cut `C` with `|C| < k` misses one of the first `k + 1` nodes, and that
/// node is separated by `C` from some non-adjacent node, so only those
/// sources need to be tried.
pub fn find_small_cut(topo: &Topology, k: usize) -> Result<Option<Vec<NodeId>>> {
    check_k(topo, k)?;
    for s in 0..=(k as NodeId) {
        for t in topo.nodes() {
            if t == s || topo.has_edge(s, t) {
                continue;
            }
            if let Some(cut) = separating_cut(topo, s, t, k) {
                return Ok(Some(cut));
            }
        }
    }
    Ok(None)
}

/// True iff removing any set of fewer than `k` nodes leaves the graph connected.
pub fn is_k_connected(topo: &Topology, k: usize) -> Result<bool> {
    Ok(find_small_cut(topo, k)?.is_none())
}

/// Brute-force oracle: smallest node-cut by enumerating all subsets of size
/// below `limit`. Exponential; intended for graphs of a dozen nodes.
pub fn exhaustive_min_cut(topo: &Topology, limit: usize) -> Option<Vec<NodeId>> {
    fn search(topo: &Topology, from: NodeId, size: usize, picked: &mut Vec<NodeId>) -> bool {
        if picked.len() == size {
            return topo.node_count() - size >= 2 && !topo.is_connected_without(picked);
        }
        for v in from..topo.node_count() as NodeId {
            picked.push(v);
            if search(topo, v + 1, size, picked) {
                return true;
            }
            picked.pop();
        }
        false
    }
    let n = topo.node_count();
    (0..limit.min(n.saturating_sub(1))).find_map(|size| {
        let mut picked = Vec::with_capacity(size);
        search(topo, 0, size, &mut picked).then_some(picked)
    })
}
