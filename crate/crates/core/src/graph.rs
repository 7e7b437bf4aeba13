//! Undirected simple graphs.
//!
//! Topology observables and box covering work on the undirected projection of
//! the trade network: a pair of agents is adjacent when a link runs between
//! them in either direction. Nodes are dense indices `0..n`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::netcore::TradeNetwork;

/// Distance value for nodes a BFS did not reach.
pub const UNREACHABLE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    /// Sorted, duplicate-free neighbor lists.
    adj: Vec<Vec<usize>>,
    edges: usize,
}

impl Graph {
    /// Builds a graph on `n` nodes. Self-loops and repeated pairs are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Domain(format!("edge ({u}, {v}) outside a graph of {n} nodes")));
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        Ok(Self::from_adjacency(adj))
    }

    /// Undirected projection of a trade network. Agent `i` becomes node `i`.
    pub fn from_network(net: &TradeNetwork) -> Self {
        let mut adj = vec![Vec::new(); net.len()];
        for a in net.agents() {
            let i = a.id().index();
            for (j, _) in a.out_links() {
                adj[i].push(j.index());
                adj[j.index()].push(i);
            }
        }
        Self::from_adjacency(adj)
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        let mut twice = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        Self { adj, edges: twice / 2 }
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("indices in range")
    }

    pub fn cycle(n: usize) -> Self {
        let extra = if n >= 3 { Some((n - 1, 0)) } else { None };
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)).chain(extra)).expect("indices in range")
    }

    /// Hub `0` joined to `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Self::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("indices in range")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::from_edges(n, edges).expect("indices in range")
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Hop distances from `src`; [`UNREACHABLE`] for other components.
    pub fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![UNREACHABLE; self.node_count()];
        let mut queue = VecDeque::new();
        self.bfs_into(src, &mut dist, &mut queue);
        dist
    }

    /// BFS reusing caller buffers. `dist` is overwritten.
    pub(crate) fn bfs_into(&self, src: usize, dist: &mut Vec<usize>, queue: &mut VecDeque<usize>) {
        dist.clear();
        dist.resize(self.node_count(), UNREACHABLE);
        queue.clear();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let d = dist[u] + 1;
            for &v in &self.adj[u] {
                if dist[v] == UNREACHABLE {
                    dist[v] = d;
                    queue.push_back(v);
                }
            }
        }
    }

    /// Connected components, each sorted, ordered by their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![UNREACHABLE; self.node_count()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.node_count() {
            if label[start] != UNREACHABLE {
                continue;
            }
            let c = out.len();
            let mut members = vec![start];
            label[start] = c;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in &self.adj[u] {
                    if label[v] == UNREACHABLE {
                        label[v] = c;
                        members.push(v);
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Nodes of the largest component; ties go to the one holding the
    /// smallest node. Empty for an empty graph.
    pub fn giant_component(&self) -> Vec<usize> {
        let mut best: Vec<usize> = Vec::new();
        for c in self.components() {
            if c.len() > best.len() {
                best = c;
            }
        }
        best
    }

    /// Subgraph induced by `nodes`; node `nodes[i]` becomes `i`.
    pub fn induced(&self, nodes: &[usize]) -> Self {
        let mut index = vec![UNREACHABLE; self.node_count()];
        for (i, &v) in nodes.iter().enumerate() {
            index[v] = i;
        }
        let adj = nodes
            .iter()
            .map(|&v| {
                self.adj[v]
                    .iter()
                    .filter_map(|&u| (index[u] != UNREACHABLE).then_some(index[u]))
                    .collect()
            })
            .collect();
        Self::from_adjacency(adj)
    }
}
