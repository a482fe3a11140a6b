//! Directed multigraphs: edge endpoint maps, path enumeration and strong connectivity.
//!
//! Vertices are dense indices `0..n` and edges are identified by their
//! position in the edge list, so edge ids are unique by construction.

use std::collections::VecDeque;

use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Default bound on the number of paths a single enumeration may return.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("a digraph needs at least one vertex")]
    NoVertices,
    #[error("vertex {vertex} is out of range (graph has {count} vertices)")]
    VertexOutOfRange { vertex: VertexId, count: usize },
    #[error("edge {edge} is out of range (graph has {count} edges)")]
    EdgeOutOfRange { edge: EdgeId, count: usize },
    #[error("edges {first} and {second} do not chain: ω({first}) ≠ α({second})")]
    BrokenPath { first: EdgeId, second: EdgeId },
    #[error("path enumeration exceeded the cap of {cap} paths; lower the path length")]
    CapExceeded { cap: usize },
    #[error("path length must be at least 1")]
    ZeroLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Beginning `α(e)`.
    pub source: VertexId,
    /// End `ω(e)`.
    pub target: VertexId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<EdgeId>>,
}

/// A chained edge sequence `e₁…e_k` with `ω(e_i) = α(e_{i+1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Path(Vec<EdgeId>);

impl Path {
    /// Validates the chaining invariant against `graph`.
    pub fn new(graph: &Digraph, edges: Vec<EdgeId>) -> Result<Self, GraphError> {
        for &e in &edges {
            graph.edge(e)?;
        }
        for pair in edges.windows(2) {
            if graph.edges[pair[0]].target != graph.edges[pair[1]].source {
                return Err(GraphError::BrokenPath { first: pair[0], second: pair[1] });
            }
        }
        Ok(Self(edges))
    }

    /// The empty path (depth-0 address).
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub(crate) fn from_edges_unchecked(edges: Vec<EdgeId>) -> Self {
        Self(edges)
    }

    pub(crate) fn extended(&self, edge: EdgeId) -> Self {
        let mut edges = Vec::with_capacity(self.0.len() + 1);
        edges.extend_from_slice(&self.0);
        edges.push(edge);
        Self(edges)
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Digraph {
    /// Builds a graph on vertices `0..vertex_count` from `(α, ω)` pairs.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (VertexId, VertexId)>) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::NoVertices);
        }
        let mut list = Vec::new();
        let mut outgoing = vec![Vec::new(); vertex_count];
        for (source, target) in edges {
            for v in [source, target] {
                if v >= vertex_count {
                    return Err(GraphError::VertexOutOfRange { vertex: v, count: vertex_count });
                }
            }
            outgoing[source].push(list.len());
            list.push(Edge { source, target });
        }
        Ok(Self { vertex_count, edges: list, outgoing })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Result<Edge, GraphError> {
        self.edges.get(id).copied().ok_or(GraphError::EdgeOutOfRange { edge: id, count: self.edges.len() })
    }

    fn check_vertex(&self, v: VertexId) -> Result<(), GraphError> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange { vertex: v, count: self.vertex_count })
        }
    }

    /// `E_u`, in edge-id order.
    pub fn edges_from(&self, u: VertexId) -> Result<&[EdgeId], GraphError> {
        self.check_vertex(u)?;
        Ok(&self.outgoing[u])
    }

    /// `E_uv`, in edge-id order.
    pub fn edges_between(&self, u: VertexId, v: VertexId) -> Result<Vec<EdgeId>, GraphError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        Ok(self.outgoing[u].iter().copied().filter(|&e| self.edges[e].target == v).collect())
    }

    /// `m_u = #E_u` for every vertex.
    pub fn out_degrees(&self) -> Vec<usize> {
        self.outgoing.iter().map(Vec::len).collect()
    }

    /// `C_uv = m_uv = #E_uv`.
    pub fn count_matrix(&self) -> Vec<Vec<u64>> {
        let mut counts = vec![vec![0u64; self.vertex_count]; self.vertex_count];
        for e in &self.edges {
            counts[e.source][e.target] += 1;
        }
        counts
    }

    fn reachable(&self, start: VertexId, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.vertex_count];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(x) = queue.pop_front() {
            for e in &self.edges {
                let (from, to) = if reverse { (e.target, e.source) } else { (e.source, e.target) };
                if from == x && !seen[to] {
                    seen[to] = true;
                    queue.push_back(to);
                }
            }
        }
        seen
    }

    /// An ordered pair `(u, v)` with no path from `u` to `v`, if any.
    ///
    /// Two traversals from vertex 0 (forward and reversed) decide strong
    /// connectivity; the witness is built from whichever one misses a vertex.
    pub fn unreachable_pair(&self) -> Option<(VertexId, VertexId)> {
        let forward = self.reachable(0, false);
        if let Some(v) = forward.iter().position(|&r| !r) {
            return Some((0, v));
        }
        let backward = self.reachable(0, true);
        backward.iter().position(|&r| !r).map(|u| (u, 0))
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.unreachable_pair().is_none()
    }

    /// Shortest nonempty path from `u` back to `u`, if one exists.
    pub fn shortest_cycle(&self, u: VertexId) -> Result<Option<Path>, GraphError> {
        self.check_vertex(u)?;
        // BFS over vertices; parent edge records the tree.
        let mut parent: Vec<Option<EdgeId>> = vec![None; self.vertex_count];
        let mut visited = vec![false; self.vertex_count];
        let mut queue = VecDeque::new();
        for &e in &self.outgoing[u] {
            let t = self.edges[e].target;
            if t == u {
                return Ok(Some(Path(vec![e])));
            }
            if !visited[t] {
                visited[t] = true;
                parent[t] = Some(e);
                queue.push_back(t);
            }
        }
        while let Some(x) = queue.pop_front() {
            for &e in &self.outgoing[x] {
                let t = self.edges[e].target;
                if t == u {
                    let mut edges = vec![e];
                    let mut cur = x;
                    while let Some(pe) = parent[cur] {
                        edges.push(pe);
                        cur = self.edges[pe].source;
                        if cur == u {
                            break;
                        }
                    }
                    edges.reverse();
                    return Ok(Some(Path(edges)));
                }
                if !visited[t] {
                    visited[t] = true;
                    parent[t] = Some(e);
                    queue.push_back(t);
                }
            }
        }
        Ok(None)
    }

    /// `E^(k)_uv` in lexicographic edge-id order.
    pub fn paths_of_length(&self, u: VertexId, v: VertexId, k: usize, cap: usize) -> Result<Vec<Path>, GraphError> {
        self.check_vertex(v)?;
        self.enumerate(u, Some(v), k, cap)
    }

    /// All length-`k` paths starting at `u`, in lexicographic edge-id order.
    pub fn paths_from(&self, u: VertexId, k: usize, cap: usize) -> Result<Vec<Path>, GraphError> {
        self.enumerate(u, None, k, cap)
    }

    fn enumerate(&self, u: VertexId, end: Option<VertexId>, k: usize, cap: usize) -> Result<Vec<Path>, GraphError> {
        self.check_vertex(u)?;
        if k == 0 {
            return Err(GraphError::ZeroLength);
        }
        // can_finish[r][x]: some path of exactly r edges leads from x to `end`.
        let can_finish: Option<Vec<Vec<bool>>> = end.map(|target| {
            let mut table = vec![vec![false; self.vertex_count]];
            table[0][target] = true;
            for r in 1..=k {
                let prev = &table[r - 1];
                let row = (0..self.vertex_count)
                    .map(|x| self.outgoing[x].iter().any(|&e| prev[self.edges[e].target]))
                    .collect();
                table.push(row);
            }
            table
        });
        let viable = |x: VertexId, remaining: usize| can_finish.as_ref().is_none_or(|t| t[remaining][x]);

        let mut out = Vec::new();
        if !viable(u, k) {
            return Ok(out);
        }
        let mut stack: Vec<EdgeId> = Vec::with_capacity(k);
        self.dfs(u, k, &viable, &mut stack, &mut out, cap)?;
        Ok(out)
    }

    fn dfs(
        &self,
        at: VertexId,
        remaining: usize,
        viable: &impl Fn(VertexId, usize) -> bool,
        stack: &mut Vec<EdgeId>,
        out: &mut Vec<Path>,
        cap: usize,
    ) -> Result<(), GraphError> {
        if remaining == 0 {
            if out.len() == cap {
                return Err(GraphError::CapExceeded { cap });
            }
            out.push(Path(stack.clone()));
            return Ok(());
        }
        for &e in &self.outgoing[at] {
            let next = self.edges[e].target;
            if !viable(next, remaining - 1) {
                continue;
            }
            stack.push(e);
            self.dfs(next, remaining - 1, viable, stack, out, cap)?;
            stack.pop();
        }
        Ok(())
    }

    /// `ω` of the last edge, or `start` for the empty path.
    pub fn path_end(&self, start: VertexId, path: &Path) -> VertexId {
        path.0.last().map_or(start, |&e| self.edges[e].target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn koch_graph() -> Digraph {
        Digraph::new(1, vec![(0, 0); 4]).unwrap()
    }

    fn two_cycle() -> Digraph {
        Digraph::new(2, [(0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn edges_between_examples() {
        assert_eq!(koch_graph().edges_between(0, 0).unwrap(), vec![0, 1, 2, 3]);
        let g = Digraph::new(2, [(0, 0), (1, 0)]).unwrap();
        assert!(g.edges_between(0, 1).unwrap().is_empty());
        assert!(matches!(g.edges_between(0, 2), Err(GraphError::VertexOutOfRange { vertex: 2, count: 2 })));
    }

    #[test]
    fn strong_connectivity_examples() {
        assert!(Digraph::new(1, [(0, 0)]).unwrap().is_strongly_connected());
        assert!(two_cycle().is_strongly_connected());
        let one_way = Digraph::new(2, [(0, 1)]).unwrap();
        assert!(!one_way.is_strongly_connected());
        assert_eq!(one_way.unreachable_pair(), Some((1, 0)));
    }

    #[test]
    fn path_examples() {
        assert_eq!(koch_graph().paths_of_length(0, 0, 2, DEFAULT_PATH_CAP).unwrap().len(), 16);
        let g = two_cycle();
        assert_eq!(g.paths_of_length(0, 0, 2, 10).unwrap(), vec![Path(vec![0, 1])]);
        assert!(g.paths_of_length(0, 1, 2, 10).unwrap().is_empty());
        assert_eq!(koch_graph().paths_from(0, 3, 63), Err(GraphError::CapExceeded { cap: 63 }));
        assert_eq!(koch_graph().paths_from(0, 0, 63), Err(GraphError::ZeroLength));
    }

    #[test]
    fn path_validation() {
        let g = two_cycle();
        assert!(Path::new(&g, vec![0, 1, 0]).is_ok());
        assert_eq!(Path::new(&g, vec![0, 0]), Err(GraphError::BrokenPath { first: 0, second: 0 }));
        assert!(matches!(Path::new(&g, vec![5]), Err(GraphError::EdgeOutOfRange { .. })));
    }

    #[test]
    fn shortest_cycles() {
        let g = Digraph::new(3, [(0, 1), (1, 2), (2, 0), (1, 0)]).unwrap();
        assert_eq!(g.shortest_cycle(0).unwrap().unwrap().edges(), &[0, 3]);
        assert_eq!(g.shortest_cycle(2).unwrap().unwrap().edges(), &[2, 0, 1]);
        let dag = Digraph::new(2, [(0, 1)]).unwrap();
        assert_eq!(dag.shortest_cycle(0).unwrap(), None);
    }

    fn matrix_power(c: &[Vec<u64>], k: usize) -> Vec<Vec<u64>> {
        let n = c.len();
        let mut acc: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| u64::from(i == j)).collect()).collect();
        for _ in 0..k {
            acc = (0..n).map(|i| (0..n).map(|j| (0..n).map(|m| acc[i][m] * c[m][j]).sum()).collect()).collect();
        }
        acc
    }

    fn arb_graph() -> impl Strategy<Value = Digraph> {
        (1usize..=4).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..8).prop_map(move |edges| Digraph::new(n, edges).unwrap())
        })
    }

    proptest! {
        #[test]
        fn path_counts_match_matrix_powers(g in arb_graph(), k in 1usize..=5) {
            let power = matrix_power(&g.count_matrix(), k);
            for (u, row) in power.iter().enumerate() {
                for (v, &count) in row.iter().enumerate() {
                    let paths = g.paths_of_length(u, v, k, DEFAULT_PATH_CAP).unwrap();
                    prop_assert_eq!(paths.len() as u64, count);
                    for p in &paths {
                        prop_assert!(Path::new(&g, p.edges().to_vec()).is_ok());
                        prop_assert_eq!(g.edges()[p.edges()[0]].source, u);
                        prop_assert_eq!(g.path_end(u, p), v);
                    }
                }
            }
        }

        #[test]
        fn edges_between_partition_edges_from(g in arb_graph()) {
            for u in 0..g.vertex_count() {
                let total: usize = (0..g.vertex_count()).map(|v| g.edges_between(u, v).unwrap().len()).sum();
                prop_assert_eq!(total, g.edges_from(u).unwrap().len());
            }
        }

        #[test]
        fn strong_connectivity_matches_reachability(g in arb_graph()) {
            let n = g.vertex_count();
            let power_sum = (1..=n).fold(vec![vec![0u64; n]; n], |acc, k| {
                let p = matrix_power(&g.count_matrix(), k);
                (0..n).map(|i| (0..n).map(|j| acc[i][j] + p[i][j]).collect()).collect()
            });
            let brute = (0..n).all(|i| (0..n).all(|j| i == j || power_sum[i][j] > 0));
            prop_assert_eq!(g.is_strongly_connected(), brute);
        }
    }
}
