//! Acyclic overlay graphs with a single broadcast source.
//!
//! Nodes and edges are dense 0-based ids. Every graph is validated on
//! construction: no directed cycles, no edges into the source, and every
//! receiver reachable from the source. Once built a graph is immutable.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A directed overlay link, transmitting from `from` to `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlayGraph {
    node_count: usize,
    source: NodeId,
    edges: Vec<Edge>,
    // Both adjacency lists are sorted by the neighbor's id.
    in_edges: Vec<Vec<EdgeId>>,
    out_edges: Vec<Vec<EdgeId>>,
    lookup: HashMap<(NodeId, NodeId), EdgeId>,
}

/// Validates and builds an overlay graph. Edge ids follow the order of `edges`.
pub fn build_overlay(node_count: usize, edges: &[(NodeId, NodeId)], source: NodeId) -> Result<OverlayGraph> {
    OverlayGraph::new(node_count, edges, source)
}

impl OverlayGraph {
    pub fn new(node_count: usize, edges: &[(NodeId, NodeId)], source: NodeId) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        if source.0 >= node_count {
            return Err(Error::NodeOutOfRange(source));
        }

        let mut lookup = HashMap::with_capacity(edges.len());
        let mut in_edges = vec![Vec::new(); node_count];
        let mut out_edges = vec![Vec::new(); node_count];
        let mut list = Vec::with_capacity(edges.len());
        for (i, &(from, to)) in edges.iter().enumerate() {
            for node in [from, to] {
                if node.0 >= node_count {
                    return Err(Error::NodeOutOfRange(node));
                }
            }
            if from == to {
                return Err(Error::SelfLoop(from));
            }
            if lookup.insert((from, to), EdgeId(i)).is_some() {
                return Err(Error::DuplicateEdge(from, to));
            }
            list.push(Edge { from, to });
            in_edges[to.0].push(EdgeId(i));
            out_edges[from.0].push(EdgeId(i));
        }
        for adj in &mut in_edges {
            adj.sort_by_key(|e| list[e.0].from);
        }
        for adj in &mut out_edges {
            adj.sort_by_key(|e| list[e.0].to);
        }

        let graph = OverlayGraph { node_count, source, edges: list, in_edges, out_edges, lookup };
        graph.check_acyclic()?;
        if !graph.in_edges[source.0].is_empty() {
            return Err(Error::SourceHasInEdges(source));
        }
        graph.check_reachable()?;
        Ok(graph)
    }

    fn check_acyclic(&self) -> Result<()> {
        // Kahn's algorithm; whatever is left over sits on (or behind) a cycle.
        let mut indegree: Vec<usize> = self.in_edges.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..self.node_count).filter(|&v| indegree[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for e in &self.out_edges[v] {
                let to = self.edges[e.0].to.0;
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    queue.push_back(to);
                }
            }
        }
        if seen == self.node_count {
            return Ok(());
        }
        let stuck = (0..self.node_count).find(|&v| indegree[v] > 0).expect("unprocessed node");
        Err(Error::CycleDetected(NodeId(stuck)))
    }

    fn check_reachable(&self) -> Result<()> {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![self.source];
        seen[self.source.0] = true;
        while let Some(v) = stack.pop() {
            for u in self.out_neighbors(v) {
                if !seen[u.0] {
                    seen[u.0] = true;
                    stack.push(u);
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(v) => Err(Error::UnreachableReceiver(NodeId(v))),
            None => Ok(()),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + Clone {
        (0..self.node_count).map(NodeId)
    }

    /// All nodes except the source.
    pub fn receivers(&self) -> impl Iterator<Item = NodeId> + Clone + '_ {
        self.nodes().filter(move |&v| v != self.source)
    }

    pub fn edge_ids(&self) -> impl ExactSizeIterator<Item = EdgeId> + Clone {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e.0]
    }

    pub fn find_edge(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.lookup.get(&(from, to)).copied()
    }

    /// Edges entering `v`, ordered by origin id.
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[v.0]
    }

    /// Edges leaving `v`, ordered by destination id.
    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_edges[v.0]
    }

    pub fn in_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges[v.0].iter().map(move |e| self.edges[e.0].from)
    }

    pub fn out_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edges[v.0].iter().map(move |e| self.edges[e.0].to)
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_edges[v.0].len()
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_edges[v.0].len()
    }

    pub fn edge_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.edges.iter().map(|e| (e.from, e.to)).collect()
    }
}

/// A topological numbering: `index_of(s) == 0` and every edge points from a
/// smaller index to a larger one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexAssignment {
    index: Vec<usize>,
    order: Vec<NodeId>,
}

impl IndexAssignment {
    pub fn index_of(&self, v: NodeId) -> usize {
        self.index[v.0]
    }

    /// Nodes in ascending index order.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.index
    }
}

/// Layered Kahn ordering: each round takes every node whose in-neighbors are
/// all indexed, in ascending id order.
pub fn topological_index(g: &OverlayGraph) -> IndexAssignment {
    let n = g.node_count();
    let mut indegree: Vec<usize> = g.nodes().map(|v| g.in_degree(v)).collect();
    let mut layer: Vec<NodeId> = vec![g.source()];
    let mut order = Vec::with_capacity(n);
    while !layer.is_empty() {
        let mut next = BTreeSet::new();
        for &v in &layer {
            order.push(v);
            for u in g.out_neighbors(v) {
                indegree[u.0] -= 1;
                if indegree[u.0] == 0 {
                    next.insert(u);
                }
            }
        }
        layer = next.into_iter().collect();
    }
    debug_assert_eq!(order.len(), n, "validated graphs have a single root");
    let mut index = vec![0; n];
    for (i, v) in order.iter().enumerate() {
        index[v.0] = i;
    }
    IndexAssignment { index, order }
}

/// Maps grid node ids to `(row, col)` cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridLayout {
    pub side: usize,
}

impl GridLayout {
    pub fn node_at(&self, row: usize, col: usize) -> NodeId {
        assert!(row < self.side && col < self.side, "cell outside the grid");
        NodeId(row * self.side + col)
    }

    pub fn coord(&self, v: NodeId) -> (usize, usize) {
        (v.0 / self.side, v.0 % self.side)
    }

    pub fn center(&self) -> NodeId {
        self.node_at(self.side / 2, self.side / 2)
    }

    pub fn top_left(&self) -> NodeId {
        self.node_at(0, 0)
    }

    fn distance_to_center(&self, row: usize, col: usize) -> usize {
        let c = self.side / 2;
        row.abs_diff(c) + col.abs_diff(c)
    }
}

/// Square grid with the source at the center cell. Every pair of 4-adjacent
/// cells gets one edge, oriented away from the center in Manhattan distance.
pub fn gen_grid(side: usize) -> Result<(OverlayGraph, GridLayout)> {
    if side < 3 || side.is_multiple_of(2) {
        return Err(Error::InvalidSide(side));
    }
    let layout = GridLayout { side };
    let mut edges = Vec::with_capacity(2 * side * (side - 1));
    for row in 0..side {
        for col in 0..side {
            let here = layout.distance_to_center(row, col);
            for (r2, c2) in [(row, col + 1), (row + 1, col)] {
                if r2 >= side || c2 >= side {
                    continue;
                }
                let there = layout.distance_to_center(r2, c2);
                let (a, b) = (layout.node_at(row, col), layout.node_at(r2, c2));
                edges.push(if here < there { (a, b) } else { (b, a) });
            }
        }
    }
    let graph = OverlayGraph::new(side * side, &edges, layout.center())?;
    Ok((graph, layout))
}

/// Random forward DAG on `n` nodes with source 0. The chain `0 -> 1 -> ... ->
/// n-1` is always present; every other forward pair is an edge with
/// probability `edge_probability`.
pub fn gen_random_dag(n: usize, edge_probability: f64, seed: u64) -> Result<OverlayGraph> {
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::InvalidProbability(edge_probability));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let keep = rng.gen_bool(edge_probability);
            if j == i + 1 || keep {
                edges.push((NodeId(i), NodeId(j)));
            }
        }
    }
    OverlayGraph::new(n, &edges, NodeId(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(pairs: &[(usize, usize)]) -> Vec<(NodeId, NodeId)> {
        pairs.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect()
    }

    fn diamond() -> OverlayGraph {
        build_overlay(4, &ids(&[(0, 1), (0, 2), (1, 3), (2, 3)]), NodeId(0)).unwrap()
    }

    #[test]
    fn smallest_graph() {
        let g = build_overlay(2, &ids(&[(0, 1)]), NodeId(0)).unwrap();
        assert_eq!(g.in_neighbors(NodeId(1)).collect::<Vec<_>>(), vec![NodeId(0)]);
        assert_eq!(g.out_neighbors(NodeId(0)).collect::<Vec<_>>(), vec![NodeId(1)]);
    }

    #[test]
    fn rejects_cycle() {
        let err = build_overlay(3, &ids(&[(0, 1), (1, 2), (2, 0)]), NodeId(0)).unwrap_err();
        assert!(matches!(err, Error::CycleDetected(_)));
    }

    #[test]
    fn rejects_cycle_behind_source() {
        let err = build_overlay(4, &ids(&[(0, 1), (1, 2), (2, 3), (3, 1)]), NodeId(0)).unwrap_err();
        assert!(matches!(err, Error::CycleDetected(_)));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(build_overlay(0, &[], NodeId(0)).unwrap_err(), Error::EmptyGraph);
        assert_eq!(build_overlay(3, &ids(&[(0, 1)]), NodeId(0)).unwrap_err(), Error::UnreachableReceiver(NodeId(2)));
        assert_eq!(
            build_overlay(3, &ids(&[(1, 0), (0, 2), (1, 2)]), NodeId(0)).unwrap_err(),
            Error::SourceHasInEdges(NodeId(0))
        );
        assert_eq!(
            build_overlay(2, &ids(&[(0, 1), (0, 1)]), NodeId(0)).unwrap_err(),
            Error::DuplicateEdge(NodeId(0), NodeId(1))
        );
        assert_eq!(build_overlay(2, &ids(&[(0, 5)]), NodeId(0)).unwrap_err(), Error::NodeOutOfRange(NodeId(5)));
        assert_eq!(build_overlay(2, &ids(&[(1, 1)]), NodeId(0)).unwrap_err(), Error::SelfLoop(NodeId(1)));
    }

    #[test]
    fn diamond_views() {
        let g = diamond();
        assert_eq!(g.in_neighbors(NodeId(3)).collect::<Vec<_>>(), vec![NodeId(1), NodeId(2)]);
        assert_eq!(g.find_edge(NodeId(2), NodeId(3)), Some(EdgeId(3)));
        assert_eq!(g.find_edge(NodeId(3), NodeId(2)), None);
        assert_eq!(g.receivers().count(), 3);
    }

    #[test]
    fn diamond_and_chain_indices() {
        let idx = topological_index(&diamond());
        assert_eq!(idx.as_slice(), &[0, 1, 2, 3]);
        let chain = build_overlay(3, &ids(&[(0, 1), (1, 2)]), NodeId(0)).unwrap();
        assert_eq!(topological_index(&chain).as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn index_uses_layers_with_id_tiebreak() {
        // Source 2; layer 1 = {0, 3}, layer 2 = {1}.
        let g = build_overlay(4, &ids(&[(2, 3), (2, 0), (0, 1), (3, 1)]), NodeId(2)).unwrap();
        let idx = topological_index(&g);
        assert_eq!(idx.order(), &[NodeId(2), NodeId(0), NodeId(3), NodeId(1)]);
    }

    #[test]
    fn grid_3x3_by_hand() {
        let (g, layout) = gen_grid(3).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.source(), NodeId(4));
        // Center (1,1)=4 feeds its four neighbors; each edge-middle cell
        // feeds the two corners next to it.
        let mut expected =
            ids(&[(4, 1), (4, 3), (4, 5), (4, 7), (1, 0), (1, 2), (3, 0), (3, 6), (5, 2), (5, 8), (7, 6), (7, 8)]);
        let mut actual = g.edge_pairs();
        expected.sort();
        actual.sort();
        assert_eq!(actual, expected);
        let corner = layout.top_left();
        assert_eq!(g.in_neighbors(corner).collect::<Vec<_>>(), vec![layout.node_at(0, 1), layout.node_at(1, 0)]);
        assert_eq!(layout.coord(NodeId(5)), (1, 2));
    }

    #[test]
    fn grid_sizes() {
        let (g, _) = gen_grid(5).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.edge_count(), 40);
        assert_eq!(gen_grid(4).unwrap_err(), Error::InvalidSide(4));
        assert_eq!(gen_grid(1).unwrap_err(), Error::InvalidSide(1));
    }

    #[test]
    fn random_dag_extremes() {
        let g = gen_random_dag(2, 0.0, 99).unwrap();
        assert_eq!(g.edge_pairs(), ids(&[(0, 1)]));
        let g = gen_random_dag(5, 1.0, 3).unwrap();
        assert_eq!(g.edge_count(), 10);
        assert!(gen_random_dag(5, 1.5, 3).is_err());
    }

    #[test]
    fn random_dag_is_deterministic() {
        let a = gen_random_dag(8, 0.4, 7).unwrap();
        let b = gen_random_dag(8, 0.4, 7).unwrap();
        assert_eq!(a.edge_pairs(), b.edge_pairs());
    }
}
