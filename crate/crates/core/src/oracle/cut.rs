use std::collections::VecDeque;

use crate::capacity::RateAllocation;
use crate::error::{Error, Result};
use crate::graph::{NodeId, OverlayGraph};

const FLOW_EPS: f64 = 1e-12;
pub const BRUTE_FORCE_MAX_NODES: usize = 16;

/// An `s`-`v` cut `(U, V - U)` and the total rate crossing it.
#[derive(Clone, Debug, PartialEq)]
pub struct CutResult {
    pub value: f64,
    /// `U`, sorted; contains the source.
    pub source_side: Vec<NodeId>,
    /// `V - U`, sorted; contains the target.
    pub sink_side: Vec<NodeId>,
}

impl CutResult {
    fn from_mask(g: &OverlayGraph, r: &RateAllocation, in_source_side: &[bool]) -> Self {
        let (source_side, sink_side) = g.nodes().partition(|v| in_source_side[v.0]);
        CutResult { value: cut_value(g, r, in_source_side), source_side, sink_side }
    }
}

/// Sum of `r` over edges leaving the marked set, in edge order.
pub fn cut_value(g: &OverlayGraph, r: &RateAllocation, in_source_side: &[bool]) -> f64 {
    g.edges()
        .iter()
        .zip(r.as_slice())
        .filter(|(e, _)| in_source_side[e.from.0] && !in_source_side[e.to.0])
        .map(|(_, &x)| x)
        .sum()
}

fn check_inputs(g: &OverlayGraph, r: &RateAllocation, v: NodeId) -> Result<()> {
    if r.len() != g.edge_count() {
        return Err(Error::DimensionMismatch { expected: g.edge_count(), actual: r.len() });
    }
    if v.0 >= g.node_count() {
        return Err(Error::NodeOutOfRange(v));
    }
    if v == g.source() {
        return Err(Error::SourceIsTarget(v));
    }
    Ok(())
}

struct Arc {
    to: usize,
    cap: f64,
}

struct Dinic {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    level: Vec<i64>,
    next: Vec<usize>,
}

impl Dinic {
    fn new(g: &OverlayGraph, r: &RateAllocation) -> Self {
        let mut d =
            Dinic { arcs: Vec::new(), adj: vec![Vec::new(); g.node_count()], level: Vec::new(), next: Vec::new() };
        for (e, cap) in r.iter() {
            if cap <= 0.0 {
                continue;
            }
            let edge = g.edge(e);
            d.adj[edge.from.0].push(d.arcs.len());
            d.arcs.push(Arc { to: edge.to.0, cap });
            d.adj[edge.to.0].push(d.arcs.len());
            d.arcs.push(Arc { to: edge.from.0, cap: 0.0 });
        }
        d
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level = vec![-1; self.adj.len()];
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > FLOW_EPS && self.level[arc.to] < 0 {
                    self.level[arc.to] = self.level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.next[u] < self.adj[u].len() {
            let a = self.adj[u][self.next[u]];
            let (to, cap) = (self.arcs[a].to, self.arcs[a].cap);
            if cap > FLOW_EPS && self.level[to] == self.level[u] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0.0 {
                    self.arcs[a].cap -= got;
                    self.arcs[a ^ 1].cap += got;
                    return got;
                }
            }
            self.next[u] += 1;
        }
        0.0
    }

    fn run(&mut self, s: usize, t: usize) {
        while self.bfs(s, t) {
            self.next = vec![0; self.adj.len()];
            while self.dfs(s, t, f64::INFINITY) > 0.0 {}
        }
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > FLOW_EPS && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}

/// Minimum `s`-`v` cut under edge capacities `r`, via Dinic's max-flow. The
/// witness `U` is the set reachable from `s` in the final residual graph.
pub fn min_cut(g: &OverlayGraph, r: &RateAllocation, v: NodeId) -> Result<CutResult> {
    check_inputs(g, r, v)?;
    let mut dinic = Dinic::new(g, r);
    dinic.run(g.source().0, v.0);
    Ok(CutResult::from_mask(g, r, &dinic.reachable(g.source().0)))
}

/// Exhaustive minimum over every `U` with `s in U`, `v not in U`. Among
/// minimizers the lexicographically smallest sorted `U` is returned.
pub fn brute_force_min_cut(g: &OverlayGraph, r: &RateAllocation, v: NodeId) -> Result<CutResult> {
    check_inputs(g, r, v)?;
    let n = g.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooLarge { max: BRUTE_FORCE_MAX_NODES, actual: n });
    }
    let free: Vec<usize> = (0..n).filter(|&u| u != g.source().0 && u != v.0).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut mask = vec![false; n];
    for bits in 0u32..(1 << free.len()) {
        mask.iter_mut().for_each(|m| *m = false);
        mask[g.source().0] = true;
        for (i, &u) in free.iter().enumerate() {
            mask[u] = bits >> i & 1 == 1;
        }
        let value = cut_value(g, r, &mask);
        let members: Vec<usize> = (0..n).filter(|&u| mask[u]).collect();
        let replace = match &best {
            None => true,
            Some((b, set)) => value < *b || (value == *b && members < *set),
        };
        if replace {
            best = Some((value, members));
        }
    }
    let (_, members) = best.expect("at least one partition");
    let mut in_source_side = vec![false; n];
    for u in members {
        in_source_side[u] = true;
    }
    Ok(CutResult::from_mask(g, r, &in_source_side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_overlay, gen_random_dag};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn diamond() -> OverlayGraph {
        build_overlay(
            4,
            &[(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2)), (NodeId(1), NodeId(3)), (NodeId(2), NodeId(3))],
            NodeId(0),
        )
        .unwrap()
    }

    #[test]
    fn series_bottleneck() {
        let g = build_overlay(3, &[(NodeId(0), NodeId(1)), (NodeId(1), NodeId(2))], NodeId(0)).unwrap();
        let r = RateAllocation::new(vec![3.0, 2.0]).unwrap();
        for cut in [min_cut(&g, &r, NodeId(2)).unwrap(), brute_force_min_cut(&g, &r, NodeId(2)).unwrap()] {
            assert_eq!(cut.value, 2.0);
            assert_eq!(cut.sink_side, ids(&[2]));
        }
    }

    #[test]
    fn two_disjoint_paths() {
        let g = diamond();
        let r = RateAllocation::new(vec![1.0; 4]).unwrap();
        assert_eq!(min_cut(&g, &r, NodeId(3)).unwrap().value, 2.0);
        let brute = brute_force_min_cut(&g, &r, NodeId(3)).unwrap();
        assert_eq!(brute.value, 2.0);
        // Every valid U cuts two unit edges here; {0} is lexicographically first.
        assert_eq!(brute.source_side, ids(&[0]));
    }

    #[test]
    fn smallest_graph() {
        let g = build_overlay(2, &[(NodeId(0), NodeId(1))], NodeId(0)).unwrap();
        let r = RateAllocation::new(vec![2.5]).unwrap();
        assert_eq!(brute_force_min_cut(&g, &r, NodeId(1)).unwrap().value, 2.5);
        assert_eq!(min_cut(&g, &r, NodeId(1)).unwrap().value, 2.5);
    }

    #[test]
    fn zero_rates_cut_everything() {
        let g = diamond();
        let r = RateAllocation::zeros(4);
        let cut = min_cut(&g, &r, NodeId(3)).unwrap();
        assert_eq!(cut.value, 0.0);
        assert_eq!(cut.source_side, ids(&[0]));
    }

    #[test]
    fn bad_targets() {
        let g = diamond();
        let r = RateAllocation::zeros(4);
        assert_eq!(min_cut(&g, &r, NodeId(0)).unwrap_err(), Error::SourceIsTarget(NodeId(0)));
        assert!(min_cut(&g, &r, NodeId(9)).is_err());
        assert!(min_cut(&g, &RateAllocation::zeros(3), NodeId(3)).is_err());
    }

    #[test]
    fn brute_force_size_limit() {
        let g = gen_random_dag(17, 0.2, 1).unwrap();
        let r = RateAllocation::zeros(g.edge_count());
        assert_eq!(
            brute_force_min_cut(&g, &r, NodeId(5)).unwrap_err(),
            Error::TooLarge { max: BRUTE_FORCE_MAX_NODES, actual: 17 }
        );
    }

    #[test]
    fn agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..40 {
            let g = gen_random_dag(rng.gen_range(2..=9), 0.45, seed).unwrap();
            let r = RateAllocation::new((0..g.edge_count()).map(|_| rng.gen_range(0.0..5.0)).collect()).unwrap();
            for v in g.receivers() {
                let fast = min_cut(&g, &r, v).unwrap();
                let slow = brute_force_min_cut(&g, &r, v).unwrap();
                assert!((fast.value - slow.value).abs() <= 1e-9, "seed {seed} node {v}");
                assert!(fast.source_side.contains(&g.source()) && fast.sink_side.contains(&v));
            }
        }
    }
}
